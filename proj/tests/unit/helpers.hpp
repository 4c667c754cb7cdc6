#pragma once

#include <cstdint>
#include <random>

#include "fvv/frame.hpp"

namespace testutil {

inline fvv::Frame noise_frame(int w, int h, fvv::PixelFormat format, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<std::vector<std::uint8_t>> planes;
  for (std::size_t i = 0; i < fvv::plane_count_for(format); ++i) {
    std::vector<std::uint8_t> p(fvv::expected_plane_size(w, h, format, i));
    for (auto& v : p) v = static_cast<std::uint8_t>(rng() & 0xFF);
    planes.push_back(std::move(p));
  }
  return fvv::Frame(w, h, format, std::move(planes));
}

// Smooth gradient with a little texture; compresses like natural content.
inline fvv::Frame smooth_frame(int w, int h, fvv::PixelFormat format, int phase = 0) {
  std::vector<fvv::Plane> comps;
  for (std::size_t i = 0; i < fvv::plane_count_for(format) * (format == fvv::PixelFormat::RGB8 ? 3 : 1); ++i) {
    const int s = (format == fvv::PixelFormat::YUV420 && i > 0) ? 1 : 0;
    fvv::Plane p((w + s) >> s, (h + s) >> s);
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        p.at(x, y) = static_cast<std::uint8_t>((x * 3 + y * 2 + phase + static_cast<int>(i) * 40 + ((x / 7 + y / 5) % 3) * 9) & 0xFF);
      }
    }
    comps.push_back(std::move(p));
  }
  return fvv::Frame::from_components(format, std::move(comps));
}

}  // namespace testutil
