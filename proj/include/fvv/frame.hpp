#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fvv/error.hpp"

namespace fvv {

enum class PixelFormat : std::uint8_t { Gray8 = 0, YUV420 = 1, RGB8 = 2 };

std::string to_string(PixelFormat format);
PixelFormat parse_pixel_format(const std::string& name);

// Mutable single-channel raster used as working storage by the processing stages.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  // Border-replicating access.
  const T& clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y);
  }

  bool same_shape(const auto& other) const { return width == other.width && height == other.height; }
  bool operator==(const Image&) const = default;
};

using Plane = Image<std::uint8_t>;
using PlaneF = Image<float>;

// Bilinear sample with border clamping.
template <typename T>
float sample_bilinear(const Image<T>& img, float x, float y) {
  const float xmax = static_cast<float>(img.width - 1);
  const float ymax = static_cast<float>(img.height - 1);
  if (x >= 0.0f && y >= 0.0f && x < xmax && y < ymax) {
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const float fx = x - static_cast<float>(x0);
    const float fy = y - static_cast<float>(y0);
    const T* p = img.data.data() + static_cast<std::size_t>(y0) * img.width + x0;
    const T* q = p + img.width;
    const float top = static_cast<float>(p[0]) * (1.0f - fx) + static_cast<float>(p[1]) * fx;
    const float bottom = static_cast<float>(q[0]) * (1.0f - fx) + static_cast<float>(q[1]) * fx;
    return top * (1.0f - fy) + bottom * fy;
  }
  x = std::clamp(x, 0.0f, xmax);
  y = std::clamp(y, 0.0f, ymax);
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float top = static_cast<float>(img.at(x0, y0)) * (1.0f - fx) + static_cast<float>(img.at(x1, y0)) * fx;
  const float bottom = static_cast<float>(img.at(x0, y1)) * (1.0f - fx) + static_cast<float>(img.at(x1, y1)) * fx;
  return top * (1.0f - fy) + bottom * fy;
}

// Precomputed bilinear footprint, reusable across planes of the same size.
struct BilinearTap {
  std::size_t base = 0;
  std::size_t step_x = 0;
  std::size_t step_y = 0;
  float fx = 0.0f;
  float fy = 0.0f;

  BilinearTap(int width, int height, float x, float y) {
    x = std::clamp(x, 0.0f, static_cast<float>(width - 1));
    y = std::clamp(y, 0.0f, static_cast<float>(height - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    fx = x - static_cast<float>(x0);
    fy = y - static_cast<float>(y0);
    base = static_cast<std::size_t>(y0) * width + x0;
    step_x = x0 + 1 < width ? 1 : 0;
    step_y = y0 + 1 < height ? static_cast<std::size_t>(width) : 0;
  }

  template <typename T>
  float operator()(const Image<T>& img) const {
    const T* p = img.data.data() + base;
    const float top = static_cast<float>(p[0]) * (1.0f - fx) + static_cast<float>(p[step_x]) * fx;
    const float bottom = static_cast<float>(p[step_y]) * (1.0f - fx) + static_cast<float>(p[step_y + step_x]) * fx;
    return top * (1.0f - fy) + bottom * fy;
  }
};

inline std::uint8_t clamp_u8(double v) {
  if (v <= 0.0) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(v + 0.5);
}

PlaneF to_float(const Plane& plane);
Plane to_u8(const PlaneF& plane);

// Immutable planar raster. Planes are shared between copies.
//
// Gray8 carries one plane, YUV420 carries Y plus two ceil(w/2) x ceil(h/2) chroma planes,
// RGB8 carries one interleaved plane of 3*w*h bytes.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, PixelFormat format, std::vector<std::vector<std::uint8_t>> planes,
        std::int64_t timestamp = 0);

  static Frame filled(int width, int height, PixelFormat format, std::uint8_t luma, std::int64_t timestamp = 0);

  // Builds a frame from separate channel planes (see components()).
  static Frame from_components(PixelFormat format, std::vector<Plane> components, std::int64_t timestamp = 0);
  static Frame from_gray(Plane gray, std::int64_t timestamp = 0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  PixelFormat format() const noexcept { return format_; }
  std::int64_t timestamp() const noexcept { return timestamp_; }
  bool empty() const noexcept { return planes_.empty(); }

  std::size_t plane_count() const noexcept { return planes_.size(); }
  std::span<const std::uint8_t> plane(std::size_t i) const { return *planes_.at(i); }
  std::size_t byte_size() const;

  // Separate channels: Gray -> {Y}, YUV420 -> {Y, U, V}, RGB8 -> {R, G, B}.
  std::vector<Plane> components() const;
  // Horizontal/vertical subsampling shift of component i (1 for YUV420 chroma).
  int component_shift(std::size_t i) const noexcept { return (format_ == PixelFormat::YUV420 && i > 0) ? 1 : 0; }

  // Luma channel (BT.601 integer approximation for RGB).
  Plane luma() const;

  Frame with_timestamp(std::int64_t t) const;

  // Pixel equality; timestamps are ignored.
  bool same_pixels(const Frame& other) const;

 private:
  int width_ = 0;
  int height_ = 0;
  PixelFormat format_ = PixelFormat::Gray8;
  std::int64_t timestamp_ = 0;
  std::vector<std::shared_ptr<const std::vector<std::uint8_t>>> planes_;
};

std::size_t expected_plane_size(int width, int height, PixelFormat format, std::size_t plane);
std::size_t plane_count_for(PixelFormat format);

// Compact binary encoding used to carry frames inside data packs.
void append_frame(std::vector<std::uint8_t>& out, const Frame& frame);
Frame read_frame(std::span<const std::uint8_t> bytes, std::size_t& offset);
std::vector<std::uint8_t> serialize_frames(std::span<const Frame> frames);
std::vector<Frame> deserialize_frames(std::span<const std::uint8_t> bytes);

// Headerless planar dump: planes concatenated in order.
void write_raw_frame(const std::string& path, const Frame& frame);
Frame read_raw_frame(const std::string& path, int width, int height, PixelFormat format, std::int64_t timestamp = 0);

// Crops/pastes a rectangle on every component of the frame; x,y,w,h in luma pixels.
Frame crop(const Frame& frame, int x, int y, int w, int h);
Frame mirror_horizontal(const Frame& frame);

}  // namespace fvv
