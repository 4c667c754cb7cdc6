#pragma once

#include <array>
#include <limits>
#include <optional>

#include "fvv/frame.hpp"

namespace fvv {

// Identical inputs give +infinity.
double psnr(const Frame& a, const Frame& b, int border = 0);
// Restricted to pixels where valid != 0 (and outside the border band).
double psnr(const Frame& a, const Frame& b, const Plane& valid, int border = 0);
double psnr(const Plane& a, const Plane& b, const Plane* valid, int border);

struct SsimParams {
  static constexpr int kWindow = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double max_value = 255.0;
};

// Mean SSIM over all 11x11 Gaussian windows fully inside the border-cropped luma.
double ssim(const Frame& a, const Frame& b, int border = 0);
double ssim(const Plane& a, const Plane& b, int border);
std::array<double, SsimParams::kWindow> ssim_window();

constexpr int kLapLevels = 5;

// Level weights 2^(i-1), i = 1 the finest level.
constexpr std::array<double, kLapLevels> lap_weights() { return {1.0, 2.0, 4.0, 8.0, 16.0}; }

// Weighted sum over a 5-level Laplacian pyramid of per-level mean absolute differences.
double lap_distance(const Frame& a, const Frame& b);
double lap_distance(const Plane& a, const Plane& b);
// Per-level mean absolute differences (unweighted), finest first.
std::array<double, kLapLevels> lap_level_differences(const Plane& a, const Plane& b);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double lap_distance = 0.0;
  int excluded_border = 0;
};

// lap_distance is taken over the centred region inside the border whose sides are multiples of 16.
MetricReport evaluate(const Frame& a, const Frame& b, int border);

}  // namespace fvv
