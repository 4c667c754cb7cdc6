#pragma once

#include <array>
#include <functional>
#include <vector>

#include "fvv/flow.hpp"
#include "fvv/frame.hpp"

namespace fvv {

// Optional post-blend refinement stage; receives the blend and both warped candidates.
using RefineHook = std::function<Frame(const Frame& blended, const Frame& warped_left, const Frame& warped_right)>;

struct InterpConfig {
  static constexpr int kScales = 3;  // 1/4, 1/2, 1 of the input resolution

  int block_size = 8;
  bool pixel_refine = true;
  std::array<int, kScales> search_radius{8, 3, 2};  // pixels at each scale, coarsest first
  double mask_epsilon = 1e-3;
  int border_band = 8;
  // Warp reliability e = consistency_weight * |forward/backward mismatch| + photometric_weight * match error.
  float consistency_weight = 16.0f;
  float photometric_weight = 0.25f;
  RefineHook refine;
};

struct ScaleDiagnostics {
  FlowLevelResult flows;
  FlowField prior_left_to_right;  // upscaled previous-level flow (zero at the coarsest scale)
  OcclusionMask mask;
  PlaneF blended;  // luma I^s
};

struct InterpResult {
  Frame frame;
  std::vector<ScaleDiagnostics> scales;  // coarsest first
};

InterpResult interpolate_with_diagnostics(const Frame& left, const Frame& right, const InterpConfig& config = {});

// Midpoint view between two adjacent views.
Frame interpolate(const Frame& left, const Frame& right, const InterpConfig& config = {});

// Recursive midpoint interpolation: 2^stages - 1 views ordered left to right, endpoints excluded.
std::vector<Frame> dense_views(const Frame& left, const Frame& right, int stages, const InterpConfig& config = {});

// Per-pixel unreliability of a warp toward the mid view (see InterpConfig).
PlaneF warp_error(const FlowField& mid_to_side, const FlowField& side_to_other, const PlaneF& side_match_error,
                  float consistency_weight, float photometric_weight);

constexpr int kMaxDenseStages = 6;

}  // namespace fvv
