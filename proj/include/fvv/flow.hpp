#pragma once

#include <optional>
#include <utility>

#include "fvv/frame.hpp"

namespace fvv {

// Per-pixel backward displacement in pixels at the field's own scale.
struct FlowField {
  int width = 0;
  int height = 0;
  PlaneF dx;
  PlaneF dy;

  FlowField() = default;
  FlowField(int w, int h) : width(w), height(h), dx(w, h), dy(w, h) {}

  static FlowField constant(int w, int h, float fx, float fy);

  FlowField scaled(float factor) const;
  // Doubles resolution and vector magnitude (coarse-to-fine hand-off).
  FlowField upscale2x(int target_width, int target_height) const;
  // Resamples to another resolution, scaling vectors by the size ratio.
  FlowField resized(int target_width, int target_height) const;
  float max_abs_difference(const FlowField& other) const;
};

// Blend weight of the left candidate, in [0, 1].
struct OcclusionMask {
  PlaneF weight;
  int width() const noexcept { return weight.width; }
  int height() const noexcept { return weight.height; }
};

// out(u) = image(u + flow(u)), bilinear, clamped to the border.
PlaneF backward_warp(const PlaneF& image, const FlowField& flow);
// Warps every component; chroma uses the half-resolution, half-magnitude flow.
Frame backward_warp(const Frame& image, const FlowField& flow);

struct FlowLevelResult {
  FlowField left_to_right;   // L(u) ~ R(u + F)
  FlowField right_to_left;   // R(u) ~ L(u + F)
  PlaneF error_left;         // |L(u) - R(u + F_lr(u))|, locally averaged
  PlaneF error_right;
  FlowField mid_to_left;     // -0.5 * F_lr
  FlowField mid_to_right;    // -0.5 * F_rl
};

struct BlockSearch {
  int block_size = 8;
  int radius = 4;
  // Where neighbouring blocks disagree, pick per pixel the block vector with the lowest 3x3 SAD.
  bool pixel_refine = true;
};

// One pyramid level of coarse-to-fine block matching. `prior` holds the previous level's
// flows already upscaled to this level (both directions), or nothing at the coarsest level.
// The new flow is prior + residual with |residual| <= radius per component.
FlowLevelResult estimate_flow_level(const PlaneF& left, const PlaneF& right,
                                    const std::optional<std::pair<FlowField, FlowField>>& prior,
                                    const BlockSearch& search);

// M(u) = (e_r + eps) / (e_l + e_r + 2 eps).
OcclusionMask estimate_mask(const PlaneF& warped_left, const PlaneF& warped_right, const PlaneF& error_left,
                            const PlaneF& error_right, double epsilon);

PlaneF blend(const PlaneF& warped_left, const PlaneF& warped_right, const OcclusionMask& mask);
// Convex combination per component, rounded to the nearest sample value.
Frame blend(const Frame& warped_left, const Frame& warped_right, const OcclusionMask& mask);

// 2x2 box reduction used to build the luma pyramid.
PlaneF downsample2x(const PlaneF& image);

}  // namespace fvv
