#include "fvv/interp.hpp"

#include <cmath>

namespace fvv {

PlaneF warp_error(const FlowField& mid_to_side, const FlowField& side_to_other, const PlaneF& side_match_error,
                  float consistency_weight, float photometric_weight) {
  const int w = mid_to_side.width;
  const int h = mid_to_side.height;
  PlaneF e(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float sx = static_cast<float>(x) + mid_to_side.dx.at(x, y);
      const float sy = static_cast<float>(y) + mid_to_side.dy.at(x, y);
      const BilinearTap tap(w, h, sx, sy);
      // The sampled source pixel should itself land on u at the mid view.
      const float cx = 0.5f * (tap(side_to_other.dx) - side_to_other.dx.at(x, y));
      const float cy = 0.5f * (tap(side_to_other.dy) - side_to_other.dy.at(x, y));
      const float consistency = std::sqrt(cx * cx + cy * cy);
      e.at(x, y) = consistency_weight * consistency + photometric_weight * tap(side_match_error);
    }
  }
  return e;
}

InterpResult interpolate_with_diagnostics(const Frame& left, const Frame& right, const InterpConfig& config) {
  if (left.width() != right.width() || left.height() != right.height() || left.format() != right.format()) {
    throw ShapeError("interpolation inputs differ in size or format");
  }
  std::array<PlaneF, InterpConfig::kScales> pyr_l;
  std::array<PlaneF, InterpConfig::kScales> pyr_r;
  pyr_l[InterpConfig::kScales - 1] = to_float(left.luma());
  pyr_r[InterpConfig::kScales - 1] = to_float(right.luma());
  for (int s = InterpConfig::kScales - 2; s >= 0; --s) {
    pyr_l[s] = downsample2x(pyr_l[s + 1]);
    pyr_r[s] = downsample2x(pyr_r[s + 1]);
  }

  InterpResult result;
  std::optional<std::pair<FlowField, FlowField>> prior;
  for (int s = 0; s < InterpConfig::kScales; ++s) {
    const int w = pyr_l[s].width;
    const int h = pyr_l[s].height;
    ScaleDiagnostics d;
    d.prior_left_to_right = prior ? prior->first : FlowField(w, h);
    d.flows = estimate_flow_level(pyr_l[s], pyr_r[s], prior, {config.block_size, config.search_radius[s], config.pixel_refine && s + 1 == InterpConfig::kScales});
    const PlaneF wl = backward_warp(pyr_l[s], d.flows.mid_to_left);
    const PlaneF wr = backward_warp(pyr_r[s], d.flows.mid_to_right);
    const PlaneF el = warp_error(d.flows.mid_to_left, d.flows.left_to_right, d.flows.error_left,
                                 config.consistency_weight, config.photometric_weight);
    const PlaneF er = warp_error(d.flows.mid_to_right, d.flows.right_to_left, d.flows.error_right,
                                 config.consistency_weight, config.photometric_weight);
    d.mask = estimate_mask(wl, wr, el, er, config.mask_epsilon);
    d.blended = blend(wl, wr, d.mask);
    if (s + 1 < InterpConfig::kScales) {
      const int nw = pyr_l[s + 1].width;
      const int nh = pyr_l[s + 1].height;
      prior.emplace(d.flows.left_to_right.upscale2x(nw, nh), d.flows.right_to_left.upscale2x(nw, nh));
    }
    result.scales.push_back(std::move(d));
  }

  const auto& finest = result.scales.back();
  const Frame warped_left = backward_warp(left, finest.flows.mid_to_left);
  const Frame warped_right = backward_warp(right, finest.flows.mid_to_right);
  Frame out = blend(warped_left, warped_right, finest.mask);
  if (config.refine) out = config.refine(out, warped_left, warped_right);
  result.frame = out.with_timestamp(left.timestamp());
  return result;
}

Frame interpolate(const Frame& left, const Frame& right, const InterpConfig& config) {
  return interpolate_with_diagnostics(left, right, config).frame;
}

std::vector<Frame> dense_views(const Frame& left, const Frame& right, int stages, const InterpConfig& config) {
  if (stages < 1) throw ConfigError("dense_views needs at least one stage");
  if (stages > kMaxDenseStages) {
    throw ConfigError("dense_views refuses " + std::to_string(stages) + " stages (max " +
                      std::to_string(kMaxDenseStages) + ")");
  }
  std::vector<Frame> seq{left, right};
  for (int s = 0; s < stages; ++s) {
    std::vector<Frame> next;
    next.reserve(seq.size() * 2 - 1);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      next.push_back(seq[i]);
      next.push_back(interpolate(seq[i], seq[i + 1], config));
    }
    next.push_back(seq.back());
    seq = std::move(next);
  }
  return {seq.begin() + 1, seq.end() - 1};
}

}  // namespace fvv
