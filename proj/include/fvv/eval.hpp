#pragma once

#include <filesystem>
#include <vector>

#include "fvv/capture_sim.hpp"
#include "fvv/interp.hpp"
#include "json.hpp"

namespace fvv {

// One interpolated view against the rendered ground truth. Depth d scores the view at
// position 1/2^d past the left camera, so depth 1 is the midpoint.
struct EvalRow {
  int gap = 0;
  int depth = 1;
  double position = 0.5;
  double psnr = 0.0;        // border band excluded; +inf when identical
  double psnr_valid = 0.0;  // also excluding silhouette bands
  double ssim = 0.0;
  double lap_distance = 0.0;
};

struct EvalReport {
  std::filesystem::path scene;
  int stages = 1;
  int frame = 0;
  int border = 0;
  std::vector<EvalRow> rows;

  nlohmann::json to_json() const;
};

EvalReport evaluate_scene(const std::filesystem::path& dir, int stages, int frame = 0, const InterpConfig& config = {});

}  // namespace fvv
