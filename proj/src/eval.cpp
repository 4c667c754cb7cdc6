#include "fvv/eval.hpp"

#include <cmath>

#include "fvv/metrics.hpp"
#include "fvv/parallel.hpp"

namespace fvv {

namespace {

// JSON has no infinity; identical images are reported as the string "inf".
nlohmann::json db(double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); }

nlohmann::json mean_db(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isinf(x)) continue;
    sum += x;
    ++n;
  }
  if (n == 0) return v.empty() ? nlohmann::json(nullptr) : nlohmann::json("inf");
  return sum / static_cast<double>(n);
}

}  // namespace

EvalReport evaluate_scene(const std::filesystem::path& dir, int stages, int frame, const InterpConfig& config) {
  if (stages < 1 || stages > kMaxDenseStages) {
    throw ConfigError("eval stages must be in 1.." + std::to_string(kMaxDenseStages));
  }
  const CapturedScene cap = read_manifest(dir);
  if (frame < 0 || frame >= cap.frame_count) {
    throw RangeError("frame " + std::to_string(frame) + " outside 0.." + std::to_string(cap.frame_count - 1));
  }
  EvalReport report;
  report.scene = dir;
  report.stages = stages;
  report.frame = frame;
  report.border = config.border_band;
  const SceneRenderer renderer(cap.scene);
  const int gaps = cap.scene.rig.camera_count - 1;
  std::vector<std::vector<EvalRow>> per_gap(static_cast<std::size_t>(gaps));
  parallel_for(static_cast<std::size_t>(gaps), [&](std::size_t g) {
    const int c = static_cast<int>(g);
    const Frame left = load_captured_frame(dir, cap.scene, c, frame);
    const Frame right = load_captured_frame(dir, cap.scene, c + 1, frame);
    const auto views = dense_views(left, right, stages, config);
    for (int d = 1; d <= stages; ++d) {
      EvalRow row;
      row.gap = c;
      row.depth = d;
      row.position = 1.0 / static_cast<double>(1 << d);
      const Frame& got = views[static_cast<std::size_t>((1 << (stages - d)) - 1)];
      const double pos = c + row.position;
      const Frame truth = renderer.render(pos, frame);
      const MetricReport m = evaluate(got, truth, config.border_band);
      row.psnr = m.psnr;
      row.ssim = m.ssim;
      row.lap_distance = m.lap_distance;
      row.psnr_valid = psnr(got, truth, renderer.validity_mask(pos, frame, config.border_band), config.border_band);
      per_gap[g].push_back(row);
    }
  });
  for (auto& rows : per_gap) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  std::vector<double> p, pv, s, l;
  for (const auto& r : rows) {
    rows_json.push_back({{"gap", r.gap},
                         {"left_camera", r.gap},
                         {"right_camera", r.gap + 1},
                         {"depth", r.depth},
                         {"position", r.position},
                         {"psnr", db(r.psnr)},
                         {"psnr_valid", db(r.psnr_valid)},
                         {"ssim", r.ssim},
                         {"lap_distance", r.lap_distance}});
    p.push_back(r.psnr);
    pv.push_back(r.psnr_valid);
    s.push_back(r.ssim);
    l.push_back(r.lap_distance);
  }
  auto mean = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
  };
  return {{"scene", scene.string()},
          {"config", {{"stages", stages}, {"frame", frame}, {"border", border}}},
          {"rows", rows_json},
          {"aggregate",
           {{"rows", rows.size()},
            {"psnr", mean_db(p)},
            {"psnr_valid", mean_db(pv)},
            {"ssim", mean(s)},
            {"lap_distance", mean(l)}}}};
}

}  // namespace fvv
