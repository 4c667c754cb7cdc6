#include <cmath>
#include <cstdio>
#include <sstream>

#include "fvv/bytes.hpp"
#include "fvv/capture_sim.hpp"
#include "fvv/parallel.hpp"
#include "fvv/server.hpp"

namespace fvv {

void PipelineConfig::validate() const {
  if (stages < 0 || stages > kMaxDenseStages) {
    throw ConfigError("stages must be in 0.." + std::to_string(kMaxDenseStages) + ", got " + std::to_string(stages));
  }
  if (views_per_side < 0 || views_per_side > (1 << stages)) {
    throw ConfigError("views_per_side must be in 0.." + std::to_string(1 << stages) + ", got " +
                      std::to_string(views_per_side));
  }
  if (fps < 1 || fps > 255) throw ConfigError("fps must be in 1..255");
  if (!(segment_duration > 0.0)) throw ConfigError("segment_duration must be positive");
  if (quality < 1 || quality > 100) throw ConfigError("quality must be in 1..100");
  if (gop < 1 || gop > 255) throw ConfigError("gop must be in 1..255");
  if (port < 0 || port > 65535) throw ConfigError("port must be in 0..65535");
  if (channel_capacity == 0) throw ConfigError("channel capacity must be at least 1");
  if (playlist_window == 0) throw ConfigError("playlist window must be at least 1");
  if (max_frames < 0) throw ConfigError("max_frames must not be negative");
  segment_plan(fps, segment_duration, gop);
}

namespace {

class SceneSource : public FrameSource {
 public:
  SceneSource(std::filesystem::path dir, bool loop) : dir_(std::move(dir)), loop_(loop) {
    captured_ = read_manifest(dir_);
    if (captured_.frame_count <= 0) throw IoError("scene " + dir_.string() + " holds no frames");
  }
  SourceFormat format() const override {
    const auto& s = captured_.scene;
    return {s.width, s.height, s.format, s.fps, s.rig.camera_count};
  }
  std::optional<std::vector<Frame>> read(std::int64_t t) override {
    if (t >= captured_.frame_count && !loop_) return std::nullopt;
    const int f = static_cast<int>(t % captured_.frame_count);
    std::vector<Frame> cams;
    for (int c = 0; c < captured_.scene.rig.camera_count; ++c) {
      cams.push_back(load_captured_frame(dir_, captured_.scene, c, f).with_timestamp(t));
    }
    return cams;
  }

 private:
  std::filesystem::path dir_;
  bool loop_;
  CapturedScene captured_;
};

class MemorySource : public FrameSource {
 public:
  MemorySource(std::vector<std::vector<Frame>> ticks, int fps, bool loop) : ticks_(std::move(ticks)), loop_(loop) {
    if (ticks_.empty() || ticks_.front().empty()) throw ConfigError("memory source needs at least one tick");
    const Frame& f = ticks_.front().front();
    format_ = {f.width(), f.height(), f.format(), fps, static_cast<int>(ticks_.front().size())};
  }
  SourceFormat format() const override { return format_; }
  std::optional<std::vector<Frame>> read(std::int64_t t) override {
    if (t >= static_cast<std::int64_t>(ticks_.size()) && !loop_) return std::nullopt;
    auto cams = ticks_[static_cast<std::size_t>(t % static_cast<std::int64_t>(ticks_.size()))];
    for (auto& c : cams) c = c.with_timestamp(t);
    return cams;
  }

 private:
  std::vector<std::vector<Frame>> ticks_;
  bool loop_;
  SourceFormat format_;
};

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

std::shared_ptr<FrameSource> open_scene_source(const std::filesystem::path& dir, bool loop) {
  return std::make_shared<SceneSource>(dir, loop);
}

std::shared_ptr<FrameSource> memory_source(std::vector<std::vector<Frame>> ticks, int fps, bool loop) {
  return std::make_shared<MemorySource>(std::move(ticks), fps, loop);
}

std::vector<Frame> synthesize_views(const std::vector<Frame>& cameras, const ViewIndexModel& model,
                                    const InterpConfig& config, double* worker_cpu_ms) {
  if (static_cast<int>(cameras.size()) != model.camera_count()) {
    throw ConfigError("expected " + std::to_string(model.camera_count()) + " camera frames, got " +
                      std::to_string(cameras.size()));
  }
  std::vector<Frame> views(static_cast<std::size_t>(model.total_views()));
  for (int c = 0; c < model.camera_count(); ++c) views[model.global_index(c)] = cameras[c];
  const std::size_t gaps = cameras.size() - 1;
  const double cpu = parallel_for(model.stages() > 0 ? gaps : 0, [&](std::size_t g) {
    auto dense = dense_views(cameras[g], cameras[g + 1], model.stages(), config);
    const int base = model.global_index(static_cast<int>(g));
    for (std::size_t k = 0; k < dense.size(); ++k) {
      views[base + 1 + k] = dense[k].with_timestamp(cameras[g].timestamp());
    }
  });
  if (worker_cpu_ms) *worker_cpu_ms = cpu;
  return views;
}

std::vector<ClusterFrame> organize_clusters(const std::vector<Frame>& views, const std::vector<ClusterLayout>& layouts) {
  std::vector<ClusterFrame> out(layouts.size());
  parallel_for(layouts.size(), [&](std::size_t c) {
    const auto& l = layouts[c];
    std::vector<Frame> others;
    for (int index : l.indices) {
      if (index != l.anchor_index) others.push_back(views.at(index));
    }
    out[c] = assemble_cluster_frame(views.at(l.anchor_index), others, l);
  });
  return out;
}

const StageStats& StageLatencyReport::stage(const std::string& name) const {
  for (const auto& s : stages) {
    if (s.name == name) return s;
  }
  throw RangeError("no stage named '" + name + "'");
}

double StageLatencyReport::throughput_bound() const {
  double worst = 0.0;
  for (const auto& s : stages) worst = std::max(worst, s.avg_ms);
  return worst > 0.0 ? 0.9 * 1000.0 / worst : 0.0;
}

nlohmann::json StageLatencyReport::to_json() const {
  nlohmann::json st = nlohmann::json::array();
  for (const auto& s : stages) {
    st.push_back({{"name", s.name},
                  {"count", s.count},
                  {"min_ms", s.min_ms},
                  {"avg_ms", s.avg_ms},
                  {"max_ms", s.max_ms},
                  {"cpu_min_ms", s.cpu_min_ms},
                  {"cpu_avg_ms", s.cpu_avg_ms},
                  {"cpu_max_ms", s.cpu_max_ms}});
  }
  return {{"iterations", iterations},
          {"stages", st},
          {"throughput_fps", throughput_fps},
          {"throughput_bound_fps", throughput_bound()}};
}

std::string StageLatencyReport::table() const {
  // Published per-frame figures (GPU server), printed for orientation only.
  struct Ref {
    const char* name;
    double max, min, avg;
  };
  static const Ref refs[] = {{kStageInterp, 17.89, 11.24, 12.85},
                             {kStageStitch, 2.08, 0.98, 1.27},
                             {kStageEncode, 9.62, 4.27, 5.62},
                             {kStageSchedule, 8.97, 3.21, 5.45}};
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "Latency per frame over %zu iterations (ms)\n", iterations);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-10s", "");
  out << buf;
  for (const auto& s : stages) {
    std::snprintf(buf, sizeof buf, " | %-20s", s.name.c_str());
    out << buf;
  }
  out << "\n";
  auto row = [&](const char* label, auto measured, auto reference, bool with_ref = true) {
    std::snprintf(buf, sizeof buf, "%-10s", label);
    out << buf;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      double ref = 0.0;
      for (const auto& r : refs) {
        if (stages[i].name == r.name) ref = reference(r);
      }
      if (with_ref) {
        std::snprintf(buf, sizeof buf, " | %8.2f (ref %6.2f)", measured(stages[i]), ref);
      } else {
        std::snprintf(buf, sizeof buf, " | %8.2f %12s", measured(stages[i]), "");
      }
      out << buf;
    }
    out << "\n";
  };
  row("Maximum", [](const StageStats& s) { return s.max_ms; }, [](const Ref& r) { return r.max; });
  row("Minimum", [](const StageStats& s) { return s.min_ms; }, [](const Ref& r) { return r.min; });
  row("Average", [](const StageStats& s) { return s.avg_ms; }, [](const Ref& r) { return r.avg; });
  row("CPU avg", [](const StageStats& s) { return s.cpu_avg_ms; }, [](const Ref&) { return 0.0; }, false);
  std::snprintf(buf, sizeof buf, "throughput %.2f fps (0.9 / slowest stage = %.2f fps)\n", throughput_fps,
                throughput_bound());
  out << buf;
  return out.str();
}

void LatencyRecorder::record(const std::string& stage, double wall_ms, double cpu_ms) {
  std::lock_guard lock(mu_);
  Acc& a = acc_[stage];
  if (a.n == 0) {
    a.min = a.max = wall_ms;
    a.cpu_min = a.cpu_max = cpu_ms;
  }
  ++a.n;
  a.sum += wall_ms;
  a.min = std::min(a.min, wall_ms);
  a.max = std::max(a.max, wall_ms);
  a.cpu_sum += cpu_ms;
  a.cpu_min = std::min(a.cpu_min, cpu_ms);
  a.cpu_max = std::max(a.cpu_max, cpu_ms);
}

void LatencyRecorder::frame_done() {
  std::lock_guard lock(mu_);
  done_.push_back(Clock::now());
}

StageLatencyReport LatencyRecorder::report() const {
  std::lock_guard lock(mu_);
  StageLatencyReport r;
  r.iterations = done_.size();
  for (const char* name : {kStageInterp, kStageStitch, kStageEncode, kStageSchedule}) {
    StageStats s;
    s.name = name;
    auto it = acc_.find(name);
    if (it != acc_.end() && it->second.n > 0) {
      const Acc& a = it->second;
      s.count = a.n;
      s.min_ms = a.min;
      s.max_ms = a.max;
      s.avg_ms = std::clamp(a.sum / static_cast<double>(a.n), a.min, a.max);
      s.cpu_min_ms = a.cpu_min;
      s.cpu_max_ms = a.cpu_max;
      s.cpu_avg_ms = std::clamp(a.cpu_sum / static_cast<double>(a.n), a.cpu_min, a.cpu_max);
    }
    r.stages.push_back(s);
  }
  // Steady state: skip the first tenth while the stages fill.
  if (done_.size() >= 3) {
    const std::size_t first = done_.size() / 10;
    const double span = ms_between(done_[first], done_.back());
    if (span > 0.0) r.throughput_fps = static_cast<double>(done_.size() - 1 - first) * 1000.0 / span;
  }
  return r;
}

Pipeline::Pipeline(PipelineConfig config, std::shared_ptr<FrameSource> source)
    : config_(std::move(config)),
      source_(std::move(source)),
      cameras_(config_.channel_capacity),
      clusters_(config_.channel_capacity),
      tiles_(config_.channel_capacity) {
  config_.validate();
  if (!source_) throw ConfigError("pipeline needs a frame source");
  format_ = source_->format();
  if (format_.cameras < 2) throw ConfigError("at least two cameras are required");
  if (format_.fps != config_.fps) {
    throw ConfigError("scene was captured at " + std::to_string(format_.fps) + " fps but the pipeline runs at " +
                      std::to_string(config_.fps));
  }
  model_ = ViewIndexModel(format_.cameras, config_.stages);
  layouts_ = build_layouts(model_, config_.views_per_side);
  for (const auto& l : layouts_) geometry_.push_back(cluster_geometry(l, format_.width, format_.height));
  lookup_ = build_lookup_table(model_, layouts_);
  plan_ = segment_plan(config_.fps, config_.segment_duration, config_.gop);
  store_ = std::make_unique<SegmentStore>(format_.cameras, config_.segment_duration, config_.playlist_window);
}

Pipeline::~Pipeline() {
  stop();
  close_all();
  threads_.clear();
}

nlohmann::json Pipeline::lookup_document() const {
  auto doc = to_json(lookup_);
  doc["frame"] = {{"width", format_.width},
                  {"height", format_.height},
                  {"format", to_string(format_.format)},
                  {"fps", config_.fps},
                  {"segment_duration", config_.segment_duration},
                  {"gop", config_.gop},
                  {"quality", config_.quality}};
  return doc;
}

void Pipeline::start() {
  if (started_) throw ContractViolation("pipeline already started");
  started_ = true;
  // Subscribe every consumer before any producer runs.
  const SubscriberId s_cam = cameras_.subscribe();
  const SubscriberId s_clu = clusters_.subscribe();
  const SubscriberId s_til = tiles_.subscribe();
  threads_.emplace_back([this, s_til] { package_loop(s_til); });
  threads_.emplace_back([this, s_clu] { encode_loop(s_clu); });
  threads_.emplace_back([this, s_cam] { interp_loop(s_cam); });
  threads_.emplace_back([this] { ingest_loop(); });
}

void Pipeline::stop() { stop_ = true; }

void Pipeline::wait() {
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
  std::lock_guard lock(fail_mu_);
  if (failure_) std::rethrow_exception(failure_);
}

void Pipeline::fail(std::exception_ptr e) {
  {
    std::lock_guard lock(fail_mu_);
    if (!failure_) failure_ = e;
  }
  stop_ = true;
  close_all();
}

void Pipeline::close_all() {
  cameras_.close();
  clusters_.close();
  tiles_.close();
}

void Pipeline::ingest_loop() {
  try {
    const auto start = Clock::now();
    const auto period = std::chrono::duration<double>(1.0 / config_.fps);
    for (std::int64_t t = 0; !stop_; ++t) {
      if (config_.max_frames > 0 && t >= config_.max_frames) break;
      if (config_.live) {
        std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(period * t));
      }
      auto cams = source_->read(t);
      if (!cams) break;
      cameras_.put(UnifiedDataPack(PackKind::FrameRaw, serialize_frames(*cams), static_cast<std::uint64_t>(t)));
    }
    cameras_.close();
  } catch (const ChannelClosedError&) {
  } catch (...) {
    fail(std::current_exception());
  }
}

void Pipeline::interp_loop(SubscriberId sub) {
  try {
    while (auto pack = cameras_.get(sub)) {
      const auto cams = deserialize_frames(pack->payload());
      auto trace = pack->trace();

      auto t0 = Clock::now();
      double c0 = thread_cpu_ms();
      double workers = 0.0;
      const auto views = synthesize_views(cams, model_, config_.interp, &workers);
      auto t1 = Clock::now();
      double c1 = thread_cpu_ms();
      trace.push_back({kStageInterp, t0, t1, c1 - c0 + workers});

      std::vector<Frame> stitched;
      stitched.reserve(layouts_.size());
      for (auto& cf : organize_clusters(views, layouts_)) stitched.push_back(std::move(cf.stitched));
      auto t2 = Clock::now();
      double c2 = thread_cpu_ms();
      trace.push_back({kStageStitch, t1, t2, c2 - c1});

      // Schedule hop starts here; the encoder closes the stamp once the frames are back in hand.
      auto bytes = serialize_frames(stitched);
      trace.push_back({kStageSchedule, t2, t2, thread_cpu_ms() - c2});
      UnifiedDataPack out(PackKind::FrameRaw, std::move(bytes), pack->sequence());
      out.set_trace(std::move(trace));
      clusters_.put(std::move(out));
    }
    clusters_.close();
  } catch (const ChannelClosedError&) {
  } catch (...) {
    fail(std::current_exception());
  }
}

void Pipeline::encode_loop(SubscriberId sub) {
  try {
    std::vector<std::vector<TileEncoder>> encoders(layouts_.size());
    for (std::size_t c = 0; c < layouts_.size(); ++c) {
      for (const auto& r : geometry_[c].tiles) {
        encoders[c].emplace_back(
            TileStreamHeader{r.width, r.height, format_.format, config_.gop, config_.quality, config_.fps});
      }
    }
    while (auto pack = clusters_.get(sub)) {
      const double c0 = thread_cpu_ms();
      const auto stitched = deserialize_frames(pack->payload());
      auto trace = pack->trace();
      auto t1 = Clock::now();
      const double c1 = thread_cpu_ms();
      if (!trace.empty() && trace.back().stage == kStageSchedule) {
        trace.back().end = t1;
        trace.back().cpu_ms += c1 - c0;
      }
      if (stitched.size() != layouts_.size()) throw LayoutError("cluster count changed mid-stream");

      std::vector<std::vector<std::uint8_t>> payloads(layouts_.size());
      const double workers = parallel_for(layouts_.size(), [&](std::size_t c) {
        ClusterRecord rec;
        for (std::size_t k = 0; k < geometry_[c].tiles.size(); ++k) {
          const auto& r = geometry_[c].tiles[k];
          const auto enc = encoders[c][k].encode(crop(stitched[c], r.x, r.y, r.width, r.height));
          std::vector<std::uint8_t> bytes;
          append_record(bytes, enc.record);
          rec.tiles.push_back(std::move(bytes));
        }
        payloads[c] = encode_cluster_payload(rec);
      });
      std::vector<std::uint8_t> body;
      ByteWriter w(body);
      w.u16(static_cast<std::uint16_t>(payloads.size()));
      for (const auto& p : payloads) {
        w.u32(static_cast<std::uint32_t>(p.size()));
        w.bytes(p);
      }
      auto t2 = Clock::now();
      trace.push_back({kStageEncode, t1, t2, thread_cpu_ms() - c1 + workers});
      UnifiedDataPack out(PackKind::TileBitstream, std::move(body), pack->sequence());
      out.set_trace(std::move(trace));
      tiles_.put(std::move(out));
    }
    tiles_.close();
  } catch (const ChannelClosedError&) {
  } catch (...) {
    fail(std::current_exception());
  }
}

void Pipeline::package_loop(SubscriberId sub) {
  try {
    const int per_segment = plan_.frames_per_segment;
    std::vector<std::vector<ClusterRecord>> pending(layouts_.size());
    std::uint64_t sequence = 0;
    auto flush = [&](std::size_t frames) {
      const SegmentTiming timing{config_.fps,
                                 (sequence * static_cast<std::uint64_t>(per_segment) * ts::kClock +
                                  static_cast<std::uint64_t>(config_.fps) / 2) /
                                     static_cast<std::uint64_t>(config_.fps)};
      const double duration = static_cast<double>(frames) / config_.fps;
      for (std::size_t c = 0; c < pending.size(); ++c) {
        store_->publish(static_cast<int>(c), sequence, mux_segment(pending[c], timing), duration);
        pending[c].clear();
      }
      ++sequence;
    };
    while (auto pack = tiles_.get(sub)) {
      ByteReader r(pack->payload());
      const std::size_t n = r.u16();
      if (n != pending.size()) throw LayoutError("tile pack carries " + std::to_string(n) + " clusters");
      for (std::size_t c = 0; c < n; ++c) {
        const auto view = parse_cluster_payload(r.take(r.u32()));
        ClusterRecord rec;
        for (std::size_t k = 0; k < view.tiles.size(); ++k) {
          const auto s = view.tile(k);
          rec.tiles.emplace_back(s.begin(), s.end());
        }
        pending[c].push_back(std::move(rec));
      }
      for (const auto& s : pack->trace()) latency_.record(s.stage, ms_between(s.begin, s.end), s.cpu_ms);
      latency_.frame_done();
      ++frames_out_;
      if (static_cast<int>(pending.front().size()) == per_segment) flush(pending.front().size());
    }
    if (!pending.front().empty()) flush(pending.front().size());
  } catch (const ChannelClosedError&) {
  } catch (...) {
    fail(std::current_exception());
  }
  store_->end_stream();
  finished_ = true;
}

StageLatencyReport bench(PipelineConfig config, std::shared_ptr<FrameSource> source, std::size_t iterations) {
  if (iterations == 0) throw ConfigError("bench needs at least one iteration");
  config.live = false;
  config.max_frames = static_cast<std::int64_t>(iterations);
  Pipeline p(std::move(config), std::move(source));
  p.start();
  p.wait();
  return p.latency().report();
}

}  // namespace fvv
