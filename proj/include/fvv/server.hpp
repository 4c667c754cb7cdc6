#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fvv/channel.hpp"
#include "fvv/cluster.hpp"
#include "fvv/codec.hpp"
#include "fvv/hls.hpp"
#include "fvv/interp.hpp"
#include "json.hpp"

namespace fvv {

struct PipelineConfig {
  std::filesystem::path input;  // captured scene directory
  bool live = true;             // pace ingest at fps
  int stages = 4;
  int views_per_side = 16;
  int fps = 30;
  double segment_duration = 2.0;
  int gop = 30;
  int quality = 75;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t channel_capacity = 4;
  std::size_t playlist_window = 6;
  std::int64_t max_frames = 0;  // 0: until the input ends
  InterpConfig interp;

  // Throws ConfigError / GopAlignmentError.
  void validate() const;
};

struct SourceFormat {
  int width = 0;
  int height = 0;
  PixelFormat format = PixelFormat::YUV420;
  int fps = 30;
  int cameras = 0;
};

// Synchronized camera frames, one tick at a time.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual SourceFormat format() const = 0;
  // All camera frames of tick t, or nullopt once the input is exhausted.
  virtual std::optional<std::vector<Frame>> read(std::int64_t t) = 0;
};

// Reads a captured scene directory. With loop, ticks wrap around the recorded length.
std::shared_ptr<FrameSource> open_scene_source(const std::filesystem::path& dir, bool loop = false);
std::shared_ptr<FrameSource> memory_source(std::vector<std::vector<Frame>> ticks, int fps, bool loop = false);

// Reference (single-threaded) building blocks shared by the pipeline and the oracles.
// Every global view for one tick: cameras at their anchors, dense views in between.
std::vector<Frame> synthesize_views(const std::vector<Frame>& cameras, const ViewIndexModel& model,
                                    const InterpConfig& config = {}, double* worker_cpu_ms = nullptr);
std::vector<ClusterFrame> organize_clusters(const std::vector<Frame>& views, const std::vector<ClusterLayout>& layouts);

inline constexpr const char* kStageInterp = "view interpolation";
inline constexpr const char* kStageStitch = "adaptive stitch";
inline constexpr const char* kStageEncode = "encoder";
inline constexpr const char* kStageSchedule = "schedule";

struct StageStats {
  std::string name;
  std::size_t count = 0;
  double min_ms = 0.0;
  double avg_ms = 0.0;
  double max_ms = 0.0;
  double cpu_min_ms = 0.0;
  double cpu_avg_ms = 0.0;
  double cpu_max_ms = 0.0;
};

struct StageLatencyReport {
  std::size_t iterations = 0;
  std::vector<StageStats> stages;  // fixed order: interp, stitch, encoder, schedule
  double throughput_fps = 0.0;     // steady-state frames out per second

  const StageStats& stage(const std::string& name) const;
  // 0.9 / slowest stage average, in frames per second.
  double throughput_bound() const;
  nlohmann::json to_json() const;
  // Max/Min/Average rows by stage columns, with the published reference figures alongside.
  std::string table() const;
};

// Thread-safe per-stage accumulator.
class LatencyRecorder {
 public:
  void record(const std::string& stage, double wall_ms, double cpu_ms);
  void frame_done();
  StageLatencyReport report() const;

 private:
  struct Acc {
    std::size_t n = 0;
    double sum = 0, min = 0, max = 0;
    double cpu_sum = 0, cpu_min = 0, cpu_max = 0;
  };
  mutable std::mutex mu_;
  std::map<std::string, Acc> acc_;
  std::vector<Clock::time_point> done_;
};

// Published segments and playlists for every cluster.
class SegmentStore {
 public:
  enum class Status { Ok, NotFound, Gone };

  struct SegmentLookup {
    Status status = Status::NotFound;
    std::shared_ptr<const std::vector<std::uint8_t>> body;
  };

  // Evicted segments stay fetchable for `grace` further rotations.
  SegmentStore(int clusters, double segment_duration, std::size_t window = 6, std::size_t grace = 2);

  // Stores the segment first, then swaps in the rotated playlist.
  void publish(int cluster, std::uint64_t sequence, std::vector<std::uint8_t> body, double duration);
  void end_stream();

  SegmentLookup segment(int cluster, std::uint64_t sequence) const;
  // nullopt for an unknown cluster.
  std::optional<std::string> playlist(int cluster) const;
  int cluster_count() const noexcept { return static_cast<int>(clusters_.size()); }
  std::uint64_t published(int cluster) const;
  bool ended() const;

 private:
  struct Cluster {
    explicit Cluster(double duration, std::size_t window) : live(duration, window) {}
    LivePlaylist live;
    std::shared_ptr<const std::string> text;
    std::map<std::uint64_t, std::shared_ptr<const std::vector<std::uint8_t>>> segments;
    std::uint64_t gone_below = 0;
  };
  mutable std::mutex mu_;
  std::vector<Cluster> clusters_;
  std::size_t retain_;
  bool ended_ = false;
};

// Ingest -> interpolate + stitch -> (schedule hop) -> encode -> segment/publish, one thread each.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::shared_ptr<FrameSource> source);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  void start();
  // Ends ingest early; downstream drains and playlists are closed.
  void stop();
  // Joins every stage; rethrows the first stage failure.
  void wait();
  bool finished() const noexcept { return finished_.load(); }

  const PipelineConfig& config() const noexcept { return config_; }
  const SourceFormat& source_format() const noexcept { return format_; }
  const ViewIndexModel& model() const noexcept { return model_; }
  const std::vector<ClusterLayout>& layouts() const noexcept { return layouts_; }
  const LookupTable& lookup() const noexcept { return lookup_; }
  // Lookup table plus a "frame" block describing the stream.
  nlohmann::json lookup_document() const;
  SegmentStore& store() noexcept { return *store_; }
  const LatencyRecorder& latency() const noexcept { return latency_; }
  std::int64_t frames_published() const noexcept { return frames_out_.load(); }

 private:
  void ingest_loop();
  void interp_loop(SubscriberId sub);
  void encode_loop(SubscriberId sub);
  void package_loop(SubscriberId sub);
  void fail(std::exception_ptr e);
  void close_all();

  PipelineConfig config_;
  std::shared_ptr<FrameSource> source_;
  SourceFormat format_;
  ViewIndexModel model_;
  std::vector<ClusterLayout> layouts_;
  std::vector<ClusterGeometry> geometry_;
  LookupTable lookup_;
  SegmentPlan plan_;
  std::unique_ptr<SegmentStore> store_;
  LatencyRecorder latency_;

  UniversalDataChannel cameras_;
  UniversalDataChannel clusters_;
  UniversalDataChannel tiles_;

  std::vector<std::jthread> threads_;
  std::atomic<bool> stop_{false};
  std::atomic<bool> finished_{false};
  std::atomic<std::int64_t> frames_out_{0};
  std::mutex fail_mu_;
  std::exception_ptr failure_;
  bool started_ = false;
};

// Runs the pipeline unpaced over `iterations` ticks (looping the source) and reports stage latencies.
StageLatencyReport bench(PipelineConfig config, std::shared_ptr<FrameSource> source, std::size_t iterations = 1000);

// HTTP face over a running pipeline.
class EdgeHttpServer {
 public:
  explicit EdgeHttpServer(Pipeline& pipeline);
  ~EdgeHttpServer();
  EdgeHttpServer(const EdgeHttpServer&) = delete;
  EdgeHttpServer& operator=(const EdgeHttpServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread; returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  nlohmann::json request_counts() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fvv
