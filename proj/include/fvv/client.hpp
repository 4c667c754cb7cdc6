#pragma once

#include <atomic>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fvv/channel.hpp"
#include "fvv/cluster.hpp"
#include "fvv/codec.hpp"
#include "fvv/hls.hpp"
#include "json.hpp"

namespace fvv {

// Which tile of a cluster serves a desired view.
struct TileChoice {
  int tile = 0;
  int view = 0;  // global index actually shown
  Tier tier = Tier::Full;
  bool clamped = false;
};

// Outside the layout the nearest boundary tile is used and clamped is set.
TileChoice choose_tile(int desired_view, const ClusterLayout& layout);

struct ExtractedView {
  TileChoice choice;
  std::vector<std::span<const std::uint8_t>> records;  // framed tile record per segment frame
};

// Byte slices of one tile across a demuxed segment; nothing is decoded.
// Throws ExtractionError when a frame's tile table does not fit the layout.
ExtractedView extract_view(const DemuxedSegment& segment, int desired_view, const ClusterLayout& layout);
std::span<const std::uint8_t> extract_tile_record(const DemuxedFrame& frame, int tile, const ClusterLayout& layout);

// `<frame_index> <view_index>` lines; a view holds until the next listed frame. '#' starts a comment.
class Trajectory {
 public:
  static Trajectory parse(const std::string& text);
  static Trajectory load(const std::filesystem::path& path);
  // View requested at this display index, if the script changes it there.
  std::optional<int> change_at(std::int64_t display_index) const;
  const std::map<std::int64_t, int>& points() const noexcept { return points_; }

 private:
  std::map<std::int64_t, int> points_;
};

// One displayed frame, as written to the transcript.
struct DisplayRecord {
  std::int64_t display = 0;
  std::uint64_t segment = 0;
  int frame = 0;  // within the segment
  std::uint64_t pts = 0;
  int cluster = 0;
  int requested = 0;
  int view = 0;
  int tile = 0;
  Tier tier = Tier::Full;
  bool clamped = false;
  int records_decoded = 0;
  int tiles_decoded = 0;
  std::uint64_t requests = 0;           // network requests so far
  std::uint64_t segment_downloads = 0;  // segments fetched so far

  nlohmann::json to_json() const;
  static DisplayRecord from_json(const nlohmann::json& j);
};

// Blocking GET with retry; counts every request sent.
class HttpFetcher {
 public:
  struct Response {
    int status = 0;
    std::string body;
  };

  HttpFetcher(std::string base_url, int attempts = 3, int backoff_ms = 100);
  ~HttpFetcher();
  // Retries transport failures and 5xx; other statuses are returned. Throws IoError after the last attempt.
  Response get(const std::string& path);
  std::uint64_t requests() const noexcept { return requests_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int attempts_;
  int backoff_ms_;
  std::atomic<std::uint64_t> requests_{0};
};

struct ClientConfig {
  std::string url = "http://127.0.0.1:8080";
  int view = 0;
  std::optional<Trajectory> trajectory;
  std::filesystem::path dump_dir;    // raw frames + transcript.jsonl when set
  std::size_t buffer_frames = 90;
  bool realtime = true;              // pace display at the stream fps
  int max_segments = 0;              // 0: until the playlist ends
  int fetch_attempts = 3;
  int backoff_ms = 100;
  int poll_ms = 50;                  // playlist polling while waiting for a segment
};

// Downloader and decoder workers joined by channels; the decoder asks for the next
// segment (and its cluster) when it reaches a segment boundary.
class FvvClient {
 public:
  explicit FvvClient(ClientConfig config);
  ~FvvClient();
  FvvClient(const FvvClient&) = delete;
  FvvClient& operator=(const FvvClient&) = delete;

  // Fetches the lookup table; throws IoError / FormatError.
  void connect();
  // Plays until the stream ends, max_segments is reached or stop() is called.
  void run();
  void stop();

  // Throws RangeError outside the model. Takes effect on the next extracted frame.
  void set_view(int view);
  int desired_view() const noexcept { return desired_.load(); }

  const LookupTable& lookup() const noexcept { return lookup_; }
  nlohmann::json state() const;
  std::optional<Frame> latest_frame() const;
  std::vector<DisplayRecord> transcript() const;
  std::uint64_t requests() const noexcept { return fetcher_.requests(); }
  std::size_t buffered() const;

 private:
  void download_loop(SubscriberId control);
  void decode_loop(SubscriberId segments);
  void display(const Frame& frame, DisplayRecord rec);

  ClientConfig config_;
  HttpFetcher fetcher_;
  LookupTable lookup_;
  std::vector<ClusterLayout> layouts_;
  int fps_ = 30;
  bool connected_ = false;

  UniversalDataChannel control_;
  UniversalDataChannel segments_;
  std::atomic<int> desired_{0};
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> downloads_{0};
  std::atomic<int> playing_cluster_{-1};

  mutable std::mutex mu_;
  std::deque<Frame> buffer_;
  std::vector<DisplayRecord> transcript_;
  std::vector<double> switch_latency_;  // frames until an in-cluster request is shown
  std::vector<double> cluster_switch_;  // same, for requests that had to wait for another cluster
  std::vector<double> download_ms_;
  std::int64_t pending_switch_ = -1;  // display index of an unanswered view request
  bool pending_seen_ = false;
  bool pending_cross_ = false;
  std::unique_ptr<std::ofstream> transcript_out_;
  std::string last_error_;
};

// Local bridge for a viewer: GET /frame (PNG), GET /state, POST /view.
class ClientUiServer {
 public:
  explicit ClientUiServer(FvvClient& client);
  ~ClientUiServer();
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Frame to PNG (gray stays gray, YUV420 is converted to RGB).
std::vector<std::uint8_t> encode_png(const Frame& frame);
Frame to_rgb(const Frame& frame);

}  // namespace fvv
