#include <httplib.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "fvv/bytes.hpp"
#include "fvv/client.hpp"

namespace fvv {

struct HttpFetcher::Impl {
  explicit Impl(const std::string& url) : client(url) {
    client.set_connection_timeout(2, 0);
    client.set_read_timeout(10, 0);
    client.set_keep_alive(true);
  }
  httplib::Client client;
};

HttpFetcher::HttpFetcher(std::string base_url, int attempts, int backoff_ms)
    : impl_(std::make_unique<Impl>(base_url)), attempts_(std::max(1, attempts)), backoff_ms_(backoff_ms) {
  if (!impl_->client.is_valid()) throw ConfigError("invalid server url '" + base_url + "'");
}

HttpFetcher::~HttpFetcher() = default;

HttpFetcher::Response HttpFetcher::get(const std::string& path) {
  std::string last;
  for (int attempt = 0; attempt < attempts_; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms_ << (attempt - 1)));
    ++requests_;
    auto res = impl_->client.Get(path);
    if (!res) {
      last = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last = "status " + std::to_string(res->status);
      continue;
    }
    return {res->status, std::move(res->body)};
  }
  throw IoError("GET " + path + " failed after " + std::to_string(attempts_) + " attempts: " + last);
}

namespace {

struct SegmentRequest {
  int cluster = 0;
  bool join = true;  // newest available instead of `sequence`
  std::uint64_t sequence = 0;
};

std::vector<std::uint8_t> pack_request(const SegmentRequest& r) {
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.u32(static_cast<std::uint32_t>(r.cluster));
  w.u8(r.join ? 1 : 0);
  w.u64(r.sequence);
  return out;
}

SegmentRequest unpack_request(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  SegmentRequest q;
  q.cluster = static_cast<int>(r.u32());
  q.join = r.u8() != 0;
  q.sequence = r.u64();
  return q;
}

std::string playlist_path(int cluster) { return "/cluster/" + std::to_string(cluster) + "/playlist.m3u8"; }

std::string segment_path(int cluster, std::uint64_t seq) {
  return "/cluster/" + std::to_string(cluster) + "/" + segment_uri(seq);
}

}  // namespace

FvvClient::FvvClient(ClientConfig config)
    : config_(std::move(config)),
      fetcher_(config_.url, config_.fetch_attempts, config_.backoff_ms),
      control_(4),
      segments_(2) {
  if (config_.buffer_frames == 0) throw ConfigError("frame buffer needs at least one slot");
  desired_ = config_.view;
}

FvvClient::~FvvClient() { stop(); }

void FvvClient::connect() {
  const auto res = fetcher_.get("/lookup.json");
  if (res.status != 200) throw IoError("lookup.json: status " + std::to_string(res.status));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("lookup.json is not JSON: ") + e.what(), 0);
  }
  lookup_ = lookup_from_json(doc);
  layouts_ = build_layouts(lookup_.model, lookup_.views_per_side);
  if (doc.contains("frame")) fps_ = doc["frame"].value("fps", 30);
  connected_ = true;
  set_view(config_.view);
  if (config_.trajectory) {
    for (const auto& [frame, view] : config_.trajectory->points()) {
      if (view >= lookup_.model.total_views()) {
        throw RangeError("trajectory view " + std::to_string(view) + " at frame " + std::to_string(frame) +
                         " outside 0.." + std::to_string(lookup_.model.total_views() - 1));
      }
    }
  }
  if (!config_.dump_dir.empty()) {
    std::filesystem::create_directories(config_.dump_dir);
    transcript_out_ = std::make_unique<std::ofstream>(config_.dump_dir / "transcript.jsonl");
    if (!*transcript_out_) throw IoError("cannot write transcript in " + config_.dump_dir.string());
  }
}

void FvvClient::set_view(int view) {
  if (connected_ && (view < 0 || view >= lookup_.model.total_views())) {
    throw RangeError("view " + std::to_string(view) + " outside 0.." + std::to_string(lookup_.model.total_views() - 1));
  }
  if (view < 0) throw RangeError("view must not be negative");
  if (desired_.exchange(view) != view) {
    std::lock_guard lock(mu_);
    pending_switch_ = transcript_.empty() ? 0 : transcript_.back().display + 1;
    pending_seen_ = false;
  }
}

void FvvClient::stop() {
  stop_ = true;
  control_.close();
  segments_.close();
}

void FvvClient::run() {
  if (!connected_) connect();
  const SubscriberId ctl = control_.subscribe();
  const SubscriberId seg = segments_.subscribe();
  std::exception_ptr download_failure;
  std::thread downloader([&] {
    try {
      download_loop(ctl);
    } catch (const ChannelClosedError&) {
    } catch (...) {
      download_failure = std::current_exception();
    }
    segments_.close();
  });
  std::exception_ptr decode_failure;
  try {
    decode_loop(seg);
  } catch (const ChannelClosedError&) {
  } catch (...) {
    decode_failure = std::current_exception();
  }
  control_.close();
  downloader.join();
  if (transcript_out_) transcript_out_->flush();
  if (decode_failure) std::rethrow_exception(decode_failure);
  if (download_failure && !stop_) std::rethrow_exception(download_failure);
}

void FvvClient::download_loop(SubscriberId control) {
  while (auto pack = control_.get(control)) {
    SegmentRequest req = unpack_request(pack->payload());
    while (!stop_) {
      const auto res = fetcher_.get(playlist_path(req.cluster));
      if (res.status != 200) throw IoError("playlist for cluster " + std::to_string(req.cluster) + ": status " +
                                           std::to_string(res.status));
      const Playlist pl = parse_m3u8(res.body);
      const std::uint64_t first = pl.media_sequence;
      const std::uint64_t end = pl.media_sequence + pl.entries.size();
      if (req.join) {
        if (pl.entries.empty()) {
          if (pl.ended) return;
          std::this_thread::sleep_for(std::chrono::milliseconds(config_.poll_ms));
          continue;
        }
        req.join = false;
        req.sequence = end - 1;  // live edge
      }
      if (req.sequence >= end) {
        if (pl.ended) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.poll_ms));
        continue;
      }
      if (req.sequence < first) {
        std::fprintf(stderr, "client: segment %llu left the window, jumping to %llu\n",
                     static_cast<unsigned long long>(req.sequence), static_cast<unsigned long long>(end - 1));
        req.sequence = end - 1;
      }
      const auto t0 = Clock::now();
      const auto seg = fetcher_.get(segment_path(req.cluster, req.sequence));
      if (seg.status == 410) {
        req.join = true;
        continue;
      }
      if (seg.status == 404) {
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.poll_ms));
        continue;
      }
      if (seg.status != 200) {
        throw IoError("segment " + std::to_string(req.sequence) + ": status " + std::to_string(seg.status));
      }
      ++downloads_;
      {
        std::lock_guard lock(mu_);
        download_ms_.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
      }
      std::vector<std::uint8_t> body;
      ByteWriter w(body);
      w.u32(static_cast<std::uint32_t>(req.cluster));
      w.u64(req.sequence);
      w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(seg.body.data()), seg.body.size()));
      segments_.put(UnifiedDataPack(PackKind::SegmentTs, std::move(body), req.sequence));
      break;
    }
    if (stop_) return;
  }
}

void FvvClient::decode_loop(SubscriberId segments) {
  control_.put(UnifiedDataPack(PackKind::Control, pack_request({select_cluster(desired_, lookup_.model), true, 0})));
  std::int64_t display_index = 0;
  int segments_played = 0;
  auto clock_base = Clock::now();
  std::int64_t clock_index = 0;
  const auto period = std::chrono::duration<double>(1.0 / fps_);

  while (auto pack = segments_.get(segments)) {
    ByteReader r(pack->payload());
    const int cluster = static_cast<int>(r.u32());
    const std::uint64_t sequence = r.u64();
    const auto ts_bytes = pack->payload().subspan(12);
    DemuxedSegment seg;
    try {
      seg = demux_segment(ts_bytes);
    } catch (const Error& e) {
      std::fprintf(stderr, "client: dropping segment %llu: %s\n", static_cast<unsigned long long>(sequence), e.what());
      control_.put(UnifiedDataPack(PackKind::Control,
                                   pack_request({select_cluster(desired_, lookup_.model), false, sequence + 1})));
      continue;
    }
    const ClusterLayout& layout = layouts_.at(static_cast<std::size_t>(cluster));
    playing_cluster_ = cluster;

    TileDecoder decoder;
    int decoded_tile = -1;
    int decoded_upto = -1;
    for (std::size_t i = 0; i < seg.frames.size() && !stop_; ++i) {
      if (config_.trajectory) {
        if (auto v = config_.trajectory->change_at(display_index)) set_view(*v);
      }
      const int requested = desired_.load();
      DisplayRecord rec;
      rec.display = display_index;
      rec.segment = sequence;
      rec.frame = static_cast<int>(i);
      rec.pts = seg.frames[i].pts;
      rec.cluster = cluster;
      rec.requested = requested;
      try {
        const TileChoice choice = choose_tile(requested, layout);
        rec.view = choice.view;
        rec.tile = choice.tile;
        rec.tier = choice.tier;
        rec.clamped = choice.clamped;
        // A tile switch replays its records from the last I-frame at or before i.
        std::size_t from = i;
        if (choice.tile != decoded_tile || decoded_upto + 1 != static_cast<int>(i)) {
          decoder.reset();
          while (true) {
            const auto bytes = extract_tile_record(seg.frames[from], choice.tile, layout);
            if (!bytes.empty() && bytes[0] == static_cast<std::uint8_t>(FrameType::I)) break;
            if (from == 0) throw BitstreamError("no I-record before frame " + std::to_string(i), 0);
            --from;
          }
        }
        Frame frame;
        for (std::size_t k = from; k <= i; ++k) {
          std::size_t off = 0;
          const auto bytes = extract_tile_record(seg.frames[k], choice.tile, layout);
          frame = decoder.decode(read_record(bytes, off));
          ++rec.records_decoded;
        }
        decoded_tile = choice.tile;
        decoded_upto = static_cast<int>(i);
        rec.tiles_decoded = 1;
        if (choice.tier == Tier::Quarter) frame = upscale(frame, kQuarterFactor);
        rec.requests = fetcher_.requests();
        rec.segment_downloads = downloads_.load();
        display(frame.with_timestamp(display_index), rec);
      } catch (const Error& e) {
        std::lock_guard lock(mu_);
        last_error_ = e.what();
        std::fprintf(stderr, "client: skipping frame %zu of segment %llu: %s\n", i,
                     static_cast<unsigned long long>(sequence), e.what());
        decoded_tile = -1;
      }
      ++display_index;

      if (config_.realtime) {
        auto due = clock_base + std::chrono::duration_cast<Clock::duration>(period * (display_index - clock_index));
        if (Clock::now() > due + std::chrono::duration_cast<Clock::duration>(period)) {
          clock_base = Clock::now();  // stalled: restart the display clock
          clock_index = display_index;
        } else {
          std::this_thread::sleep_until(due);
        }
      }
    }
    ++segments_played;
    if (stop_ || (config_.max_segments > 0 && segments_played >= config_.max_segments)) break;
    // Boundary: the next segment comes from the cluster nearest the latest desired view.
    control_.put(UnifiedDataPack(PackKind::Control,
                                 pack_request({select_cluster(desired_, lookup_.model), false, sequence + 1})));
  }
}

void FvvClient::display(const Frame& frame, DisplayRecord rec) {
  if (!config_.dump_dir.empty()) {
    char name[32];
    std::snprintf(name, sizeof name, "display%06lld.raw", static_cast<long long>(rec.display));
    write_raw_frame((config_.dump_dir / name).string(), frame);
  }
  std::lock_guard lock(mu_);
  buffer_.push_back(frame);
  while (buffer_.size() > config_.buffer_frames) buffer_.pop_front();
  if (pending_switch_ >= 0) {
    // A request first shown clamped waits for a segment boundary; keep it apart from local switches.
    if (!pending_seen_) {
      pending_seen_ = true;
      pending_cross_ = rec.clamped;
    }
    if (rec.view == rec.requested && !rec.clamped) {
      (pending_cross_ ? cluster_switch_ : switch_latency_)
          .push_back(static_cast<double>(rec.display - pending_switch_));
      pending_switch_ = -1;
    }
  }
  if (transcript_out_) *transcript_out_ << rec.to_json().dump() << "\n";
  transcript_.push_back(rec);
}

std::optional<Frame> FvvClient::latest_frame() const {
  std::lock_guard lock(mu_);
  if (buffer_.empty()) return std::nullopt;
  return buffer_.back();
}

std::size_t FvvClient::buffered() const {
  std::lock_guard lock(mu_);
  return buffer_.size();
}

std::vector<DisplayRecord> FvvClient::transcript() const {
  std::lock_guard lock(mu_);
  return transcript_;
}

namespace {

nlohmann::json summary(const std::vector<double>& v) {
  if (v.empty()) return {{"count", 0}};
  double sum = 0.0, mx = v.front(), mn = v.front();
  for (double x : v) {
    sum += x;
    mx = std::max(mx, x);
    mn = std::min(mn, x);
  }
  return {{"count", v.size()}, {"min", mn}, {"mean", sum / static_cast<double>(v.size())}, {"max", mx}};
}

}  // namespace

nlohmann::json FvvClient::state() const {
  const int view = desired_.load();
  std::lock_guard lock(mu_);
  nlohmann::json s = {{"view", view},
                      {"cluster", connected_ ? select_cluster(view, lookup_.model) : -1},
                      {"playing_cluster", playing_cluster_.load()},
                      {"range", {0, connected_ ? lookup_.model.total_views() - 1 : 0}}};
  if (!transcript_.empty()) {
    const auto& last = transcript_.back();
    s["displayed_view"] = last.view;
    s["clamped"] = last.clamped;
    s["tier"] = to_string(last.tier);
    s["segment"] = last.segment;
    s["display"] = last.display;
  } else {
    s["displayed_view"] = nullptr;
    s["clamped"] = false;
  }
  s["stats"] = {{"requests", fetcher_.requests()},
                {"segment_downloads", downloads_.load()},
                {"frames_displayed", transcript_.size()},
                {"buffered", buffer_.size()},
                {"switch_latency_frames", summary(switch_latency_)},
                {"cluster_switch_frames", summary(cluster_switch_)},
                {"download_ms", summary(download_ms_)},
                {"last_error", last_error_}};
  return s;
}

struct ClientUiServer::Impl {
  explicit Impl(FvvClient& c) : client(c) {}
  FvvClient& client;
  httplib::Server server;
  std::thread thread;
};

ClientUiServer::ClientUiServer(FvvClient& client) : impl_(std::make_unique<Impl>(client)) {
  Impl& s = *impl_;
  s.server.Get("/frame", [&s](const httplib::Request&, httplib::Response& res) {
    const auto frame = s.client.latest_frame();
    if (!frame) {
      res.status = 503;
      res.set_header("Retry-After", "1");
      res.set_content("no frame decoded yet\n", "text/plain");
      return;
    }
    const auto png = encode_png(*frame);
    res.set_header("Cache-Control", "no-store");
    res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
  });
  s.server.Get("/state", [&s](const httplib::Request&, httplib::Response& res) {
    res.set_content(s.client.state().dump(), "application/json");
  });
  s.server.Post("/view", [&s](const httplib::Request& req, httplib::Response& res) {
    const int last = s.client.lookup().model.total_views() - 1;
    auto reject = [&](const std::string& why) {
      res.status = 400;
      res.set_content(nlohmann::json({{"error", why}, {"range", {0, last}}}).dump(), "application/json");
    };
    long long index = -1;
    try {
      if (req.has_param("index")) {
        index = std::stoll(req.get_param_value("index"));
      } else {
        const auto body = nlohmann::json::parse(req.body);
        index = body.at("index").get<long long>();
      }
    } catch (const std::exception&) {
      reject("expected {\"index\": <int>}");
      return;
    }
    if (index < 0 || index > last) {
      reject("view " + std::to_string(index) + " outside 0.." + std::to_string(last));
      return;
    }
    s.client.set_view(static_cast<int>(index));
    res.set_content(s.client.state().dump(), "application/json");
  });
}

ClientUiServer::~ClientUiServer() { stop(); }

int ClientUiServer::start(const std::string& host, int port) {
  Impl& s = *impl_;
  int bound = port;
  if (port == 0) {
    bound = s.server.bind_to_any_port(host);
    if (bound <= 0) throw IoError("cannot bind " + host);
  } else if (!s.server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  s.thread = std::thread([&s] { s.server.listen_after_bind(); });
  s.server.wait_until_ready();
  return bound;
}

void ClientUiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace fvv
