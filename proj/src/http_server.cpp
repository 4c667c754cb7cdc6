#include <httplib.h>

#include <atomic>

#include "fvv/server.hpp"

namespace fvv {

struct EdgeHttpServer::Impl {
  explicit Impl(Pipeline& p) : pipeline(p) {}

  Pipeline& pipeline;
  httplib::Server server;
  std::thread thread;
  std::string lookup_body;
  std::atomic<std::uint64_t> lookups{0}, playlists{0}, segments{0}, metrics{0}, not_found{0}, gone{0};
};

namespace {

bool parse_index(const std::string& text, std::uint64_t& out) {
  if (text.empty() || text.size() > 18) return false;
  out = std::stoull(text);
  return true;
}

}  // namespace

EdgeHttpServer::EdgeHttpServer(Pipeline& pipeline) : impl_(std::make_unique<Impl>(pipeline)) {
  Impl& s = *impl_;
  s.lookup_body = pipeline.lookup_document().dump();

  s.server.Get("/lookup.json", [&s](const httplib::Request&, httplib::Response& res) {
    ++s.lookups;
    res.set_content(s.lookup_body, "application/json");
  });

  s.server.Get(R"(/cluster/(\d+)/playlist\.m3u8)", [&s](const httplib::Request& req, httplib::Response& res) {
    ++s.playlists;
    std::uint64_t id = 0;
    std::optional<std::string> text;
    if (parse_index(req.matches[1], id) && id < static_cast<std::uint64_t>(s.pipeline.store().cluster_count())) {
      text = s.pipeline.store().playlist(static_cast<int>(id));
    }
    if (!text) {
      ++s.not_found;
      res.status = 404;
      res.set_content("unknown cluster\n", "text/plain");
      return;
    }
    res.set_header("Cache-Control", "no-cache");
    res.set_content(*text, "application/vnd.apple.mpegurl");
  });

  s.server.Get(R"(/cluster/(\d+)/seg(\d{5,})\.ts)", [&s](const httplib::Request& req, httplib::Response& res) {
    ++s.segments;
    std::uint64_t id = 0, seq = 0;
    SegmentStore::SegmentLookup hit;
    if (parse_index(req.matches[1], id) && parse_index(req.matches[2], seq) &&
        id < static_cast<std::uint64_t>(s.pipeline.store().cluster_count())) {
      hit = s.pipeline.store().segment(static_cast<int>(id), seq);
    }
    switch (hit.status) {
      case SegmentStore::Status::Ok: {
        auto body = hit.body;
        res.set_content(reinterpret_cast<const char*>(body->data()), body->size(), "video/mp2t");
        return;
      }
      case SegmentStore::Status::Gone:
        ++s.gone;
        res.status = 410;
        res.set_content("segment evicted\n", "text/plain");
        return;
      case SegmentStore::Status::NotFound:
        ++s.not_found;
        res.status = 404;
        res.set_content("no such segment\n", "text/plain");
        return;
    }
  });

  s.server.Get("/metrics", [this, &s](const httplib::Request&, httplib::Response& res) {
    ++s.metrics;
    auto doc = s.pipeline.latency().report().to_json();
    nlohmann::json published = nlohmann::json::array();
    for (int c = 0; c < s.pipeline.store().cluster_count(); ++c) published.push_back(s.pipeline.store().published(c));
    doc["segments_published"] = published;
    doc["frames_published"] = s.pipeline.frames_published();
    doc["ended"] = s.pipeline.store().ended();
    doc["requests"] = request_counts();
    res.set_content(doc.dump(), "application/json");
  });
}

EdgeHttpServer::~EdgeHttpServer() { stop(); }

int EdgeHttpServer::start(const std::string& host, int port) {
  Impl& s = *impl_;
  if (s.thread.joinable()) throw ContractViolation("server already started");
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

void EdgeHttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

nlohmann::json EdgeHttpServer::request_counts() const {
  const Impl& s = *impl_;
  return {{"lookup", s.lookups.load()},   {"playlist", s.playlists.load()}, {"segment", s.segments.load()},
          {"metrics", s.metrics.load()},  {"not_found", s.not_found.load()}, {"gone", s.gone.load()}};
}

}  // namespace fvv
