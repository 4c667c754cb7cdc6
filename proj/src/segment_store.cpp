#include "fvv/server.hpp"

namespace fvv {

SegmentStore::SegmentStore(int clusters, double segment_duration, std::size_t window, std::size_t grace)
    : retain_(window + grace) {
  if (clusters <= 0) throw ConfigError("segment store needs at least one cluster");
  for (int c = 0; c < clusters; ++c) {
    clusters_.emplace_back(segment_duration, window);
    clusters_.back().text = std::make_shared<const std::string>(clusters_.back().live.render());
  }
}

void SegmentStore::publish(int cluster, std::uint64_t sequence, std::vector<std::uint8_t> body, double duration) {
  std::lock_guard lock(mu_);
  if (cluster < 0 || cluster >= cluster_count()) throw RangeError("unknown cluster " + std::to_string(cluster));
  Cluster& c = clusters_[cluster];
  if (sequence != c.live.next_sequence()) {
    throw SequencingError("cluster " + std::to_string(cluster) + " expected segment " +
                          std::to_string(c.live.next_sequence()) + ", got " + std::to_string(sequence));
  }
  // Segment bytes become reachable before any playlist names them.
  c.segments[sequence] = std::make_shared<const std::vector<std::uint8_t>>(std::move(body));
  c.text = std::make_shared<const std::string>(c.live.rotate(sequence, duration));
  while (c.segments.size() > retain_) {
    c.gone_below = c.segments.begin()->first + 1;
    c.segments.erase(c.segments.begin());
  }
}

void SegmentStore::end_stream() {
  std::lock_guard lock(mu_);
  if (ended_) return;
  ended_ = true;
  for (auto& c : clusters_) {
    c.live.end();
    c.text = std::make_shared<const std::string>(c.live.render());
  }
}

SegmentStore::SegmentLookup SegmentStore::segment(int cluster, std::uint64_t sequence) const {
  std::lock_guard lock(mu_);
  if (cluster < 0 || cluster >= cluster_count()) return {};
  const Cluster& c = clusters_[cluster];
  auto it = c.segments.find(sequence);
  if (it != c.segments.end()) return {Status::Ok, it->second};
  if (sequence < c.gone_below) return {Status::Gone, nullptr};
  return {};
}

std::optional<std::string> SegmentStore::playlist(int cluster) const {
  std::shared_ptr<const std::string> text;
  {
    std::lock_guard lock(mu_);
    if (cluster < 0 || cluster >= cluster_count()) return std::nullopt;
    text = clusters_[cluster].text;
  }
  return *text;
}

std::uint64_t SegmentStore::published(int cluster) const {
  std::lock_guard lock(mu_);
  return clusters_.at(cluster).live.next_sequence();
}

bool SegmentStore::ended() const {
  std::lock_guard lock(mu_);
  return ended_;
}

}  // namespace fvv
