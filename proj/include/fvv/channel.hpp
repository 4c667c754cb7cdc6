#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fvv {

// What a pack carries. Host-only build, so the tag describes content, not residency.
enum class PackKind : std::uint8_t { FrameRaw = 0, TileBitstream = 1, SegmentTs = 2, Control = 3 };

const char* to_string(PackKind kind);

using Clock = std::chrono::steady_clock;

struct TraceStamp {
  std::string stage;
  Clock::time_point begin;
  Clock::time_point end;
  double cpu_ms = 0.0;
};

// Typed binary block passed between pipeline stages.
class UnifiedDataPack {
 public:
  UnifiedDataPack() = default;
  UnifiedDataPack(PackKind kind, std::vector<std::uint8_t> payload, std::uint64_t sequence = 0)
      : kind_(kind),
        payload_(std::make_shared<const std::vector<std::uint8_t>>(std::move(payload))),
        sequence_(sequence) {}

  PackKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return payload_ ? payload_->size() : 0; }
  std::span<const std::uint8_t> payload() const noexcept {
    return payload_ ? std::span<const std::uint8_t>(*payload_) : std::span<const std::uint8_t>();
  }
  std::uint64_t sequence() const noexcept { return sequence_; }

  const std::vector<TraceStamp>& trace() const noexcept { return trace_; }
  void stamp(TraceStamp s) { trace_.push_back(std::move(s)); }
  void set_trace(std::vector<TraceStamp> t) { trace_ = std::move(t); }

 private:
  PackKind kind_ = PackKind::Control;
  std::shared_ptr<const std::vector<std::uint8_t>> payload_;
  std::uint64_t sequence_ = 0;
  std::vector<TraceStamp> trace_;
};

enum class OverflowPolicy { Block, DropOldest };

using SubscriberId = std::uint32_t;

// Bounded one-in multi-out FIFO. Every subscriber sees every pack put after it subscribed,
// in order, exactly once. put() blocks while the slowest subscriber is `capacity` packs behind.
class UniversalDataChannel {
 public:
  explicit UniversalDataChannel(std::size_t capacity, OverflowPolicy policy = OverflowPolicy::Block);

  UniversalDataChannel(const UniversalDataChannel&) = delete;
  UniversalDataChannel& operator=(const UniversalDataChannel&) = delete;

  SubscriberId subscribe();
  void unsubscribe(SubscriberId id);

  // Throws ChannelClosedError if the channel was closed.
  void put(UnifiedDataPack pack);
  // Oldest undelivered pack; std::nullopt once closed and drained (end of stream).
  std::optional<UnifiedDataPack> get(SubscriberId id);
  std::optional<UnifiedDataPack> try_get(SubscriberId id);

  void close();
  bool closed() const;

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t backlog(SubscriberId id) const;
  std::uint64_t dropped() const;

 private:
  std::size_t max_backlog_locked() const;
  void trim_locked();

  const std::size_t capacity_;
  const OverflowPolicy policy_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<UnifiedDataPack> buffer_;
  std::uint64_t base_seq_ = 0;  // sequence number of buffer_.front()
  std::uint64_t next_seq_ = 0;
  std::map<SubscriberId, std::uint64_t> cursors_;
  SubscriberId next_id_ = 0;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

}  // namespace fvv
