#include "fvv/channel.hpp"

#include <algorithm>

#include "fvv/error.hpp"

namespace fvv {

const char* to_string(PackKind kind) {
  switch (kind) {
    case PackKind::FrameRaw: return "frame-raw";
    case PackKind::TileBitstream: return "tile-bitstream";
    case PackKind::SegmentTs: return "segment-ts";
    case PackKind::Control: return "control";
  }
  return "unknown";
}

UniversalDataChannel::UniversalDataChannel(std::size_t capacity, OverflowPolicy policy)
    : capacity_(std::max<std::size_t>(capacity, 1)), policy_(policy) {}

SubscriberId UniversalDataChannel::subscribe() {
  std::lock_guard lock(mu_);
  const SubscriberId id = next_id_++;
  cursors_[id] = next_seq_;
  return id;
}

void UniversalDataChannel::unsubscribe(SubscriberId id) {
  std::lock_guard lock(mu_);
  cursors_.erase(id);
  trim_locked();
  not_full_.notify_all();
}

std::size_t UniversalDataChannel::max_backlog_locked() const {
  std::uint64_t slowest = next_seq_;
  for (const auto& [id, cursor] : cursors_) slowest = std::min(slowest, cursor);
  return static_cast<std::size_t>(next_seq_ - slowest);
}

void UniversalDataChannel::trim_locked() {
  std::uint64_t slowest = next_seq_;
  for (const auto& [id, cursor] : cursors_) slowest = std::min(slowest, cursor);
  while (base_seq_ < slowest && !buffer_.empty()) {
    buffer_.pop_front();
    ++base_seq_;
  }
}

void UniversalDataChannel::put(UnifiedDataPack pack) {
  std::unique_lock lock(mu_);
  if (closed_) throw ChannelClosedError();
  if (cursors_.empty()) {
    // Nobody listening: the pack is visible to no one.
    ++next_seq_;
    base_seq_ = next_seq_;
    return;
  }
  if (policy_ == OverflowPolicy::Block) {
    not_full_.wait(lock, [&] { return closed_ || max_backlog_locked() < capacity_; });
    if (closed_) throw ChannelClosedError();
  } else if (max_backlog_locked() >= capacity_) {
    // Advance lagging cursors past the oldest pack.
    for (auto& [id, cursor] : cursors_) {
      if (cursor == base_seq_) ++cursor;
    }
    ++dropped_;
    trim_locked();
  }
  buffer_.push_back(std::move(pack));
  ++next_seq_;
  not_empty_.notify_all();
}

std::optional<UnifiedDataPack> UniversalDataChannel::get(SubscriberId id) {
  std::unique_lock lock(mu_);
  auto it = cursors_.find(id);
  if (it == cursors_.end()) throw ContractViolation("unknown subscriber");
  not_empty_.wait(lock, [&] { return closed_ || it->second < next_seq_; });
  if (it->second >= next_seq_) return std::nullopt;
  UnifiedDataPack pack = buffer_[static_cast<std::size_t>(it->second - base_seq_)];
  ++it->second;
  trim_locked();
  not_full_.notify_all();
  return pack;
}

std::optional<UnifiedDataPack> UniversalDataChannel::try_get(SubscriberId id) {
  std::lock_guard lock(mu_);
  auto it = cursors_.find(id);
  if (it == cursors_.end()) throw ContractViolation("unknown subscriber");
  if (it->second >= next_seq_) return std::nullopt;
  UnifiedDataPack pack = buffer_[static_cast<std::size_t>(it->second - base_seq_)];
  ++it->second;
  trim_locked();
  not_full_.notify_all();
  return pack;
}

void UniversalDataChannel::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  not_empty_.notify_all();
  not_full_.notify_all();
}

bool UniversalDataChannel::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::size_t UniversalDataChannel::backlog(SubscriberId id) const {
  std::lock_guard lock(mu_);
  auto it = cursors_.find(id);
  if (it == cursors_.end()) throw ContractViolation("unknown subscriber");
  return static_cast<std::size_t>(next_seq_ - it->second);
}

std::uint64_t UniversalDataChannel::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

}  // namespace fvv
