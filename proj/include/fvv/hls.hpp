#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fvv/error.hpp"

namespace fvv {

namespace ts {
constexpr std::size_t kPacketSize = 188;
constexpr std::uint8_t kSync = 0x47;
constexpr std::uint16_t kPatPid = 0x0000;
constexpr std::uint16_t kPmtPid = 0x1000;
constexpr std::uint16_t kStreamPid = 0x0100;
constexpr std::uint16_t kNullPid = 0x1FFF;
constexpr std::uint8_t kStreamType = 0x06;  // PES private data
constexpr std::uint8_t kStreamId = 0xBD;    // private_stream_1
constexpr std::uint16_t kProgramNumber = 1;
constexpr std::uint64_t kClock = 90000;
}  // namespace ts

// MPEG-2 CRC-32 (poly 0x04C11DB7, no reflection, init 0xFFFFFFFF).
std::uint32_t crc32_mpeg2(std::span<const std::uint8_t> bytes);

// One cluster frame: a framed FVT1 FrameRecord per tile, in tile order.
struct ClusterRecord {
  std::vector<std::vector<std::uint8_t>> tiles;
};

struct TileSlice {
  std::uint32_t offset = 0;  // relative to the start of the record area
  std::uint32_t length = 0;
  bool operator==(const TileSlice&) const = default;
};

// PES payload: u16 tile_count, per tile {u32 offset, u32 length}, concatenated records.
std::vector<std::uint8_t> encode_cluster_payload(const ClusterRecord& record);

struct ClusterPayloadView {
  std::span<const std::uint8_t> records;  // record area
  std::vector<TileSlice> tiles;
  std::span<const std::uint8_t> tile(std::size_t k) const { return records.subspan(tiles.at(k).offset, tiles.at(k).length); }
};

// Throws ExtractionError on a corrupt tile table.
ClusterPayloadView parse_cluster_payload(std::span<const std::uint8_t> payload);

struct SegmentTiming {
  int fps = 30;
  std::uint64_t start_pts = 0;
};

std::uint64_t frame_pts(const SegmentTiming& timing, std::size_t frame_index);

// PAT, PMT, then one PES per cluster frame. Throws GopAlignmentError if the window does not
// start with an I-record on every tile.
std::vector<std::uint8_t> mux_segment(const std::vector<ClusterRecord>& frames, const SegmentTiming& timing);

struct DemuxedFrame {
  std::uint64_t pts = 0;
  std::vector<std::uint8_t> payload;  // PES payload
  std::vector<TileSlice> tiles;
  std::span<const std::uint8_t> tile(std::size_t k) const;
};

struct DemuxedSegment {
  std::vector<DemuxedFrame> frames;
  std::vector<std::uint64_t> pcrs;  // PCR base values in stream order
  std::size_t packet_count = 0;
};

// Validates framing, continuity and tables; throws TsError with the packet index.
DemuxedSegment demux_segment(std::span<const std::uint8_t> body);

// Playlist model shared by the packager and the client parser.
struct PlaylistEntry {
  std::string uri;
  double duration = 0.0;
  bool operator==(const PlaylistEntry&) const = default;
};

struct Playlist {
  int version = 3;
  int target_duration = 0;
  std::uint64_t media_sequence = 0;
  std::vector<PlaylistEntry> entries;
  bool ended = false;
  std::vector<std::string> extras;  // unrecognized tag lines, verbatim
  bool operator==(const Playlist&) const = default;
};

std::string segment_uri(std::uint64_t sequence);
std::string render_m3u8(const Playlist& playlist);
// Throws FormatError with a 1-based line number.
Playlist parse_m3u8(const std::string& text);
// Sequence number of entry i.
inline std::uint64_t entry_sequence(const Playlist& p, std::size_t i) { return p.media_sequence + i; }

// Sliding live window over consecutively numbered segments.
class LivePlaylist {
 public:
  explicit LivePlaylist(double segment_duration, std::size_t window = 6, std::uint64_t first_sequence = 0);

  // Appends segment `sequence`, evicting beyond the window; returns the rendered text.
  std::string rotate(std::uint64_t sequence, double duration);
  void end();

  const Playlist& model() const noexcept { return model_; }
  std::string render() const { return render_m3u8(model_); }
  std::uint64_t next_sequence() const noexcept { return next_; }
  std::size_t window() const noexcept { return window_; }

 private:
  Playlist model_;
  std::size_t window_;
  std::uint64_t next_;
};

struct SegmentPlan {
  int frames_per_segment = 0;
  std::vector<int> iframe_positions;  // within a segment
};

// Throws GopAlignmentError when gop does not divide fps * segment_duration.
SegmentPlan segment_plan(int fps, double segment_duration, int gop);

}  // namespace fvv
