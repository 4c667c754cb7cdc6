#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fvv/frame.hpp"

namespace fvv {

using Block8 = std::array<double, 64>;  // row-major 8x8

// Orthonormal 2-D DCT-II and its inverse.
Block8 dct8_forward(const Block8& block);
Block8 dct8_inverse(const Block8& coeffs);

// Reversible integer Haar (S-transform) over 3 levels in each direction; the lossless path.
using IntBlock8 = std::array<std::int32_t, 64>;
IntBlock8 haar8_forward(const IntBlock8& block);
IntBlock8 haar8_inverse(const IntBlock8& coeffs);

const std::array<int, 64>& zigzag_order();

// Quantizer step size: max(1, round((100 - q) / 2) + 1).
int quant_step(int quality);

enum class FrameType : std::uint8_t { I = 0, P = 1 };

struct FrameRecord {
  FrameType type = FrameType::I;
  std::vector<std::uint8_t> payload;
  bool operator==(const FrameRecord&) const = default;
};

struct EncodedFrame {
  FrameRecord record;
  Frame reconstructed;  // what the decoder will produce
};

// I-frame when prev is null, otherwise a residual P-frame against prev.
EncodedFrame encode_frame(const Frame& frame, const Frame* prev_reconstructed, int quality);
Frame decode_record(const FrameRecord& record, const Frame* prev_reconstructed);
Frame decode_record(std::span<const std::uint8_t> record_bytes, const Frame* prev_reconstructed);

// Record framing: u8 type, u32 payload_len, payload.
void append_record(std::vector<std::uint8_t>& out, const FrameRecord& record);
FrameRecord read_record(std::span<const std::uint8_t> bytes, std::size_t& offset);

struct TileStreamHeader {
  int width = 0;
  int height = 0;
  PixelFormat format = PixelFormat::YUV420;
  int gop = 30;
  int quality = 75;
  int fps = 30;
  bool operator==(const TileStreamHeader&) const = default;
};

struct TileStream {
  TileStreamHeader header;
  std::vector<FrameRecord> records;
};

std::vector<std::uint8_t> write_tile_stream(const TileStream& stream);
TileStream read_tile_stream(std::span<const std::uint8_t> bytes);

// Stateful per-tile encoder; emits an I-record every gop frames.
class TileEncoder {
 public:
  explicit TileEncoder(TileStreamHeader header);
  EncodedFrame encode(const Frame& frame);
  const TileStreamHeader& header() const noexcept { return header_; }
  std::int64_t frames_encoded() const noexcept { return count_; }

 private:
  TileStreamHeader header_;
  std::int64_t count_ = 0;
  std::optional<Frame> reference_;
};

class TileDecoder {
 public:
  Frame decode(const FrameRecord& record);
  Frame decode(std::span<const std::uint8_t> payload, FrameType type);
  void reset() { reference_.reset(); }
  bool has_reference() const noexcept { return reference_.has_value(); }

 private:
  std::optional<Frame> reference_;
};

// Decodes a whole stream from its first record.
std::vector<Frame> decode_stream(const TileStream& stream);

struct GopCheck {
  bool ok = true;
  int first_bad_segment = -1;
};

// ok iff every segment boundary lands on an I-frame, i.e. gop divides fps * segment_duration.
GopCheck validate_gop(int gop, int fps, double segment_duration);

}  // namespace fvv
