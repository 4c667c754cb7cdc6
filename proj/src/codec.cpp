#include "fvv/codec.hpp"

#include <zlib.h>

#include <cmath>
#include <string>

#include "fvv/bytes.hpp"

namespace fvv {

int quant_step(int quality) {
  if (quality < 0 || quality > 100) throw ConfigError("quality must be in 0..100, got " + std::to_string(quality));
  return std::max(1, static_cast<int>(std::lround((100 - quality) * 0.5)) + 1);
}

namespace {

constexpr int kEndOfBlock = 64;
constexpr int kDeflateLevel = 1;
constexpr std::size_t kPreambleSize = 6;
constexpr double kInterRounding = 1.0 / 6.0;

std::vector<std::uint8_t> deflate_raw(const std::vector<std::uint8_t>& in) {
  z_stream zs{};
  if (deflateInit2(&zs, kDeflateLevel, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error("deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("deflate failed");
  out.resize(zs.total_out);
  return out;
}

// Inflates a raw DEFLATE stream; `base` is the stream's offset inside the payload for error reports.
std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in, std::size_t base, std::size_t limit) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw Error("inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 15];
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const std::size_t at = base + zs.total_in;
      inflateEnd(&zs);
      throw BitstreamError(rc == Z_BUF_ERROR ? "truncated DEFLATE stream" : "corrupt DEFLATE stream", at);
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (out.size() > limit) {
      inflateEnd(&zs);
      throw BitstreamError("coefficient stream larger than the frame allows", base);
    }
  }
  const std::size_t consumed = zs.total_in;
  inflateEnd(&zs);
  if (consumed != in.size()) throw BitstreamError("trailing bytes after DEFLATE stream", base + consumed);
  return out;
}

void write_block(ByteWriter& w, const std::array<std::int32_t, 64>& zz) {
  int run = 0;
  for (int i = 0; i < 64; ++i) {
    if (zz[i] == 0) {
      ++run;
      continue;
    }
    w.varint(static_cast<std::uint64_t>(run));
    w.svarint(zz[i]);
    run = 0;
  }
  w.varint(kEndOfBlock);
}

std::array<std::int32_t, 64> read_block(ByteReader& r) {
  std::array<std::int32_t, 64> zz{};
  int pos = 0;
  for (;;) {
    const std::size_t at = r.offset();
    const std::uint64_t run = r.varint();
    if (run == kEndOfBlock) return zz;
    if (run > 63 || pos + static_cast<int>(run) >= 64) throw BitstreamError("coefficient run past end of block", at);
    pos += static_cast<int>(run);
    const std::int64_t level = r.svarint();
    if (level == 0 || level > (1 << 20) || level < -(1 << 20)) throw BitstreamError("invalid coefficient level", at);
    zz[pos++] = static_cast<std::int32_t>(level);
  }
}

// Samples of one component: the source values (I) or the residual (P), edge-padded to 8x8 blocks.
struct Signal {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> v;
  std::int32_t padded(int x, int y) const {
    x = std::min(x, width - 1);
    y = std::min(y, height - 1);
    return v[static_cast<std::size_t>(y) * width + x];
  }
};

struct PlaneCoder {
  int step;
  bool lossless;
  double rounding = 0.5;  // encoder-side; P-frames use a dead zone so coding noise re-quantizes to zero

  // Codes one 8x8 block of the signal, returning quantized coefficients in zigzag order and
  // writing the reconstruction into rec.
  std::array<std::int32_t, 64> code(const Signal& s, int bx, int by, std::array<std::int32_t, 64>& rec) const {
    const auto& order = zigzag_order();
    std::array<std::int32_t, 64> zz{};
    if (lossless) {
      IntBlock8 b{};
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) b[y * 8 + x] = s.padded(bx + x, by + y);
      const IntBlock8 c = haar8_forward(b);
      for (int i = 0; i < 64; ++i) zz[i] = c[order[i]];
      rec = b;
      return zz;
    }
    Block8 b{};
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) b[y * 8 + x] = s.padded(bx + x, by + y);
    const Block8 c = dct8_forward(b);
    for (int i = 0; i < 64; ++i) {
      const double v = c[order[i]] / step;
      const auto mag = static_cast<std::int32_t>(std::floor(std::abs(v) + rounding));
      zz[i] = v < 0 ? -mag : mag;
    }
    rec = decode(zz);
    return zz;
  }

  std::array<std::int32_t, 64> decode(const std::array<std::int32_t, 64>& zz) const {
    const auto& order = zigzag_order();
    std::array<std::int32_t, 64> out{};
    if (lossless) {
      IntBlock8 c{};
      for (int i = 0; i < 64; ++i) c[order[i]] = zz[i];
      return haar8_inverse(c);
    }
    Block8 c{};
    for (int i = 0; i < 64; ++i) c[order[i]] = static_cast<double>(zz[i]) * step;
    const Block8 b = dct8_inverse(c);
    for (int i = 0; i < 64; ++i) out[i] = static_cast<std::int32_t>(std::lround(b[i]));
    return out;
  }
};

void check_reference(const Frame& frame, const Frame* prev, std::size_t offset) {
  if (!prev) return;
  if (prev->width() != frame.width() || prev->height() != frame.height() || prev->format() != frame.format()) {
    throw BitstreamError("P-record reference has a different size or format", offset);
  }
}

}  // namespace

EncodedFrame encode_frame(const Frame& frame, const Frame* prev, int quality) {
  const int step = quant_step(quality);
  if (frame.empty()) throw ShapeError("cannot encode an empty frame");
  if (frame.width() > 0xFFFF || frame.height() > 0xFFFF) throw ShapeError("frame too large for FVT1");
  if (prev && (prev->width() != frame.width() || prev->height() != frame.height() || prev->format() != frame.format())) {
    throw ShapeError("reference frame differs in size or format");
  }
  const PlaneCoder coder{step, quality == 100, prev ? kInterRounding : 0.5};
  const auto comps = frame.components();
  std::vector<Plane> prev_comps;
  if (prev) prev_comps = prev->components();

  std::vector<std::uint8_t> coeffs;
  ByteWriter w(coeffs);
  std::vector<Plane> recon;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const Plane& cur = comps[c];
    Signal s{cur.width, cur.height, std::vector<std::int32_t>(cur.data.size())};
    for (std::size_t i = 0; i < cur.data.size(); ++i) {
      s.v[i] = prev ? static_cast<std::int32_t>(cur.data[i]) - prev_comps[c].data[i]
                    : static_cast<std::int32_t>(cur.data[i]) - 128;
    }
    Plane out(cur.width, cur.height);
    std::array<std::int32_t, 64> rec{};
    for (int by = 0; by < cur.height; by += 8) {
      for (int bx = 0; bx < cur.width; bx += 8) {
        write_block(w, coder.code(s, bx, by, rec));
        for (int y = 0; y < 8 && by + y < cur.height; ++y) {
          for (int x = 0; x < 8 && bx + x < cur.width; ++x) {
            const std::int32_t base = prev ? prev_comps[c].at(bx + x, by + y) : 128;
            out.at(bx + x, by + y) = static_cast<std::uint8_t>(std::clamp(base + rec[y * 8 + x], 0, 255));
          }
        }
      }
    }
    recon.push_back(std::move(out));
  }

  EncodedFrame result;
  result.record.type = prev ? FrameType::P : FrameType::I;
  ByteWriter pw(result.record.payload);
  pw.u16(static_cast<std::uint16_t>(frame.width()));
  pw.u16(static_cast<std::uint16_t>(frame.height()));
  pw.u8(static_cast<std::uint8_t>(frame.format()));
  pw.u8(static_cast<std::uint8_t>(quality));
  pw.bytes(deflate_raw(coeffs));
  result.reconstructed = Frame::from_components(frame.format(), std::move(recon), frame.timestamp());
  return result;
}

namespace {

Frame decode_payload(std::span<const std::uint8_t> payload, FrameType type, const Frame* prev) {
  if (type != FrameType::I && type != FrameType::P) throw BitstreamError("unknown frame type", 0);
  if (type == FrameType::P && !prev) throw BitstreamError("P-record without a reference frame", 0);
  ByteReader hr(payload);
  const int width = hr.u16();
  const int height = hr.u16();
  const std::uint8_t fmt = hr.u8();
  const int quality = hr.u8();
  if (width == 0 || height == 0) throw BitstreamError("zero frame dimension", 0);
  if (fmt > static_cast<std::uint8_t>(PixelFormat::RGB8)) throw BitstreamError("unknown pixel format", 4);
  if (quality > 100) throw BitstreamError("quality out of range", 5);
  const auto format = static_cast<PixelFormat>(fmt);
  const PlaneCoder coder{quant_step(quality), quality == 100};
  const Frame shape = Frame::filled(width, height, format, 0);
  const Frame* ref = type == FrameType::P ? prev : nullptr;
  check_reference(shape, ref, 0);

  auto comps = shape.components();
  std::size_t blocks = 0;
  for (const auto& p : comps) blocks += static_cast<std::size_t>((p.width + 7) / 8) * ((p.height + 7) / 8);
  // A block is at most 64 (run, level) pairs plus the end marker.
  const auto coeffs = inflate_raw(payload.subspan(kPreambleSize), kPreambleSize, blocks * (64 * 5 + 1));
  ByteReader r(coeffs);
  std::vector<Plane> ref_comps;
  if (ref) ref_comps = ref->components();
  for (std::size_t c = 0; c < comps.size(); ++c) {
    Plane& out = comps[c];
    for (int by = 0; by < out.height; by += 8) {
      for (int bx = 0; bx < out.width; bx += 8) {
        const auto rec = coder.decode(read_block(r));
        for (int y = 0; y < 8 && by + y < out.height; ++y) {
          for (int x = 0; x < 8 && bx + x < out.width; ++x) {
            const std::int32_t base = ref ? ref_comps[c].at(bx + x, by + y) : 128;
            out.at(bx + x, by + y) = static_cast<std::uint8_t>(std::clamp(base + rec[y * 8 + x], 0, 255));
          }
        }
      }
    }
  }
  if (!r.done()) throw BitstreamError("trailing coefficient data", r.offset());
  return Frame::from_components(format, std::move(comps));
}

}  // namespace

Frame decode_record(const FrameRecord& record, const Frame* prev) {
  return decode_payload(record.payload, record.type, prev);
}

Frame decode_record(std::span<const std::uint8_t> record_bytes, const Frame* prev) {
  std::size_t offset = 0;
  const FrameRecord rec = read_record(record_bytes, offset);
  return decode_payload(rec.payload, rec.type, prev);
}

void append_record(std::vector<std::uint8_t>& out, const FrameRecord& record) {
  ByteWriter w(out);
  w.u8(static_cast<std::uint8_t>(record.type));
  w.u32(static_cast<std::uint32_t>(record.payload.size()));
  w.bytes(record.payload);
}

FrameRecord read_record(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  ByteReader r(bytes, offset);
  FrameRecord rec;
  const std::size_t at = r.offset();
  const std::uint8_t type = r.u8();
  if (type > static_cast<std::uint8_t>(FrameType::P)) throw BitstreamError("unknown frame type", at);
  rec.type = static_cast<FrameType>(type);
  const std::uint32_t len = r.u32();
  const auto body = r.take(len);
  rec.payload.assign(body.begin(), body.end());
  offset = r.offset();
  return rec;
}

std::vector<std::uint8_t> write_tile_stream(const TileStream& stream) {
  const auto& h = stream.header;
  if (h.width <= 0 || h.width > 0xFFFF || h.height <= 0 || h.height > 0xFFFF) throw ConfigError("bad tile size");
  if (h.gop < 1 || h.gop > 255 || h.fps < 1 || h.fps > 255) throw ConfigError("gop and fps must be in 1..255");
  quant_step(h.quality);
  std::vector<std::uint8_t> out{'F', 'V', 'T', '1'};
  ByteWriter w(out);
  w.u16(static_cast<std::uint16_t>(h.width));
  w.u16(static_cast<std::uint16_t>(h.height));
  w.u8(static_cast<std::uint8_t>(h.format));
  w.u8(static_cast<std::uint8_t>(h.gop));
  w.u8(static_cast<std::uint8_t>(h.quality));
  w.u8(static_cast<std::uint8_t>(h.fps));
  for (const auto& rec : stream.records) append_record(out, rec);
  return out;
}

TileStream read_tile_stream(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), "FVT1")) throw BitstreamError("bad magic", 0);
  TileStream s;
  s.header.width = r.u16();
  s.header.height = r.u16();
  const std::size_t fmt_at = r.offset();
  const std::uint8_t fmt = r.u8();
  if (fmt > static_cast<std::uint8_t>(PixelFormat::RGB8)) throw BitstreamError("unknown pixel format", fmt_at);
  s.header.format = static_cast<PixelFormat>(fmt);
  s.header.gop = r.u8();
  s.header.quality = r.u8();
  s.header.fps = r.u8();
  if (s.header.gop == 0) throw BitstreamError("gop of zero", fmt_at + 1);
  std::size_t offset = r.offset();
  while (offset < bytes.size()) {
    const std::size_t at = offset;
    s.records.push_back(read_record(bytes, offset));
    const bool want_i = (s.records.size() - 1) % static_cast<std::size_t>(s.header.gop) == 0;
    if (want_i != (s.records.back().type == FrameType::I)) {
      throw BitstreamError(want_i ? "expected an I-record at GOP start" : "unexpected I-record inside GOP", at);
    }
  }
  return s;
}

TileEncoder::TileEncoder(TileStreamHeader header) : header_(header) {
  if (header_.gop < 1) throw ConfigError("gop must be positive");
  quant_step(header_.quality);
}

EncodedFrame TileEncoder::encode(const Frame& frame) {
  if (frame.width() != header_.width || frame.height() != header_.height || frame.format() != header_.format) {
    throw ShapeError("tile frame does not match the stream header");
  }
  const bool intra = count_ % header_.gop == 0;
  EncodedFrame e = encode_frame(frame, intra ? nullptr : &*reference_, header_.quality);
  reference_ = e.reconstructed;
  ++count_;
  return e;
}

Frame TileDecoder::decode(const FrameRecord& record) { return decode(record.payload, record.type); }

Frame TileDecoder::decode(std::span<const std::uint8_t> payload, FrameType type) {
  Frame f = decode_payload(payload, type, reference_ ? &*reference_ : nullptr);
  reference_ = f;
  return f;
}

std::vector<Frame> decode_stream(const TileStream& stream) {
  TileDecoder dec;
  std::vector<Frame> out;
  out.reserve(stream.records.size());
  for (const auto& rec : stream.records) out.push_back(dec.decode(rec));
  return out;
}

GopCheck validate_gop(int gop, int fps, double segment_duration) {
  if (fps <= 0) throw ConfigError("fps must be positive");
  if (gop <= 0) throw ConfigError("gop must be positive");
  if (!(segment_duration > 0.0)) throw ConfigError("segment duration must be positive");
  const double frames = fps * segment_duration;
  const long per_segment = std::lround(frames);
  if (std::abs(frames - static_cast<double>(per_segment)) > 1e-9 || per_segment == 0) {
    throw ConfigError("fps * segment_duration must be a whole number of frames");
  }
  GopCheck check;
  // Segment k starts at frame k * per_segment; the pattern repeats after gop segments.
  for (long k = 1; k <= gop; ++k) {
    if ((k * per_segment) % gop != 0) {
      check.ok = false;
      check.first_bad_segment = static_cast<int>(k);
      break;
    }
  }
  return check;
}

}  // namespace fvv
