#include <array>
#include <map>
#include <optional>

#include "fvv/bytes.hpp"
#include "fvv/codec.hpp"
#include "fvv/hls.hpp"

namespace fvv {

std::uint32_t crc32_mpeg2(std::span<const std::uint8_t> bytes) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i << 24;
      for (int k = 0; k < 8; ++k) c = (c & 0x80000000u) ? (c << 1) ^ 0x04C11DB7u : c << 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (const std::uint8_t b : bytes) crc = (crc << 8) ^ table[((crc >> 24) ^ b) & 0xFF];
  return crc;
}

std::vector<std::uint8_t> encode_cluster_payload(const ClusterRecord& record) {
  if (record.tiles.size() > 0xFFFF) throw ConfigError("too many tiles in one cluster frame");
  std::vector<std::uint8_t> out;
  ByteWriter w(out);
  w.u16(static_cast<std::uint16_t>(record.tiles.size()));
  std::uint64_t offset = 0;
  for (const auto& t : record.tiles) {
    w.u32(static_cast<std::uint32_t>(offset));
    w.u32(static_cast<std::uint32_t>(t.size()));
    offset += t.size();
  }
  if (offset > 0xFFFFFFFFu) throw ConfigError("cluster frame too large");
  for (const auto& t : record.tiles) w.bytes(t);
  return out;
}

ClusterPayloadView parse_cluster_payload(std::span<const std::uint8_t> payload) {
  try {
    ByteReader r(payload);
    const std::uint16_t count = r.u16();
    ClusterPayloadView v;
    v.tiles.reserve(count);
    for (std::uint16_t i = 0; i < count; ++i) {
      TileSlice s;
      s.offset = r.u32();
      s.length = r.u32();
      v.tiles.push_back(s);
    }
    v.records = payload.subspan(r.offset());
    for (std::size_t i = 0; i < v.tiles.size(); ++i) {
      const auto& s = v.tiles[i];
      if (static_cast<std::uint64_t>(s.offset) + s.length > v.records.size()) {
        throw ExtractionError("tile " + std::to_string(i) + " slice [" + std::to_string(s.offset) + ", +" +
                              std::to_string(s.length) + ") exceeds the " + std::to_string(v.records.size()) +
                              "-byte record area");
      }
    }
    return v;
  } catch (const BitstreamError& e) {
    throw ExtractionError(std::string("truncated tile table: ") + e.what());
  }
}

std::uint64_t frame_pts(const SegmentTiming& timing, std::size_t frame_index) {
  if (timing.fps <= 0) throw ConfigError("fps must be positive");
  // Exact for fps dividing 90000; otherwise the nearest tick.
  return (timing.start_pts + (frame_index * ts::kClock + timing.fps / 2) / timing.fps) & ((1ull << 33) - 1);
}

namespace {

class PacketWriter {
 public:
  explicit PacketWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  // One PSI section in its own packet, 0xFF-filled.
  void section(std::uint16_t pid, const std::vector<std::uint8_t>& section) {
    std::array<std::uint8_t, ts::kPacketSize> p;
    p.fill(0xFF);
    header(p.data(), pid, true, 0x1);
    p[4] = 0;  // pointer_field
    std::copy(section.begin(), section.end(), p.begin() + 5);
    out_.insert(out_.end(), p.begin(), p.end());
  }

  // A PES split across packets; PCR on the first, stuffing on the last.
  void pes(std::uint16_t pid, const std::vector<std::uint8_t>& pes, std::uint64_t pcr_base) {
    std::size_t pos = 0;
    bool first = true;
    while (pos < pes.size() || first) {
      std::array<std::uint8_t, ts::kPacketSize> p;
      p.fill(0xFF);
      std::vector<std::uint8_t> af;  // adaptation field body after the length byte
      if (first) {
        af.push_back(0x10);  // PCR_flag
        af.push_back(static_cast<std::uint8_t>(pcr_base >> 25));
        af.push_back(static_cast<std::uint8_t>(pcr_base >> 17));
        af.push_back(static_cast<std::uint8_t>(pcr_base >> 9));
        af.push_back(static_cast<std::uint8_t>(pcr_base >> 1));
        af.push_back(static_cast<std::uint8_t>(((pcr_base & 1) << 7) | 0x7E));  // reserved bits, ext high bit 0
        af.push_back(0x00);                                                     // PCR extension low
      }
      std::size_t room = ts::kPacketSize - 4 - (first ? 1 + af.size() : 0);
      const std::size_t remaining = pes.size() - pos;
      bool has_af = first;
      if (remaining < room) {
        // Stuff the adaptation field so the payload ends exactly at the packet end.
        std::size_t af_total = ts::kPacketSize - 4 - remaining;  // includes the length byte
        if (!has_af && af_total >= 2) af.push_back(0x00);          // flags
        while (1 + af.size() < af_total) af.push_back(0xFF);
        has_af = true;
        room = remaining;
      }
      const std::size_t n = std::min(room, remaining);
      header(p.data(), pid, first, has_af ? 0x3 : 0x1);
      std::size_t at = 4;
      if (has_af) {
        p[at++] = static_cast<std::uint8_t>(af.size());
        std::copy(af.begin(), af.end(), p.begin() + static_cast<std::ptrdiff_t>(at));
        at += af.size();
      }
      std::copy(pes.begin() + static_cast<std::ptrdiff_t>(pos), pes.begin() + static_cast<std::ptrdiff_t>(pos + n),
                p.begin() + static_cast<std::ptrdiff_t>(at));
      pos += n;
      first = false;
      out_.insert(out_.end(), p.begin(), p.end());
    }
  }

 private:
  void header(std::uint8_t* p, std::uint16_t pid, bool pusi, std::uint8_t afc) {
    std::uint8_t& cc = cc_[pid];
    p[0] = ts::kSync;
    p[1] = static_cast<std::uint8_t>((pusi ? 0x40 : 0x00) | ((pid >> 8) & 0x1F));
    p[2] = static_cast<std::uint8_t>(pid & 0xFF);
    p[3] = static_cast<std::uint8_t>((afc << 4) | (cc & 0x0F));
    cc = (cc + 1) & 0x0F;
  }

  std::vector<std::uint8_t>& out_;
  std::map<std::uint16_t, std::uint8_t> cc_;
};

void finish_section(std::vector<std::uint8_t>& s) {
  // section_length counts from after the length field through the CRC.
  const std::size_t len = s.size() - 3 + 4;
  s[1] = static_cast<std::uint8_t>(0xB0 | ((len >> 8) & 0x0F));
  s[2] = static_cast<std::uint8_t>(len & 0xFF);
  const std::uint32_t crc = crc32_mpeg2(s);
  s.push_back(static_cast<std::uint8_t>(crc >> 24));
  s.push_back(static_cast<std::uint8_t>(crc >> 16));
  s.push_back(static_cast<std::uint8_t>(crc >> 8));
  s.push_back(static_cast<std::uint8_t>(crc));
}

std::vector<std::uint8_t> pat_section() {
  std::vector<std::uint8_t> s = {0x00, 0, 0, 0x00, 0x01, 0xC1, 0x00, 0x00};
  s.push_back(static_cast<std::uint8_t>(ts::kProgramNumber >> 8));
  s.push_back(static_cast<std::uint8_t>(ts::kProgramNumber & 0xFF));
  s.push_back(static_cast<std::uint8_t>(0xE0 | (ts::kPmtPid >> 8)));
  s.push_back(static_cast<std::uint8_t>(ts::kPmtPid & 0xFF));
  finish_section(s);
  return s;
}

std::vector<std::uint8_t> pmt_section() {
  std::vector<std::uint8_t> s = {0x02, 0, 0, static_cast<std::uint8_t>(ts::kProgramNumber >> 8),
                                 static_cast<std::uint8_t>(ts::kProgramNumber & 0xFF), 0xC1, 0x00, 0x00};
  s.push_back(static_cast<std::uint8_t>(0xE0 | (ts::kStreamPid >> 8)));  // PCR_PID
  s.push_back(static_cast<std::uint8_t>(ts::kStreamPid & 0xFF));
  s.push_back(0xF0);  // program_info_length = 0
  s.push_back(0x00);
  s.push_back(ts::kStreamType);
  s.push_back(static_cast<std::uint8_t>(0xE0 | (ts::kStreamPid >> 8)));
  s.push_back(static_cast<std::uint8_t>(ts::kStreamPid & 0xFF));
  s.push_back(0xF0);  // ES_info_length = 0
  s.push_back(0x00);
  finish_section(s);
  return s;
}

std::vector<std::uint8_t> pes_packet(const std::vector<std::uint8_t>& payload, std::uint64_t pts) {
  std::vector<std::uint8_t> p = {0x00, 0x00, 0x01, ts::kStreamId, 0, 0, 0x84, 0x80, 0x05};
  // PES_packet_length is 0 (unbounded) when the packet does not fit 16 bits.
  const std::size_t len = payload.size() + 8;
  if (len <= 0xFFFF) {
    p[4] = static_cast<std::uint8_t>(len >> 8);
    p[5] = static_cast<std::uint8_t>(len & 0xFF);
  }
  p.push_back(static_cast<std::uint8_t>(0x21 | ((pts >> 29) & 0x0E)));
  p.push_back(static_cast<std::uint8_t>(pts >> 22));
  p.push_back(static_cast<std::uint8_t>(0x01 | ((pts >> 14) & 0xFE)));
  p.push_back(static_cast<std::uint8_t>(pts >> 7));
  p.push_back(static_cast<std::uint8_t>(0x01 | ((pts << 1) & 0xFE)));
  p.insert(p.end(), payload.begin(), payload.end());
  return p;
}

}  // namespace

std::vector<std::uint8_t> mux_segment(const std::vector<ClusterRecord>& frames, const SegmentTiming& timing) {
  if (!frames.empty()) {
    const auto& first = frames.front();
    for (std::size_t t = 0; t < first.tiles.size(); ++t) {
      if (first.tiles[t].empty() || first.tiles[t][0] != static_cast<std::uint8_t>(FrameType::I)) {
        throw GopAlignmentError("segment window does not start with an I-record on tile " + std::to_string(t));
      }
    }
  }
  std::vector<std::uint8_t> out;
  PacketWriter w(out);
  w.section(ts::kPatPid, pat_section());
  w.section(ts::kPmtPid, pmt_section());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::uint64_t pts = frame_pts(timing, i);
    w.pes(ts::kStreamPid, pes_packet(encode_cluster_payload(frames[i]), pts), pts);
  }
  return out;
}

std::span<const std::uint8_t> DemuxedFrame::tile(std::size_t k) const {
  const auto& s = tiles.at(k);
  const std::size_t header = 2 + 8 * tiles.size();
  return std::span<const std::uint8_t>(payload).subspan(header + s.offset, s.length);
}

namespace {

struct Packet {
  bool pusi = false;
  std::uint16_t pid = 0;
  std::uint8_t afc = 0;
  std::uint8_t cc = 0;
  std::span<const std::uint8_t> adaptation;
  std::span<const std::uint8_t> payload;
};

Packet parse_packet(std::span<const std::uint8_t> p, std::size_t index) {
  if (p[0] != ts::kSync) throw TsError(TsErrorKind::SyncLoss, index, 0, "sync byte is not 0x47");
  Packet k;
  k.pusi = (p[1] & 0x40) != 0;
  k.pid = static_cast<std::uint16_t>(((p[1] & 0x1F) << 8) | p[2]);
  k.afc = (p[3] >> 4) & 0x3;
  k.cc = p[3] & 0x0F;
  std::size_t at = 4;
  if (k.afc == 0) throw TsError(TsErrorKind::TableMismatch, index, k.pid, "reserved adaptation_field_control");
  if (k.afc & 0x2) {
    const std::size_t len = p[4];
    if (len > 183) throw TsError(TsErrorKind::TableMismatch, index, k.pid, "adaptation field too long");
    k.adaptation = p.subspan(5, len);
    at = 5 + len;
  }
  if (k.afc & 0x1) k.payload = p.subspan(at);
  return k;
}

// Reads one PSI section starting after the pointer field; checks the CRC.
std::span<const std::uint8_t> section_body(const Packet& k, std::size_t index, std::uint8_t table_id) {
  if (!k.pusi || k.payload.empty()) throw TsError(TsErrorKind::TableMismatch, index, k.pid, "missing section start");
  const std::size_t pointer = k.payload[0];
  auto s = k.payload.subspan(1);
  if (pointer + 3 > s.size()) throw TsError(TsErrorKind::TableMismatch, index, k.pid, "bad pointer field");
  s = s.subspan(pointer);
  if (s[0] != table_id) throw TsError(TsErrorKind::TableMismatch, index, k.pid, "unexpected table id");
  const std::size_t len = ((s[1] & 0x0F) << 8) | s[2];
  if (len < 9 || 3 + len > s.size()) throw TsError(TsErrorKind::TableMismatch, index, k.pid, "bad section length");
  s = s.first(3 + len);
  if (crc32_mpeg2(s) != 0) throw TsError(TsErrorKind::TableMismatch, index, k.pid, "section CRC mismatch");
  return s;
}

std::uint64_t read_pts(std::span<const std::uint8_t> b) {
  return (static_cast<std::uint64_t>((b[0] >> 1) & 0x07) << 30) | (static_cast<std::uint64_t>(b[1]) << 22) |
         (static_cast<std::uint64_t>(b[2] >> 1) << 15) | (static_cast<std::uint64_t>(b[3]) << 7) | (b[4] >> 1);
}

DemuxedFrame finish_pes(std::vector<std::uint8_t>& buf, std::size_t start_index) {
  auto fail = [&](const std::string& why) {
    return TsError(TsErrorKind::TruncatedPes, start_index, ts::kStreamPid, why);
  };
  if (buf.size() < 9) throw fail("PES header cut short");
  if (buf[0] != 0 || buf[1] != 0 || buf[2] != 1) throw fail("missing PES start code");
  if (buf[3] != ts::kStreamId) throw TsError(TsErrorKind::TableMismatch, start_index, ts::kStreamPid, "unexpected stream_id");
  const std::size_t declared = (static_cast<std::size_t>(buf[4]) << 8) | buf[5];
  if (declared != 0 && declared + 6 != buf.size()) throw fail("PES length does not match its packets");
  const std::size_t hlen = buf[8];
  if (9 + hlen > buf.size() || !(buf[7] & 0x80) || hlen < 5) throw fail("PES header without PTS");
  DemuxedFrame f;
  f.pts = read_pts(std::span<const std::uint8_t>(buf).subspan(9, 5));
  f.payload.assign(buf.begin() + static_cast<std::ptrdiff_t>(9 + hlen), buf.end());
  try {
    const auto view = parse_cluster_payload(f.payload);
    f.tiles = view.tiles;
    std::uint64_t end = 0;
    for (const auto& s : f.tiles) end = std::max<std::uint64_t>(end, static_cast<std::uint64_t>(s.offset) + s.length);
    if (end != view.records.size()) throw fail("record area length disagrees with its tile table");
  } catch (const ExtractionError& e) {
    throw fail(e.what());
  }
  buf.clear();
  return f;
}

}  // namespace

DemuxedSegment demux_segment(std::span<const std::uint8_t> body) {
  if (body.size() % ts::kPacketSize != 0) {
    throw TsError(TsErrorKind::Alignment, body.size() / ts::kPacketSize, 0,
                  "segment length " + std::to_string(body.size()) + " is not a multiple of 188");
  }
  DemuxedSegment seg;
  seg.packet_count = body.size() / ts::kPacketSize;
  std::map<std::uint16_t, std::uint8_t> last_cc;
  std::optional<std::uint16_t> pmt_pid;
  std::optional<std::uint16_t> es_pid;
  std::vector<std::uint8_t> pes;
  std::size_t pes_start = 0;
  bool in_pes = false;

  for (std::size_t i = 0; i < seg.packet_count; ++i) {
    const Packet k = parse_packet(body.subspan(i * ts::kPacketSize, ts::kPacketSize), i);
    if (k.pid == ts::kNullPid) continue;
    if (k.afc & 0x1) {
      const auto it = last_cc.find(k.pid);
      if (it != last_cc.end() && k.cc != ((it->second + 1) & 0x0F)) {
        throw TsError(TsErrorKind::ContinuityGap, i, k.pid,
                      "expected counter " + std::to_string((it->second + 1) & 0x0F) + ", got " + std::to_string(k.cc));
      }
      last_cc[k.pid] = k.cc;
    }
    if (i == 0 && k.pid != ts::kPatPid) throw TsError(TsErrorKind::TableMismatch, i, k.pid, "segment does not start with a PAT");
    if (i == 1 && k.pid != ts::kPmtPid) throw TsError(TsErrorKind::TableMismatch, i, k.pid, "PMT does not follow the PAT");

    if (k.pid == ts::kPatPid) {
      const auto s = section_body(k, i, 0x00);
      if (s.size() != 3 + 5 + 4 + 4) throw TsError(TsErrorKind::TableMismatch, i, k.pid, "PAT must list one program");
      const std::uint16_t program = static_cast<std::uint16_t>((s[8] << 8) | s[9]);
      const std::uint16_t pid = static_cast<std::uint16_t>(((s[10] & 0x1F) << 8) | s[11]);
      if (program != ts::kProgramNumber || pid != ts::kPmtPid) {
        throw TsError(TsErrorKind::TableMismatch, i, k.pid, "PAT does not map program 1 to PID 0x1000");
      }
      pmt_pid = pid;
    } else if (pmt_pid && k.pid == *pmt_pid) {
      const auto s = section_body(k, i, 0x02);
      const std::uint16_t pcr_pid = static_cast<std::uint16_t>(((s[8] & 0x1F) << 8) | s[9]);
      const std::size_t info = ((s[10] & 0x0F) << 8) | s[11];
      const std::size_t at = 12 + info;
      if (at + 5 > s.size() - 4) throw TsError(TsErrorKind::TableMismatch, i, k.pid, "PMT lists no stream");
      const std::uint8_t type = s[at];
      const std::uint16_t pid = static_cast<std::uint16_t>(((s[at + 1] & 0x1F) << 8) | s[at + 2]);
      if (type != ts::kStreamType || pid != ts::kStreamPid || pcr_pid != ts::kStreamPid) {
        throw TsError(TsErrorKind::TableMismatch, i, k.pid, "PMT does not declare private stream 0x06 on PID 0x0100");
      }
      es_pid = pid;
    } else if (es_pid && k.pid == *es_pid) {
      if (!k.adaptation.empty() && (k.adaptation[0] & 0x10)) {
        if (k.adaptation.size() < 7) throw TsError(TsErrorKind::TableMismatch, i, k.pid, "PCR field cut short");
        const auto a = k.adaptation;
        seg.pcrs.push_back((static_cast<std::uint64_t>(a[1]) << 25) | (static_cast<std::uint64_t>(a[2]) << 17) |
                           (static_cast<std::uint64_t>(a[3]) << 9) | (static_cast<std::uint64_t>(a[4]) << 1) |
                           (a[5] >> 7));
      }
      if (k.pusi) {
        if (in_pes) seg.frames.push_back(finish_pes(pes, pes_start));
        in_pes = true;
        pes_start = i;
      } else if (!in_pes) {
        throw TsError(TsErrorKind::TruncatedPes, i, k.pid, "continuation packet without a PES start");
      }
      pes.insert(pes.end(), k.payload.begin(), k.payload.end());
    } else {
      throw TsError(TsErrorKind::TableMismatch, i, k.pid, "PID not declared by the program tables");
    }
  }
  if (in_pes) seg.frames.push_back(finish_pes(pes, pes_start));
  if (seg.packet_count < 2 || !pmt_pid || !es_pid) {
    throw TsError(TsErrorKind::TableMismatch, seg.packet_count, 0, "segment lacks PAT/PMT");
  }
  return seg;
}

}  // namespace fvv
