#include "doctest.h"
#include "fvv/codec.hpp"
#include "fvv/hls.hpp"
#include "helpers.hpp"

using namespace fvv;

namespace {

// Two tiles, three frames; I then P on each tile.
std::vector<ClusterRecord> sample_frames(int count = 3) {
  const Frame a = testutil::noise_frame(32, 16, PixelFormat::YUV420, 4);
  const Frame b = testutil::smooth_frame(16, 8, PixelFormat::YUV420, 2);
  std::vector<ClusterRecord> out;
  TileEncoder ea({32, 16, PixelFormat::YUV420, 30, 75, 30});
  TileEncoder eb({16, 8, PixelFormat::YUV420, 30, 75, 30});
  for (int i = 0; i < count; ++i) {
    ClusterRecord r;
    r.tiles.resize(2);
    append_record(r.tiles[0], ea.encode(a).record);
    append_record(r.tiles[1], eb.encode(b).record);
    out.push_back(std::move(r));
  }
  return out;
}

TsErrorKind demux_error(const std::vector<std::uint8_t>& body) {
  try {
    demux_segment(body);
  } catch (const TsError& e) {
    return e.kind();
  }
  FAIL("demux accepted a damaged segment");
  return TsErrorKind::Alignment;
}

}  // namespace

TEST_SUITE("hls-packager") {
  TEST_CASE("crc32 mpeg2 check value") {
    const std::string s = "123456789";
    CHECK(crc32_mpeg2({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}) == 0x0376E6E7u);
  }

  TEST_CASE("cluster payload table round-trips") {
    ClusterRecord r;
    r.tiles = {{1, 2, 3}, {}, {9, 9}};
    const auto bytes = encode_cluster_payload(r);
    const auto v = parse_cluster_payload(bytes);
    REQUIRE(v.tiles.size() == 3);
    CHECK(std::vector<std::uint8_t>(v.tile(0).begin(), v.tile(0).end()) == r.tiles[0]);
    CHECK(v.tile(1).empty());
    CHECK(std::vector<std::uint8_t>(v.tile(2).begin(), v.tile(2).end()) == r.tiles[2]);
    auto bad = bytes;
    bad[2 + 4 + 3] = 0xFF;  // first tile length
    CHECK_THROWS_AS(parse_cluster_payload(bad), ExtractionError);
  }

  TEST_CASE("mux then demux returns every tile record with 90 kHz pts") {
    const auto frames = sample_frames();
    const auto body = mux_segment(frames, {30, 90000});
    CHECK(body.size() % ts::kPacketSize == 0);
    for (std::size_t i = 0; i < body.size(); i += ts::kPacketSize) CHECK(body[i] == ts::kSync);
    const auto seg = demux_segment(body);
    CHECK(seg.packet_count == body.size() / ts::kPacketSize);
    REQUIRE(seg.frames.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(seg.frames[i].pts == 90000 + 3000 * i);
      for (std::size_t k = 0; k < 2; ++k) {
        const auto t = seg.frames[i].tile(k);
        CHECK(std::vector<std::uint8_t>(t.begin(), t.end()) == frames[i].tiles[k]);
      }
    }
    CHECK_FALSE(seg.pcrs.empty());
  }

  TEST_CASE("pts rounds to the nearest tick for fps not dividing 90000") {
    CHECK(frame_pts({7, 0}, 1) == 12857);
    CHECK(frame_pts({30, 10}, 2) == 6010);
  }

  TEST_CASE("segments must open with an I-record on every tile") {
    auto frames = sample_frames();
    frames.erase(frames.begin());
    CHECK_THROWS_AS(mux_segment(frames, {30, 0}), GopAlignmentError);
  }

  TEST_CASE("fault injection is detected with the right kind") {
    const auto body = mux_segment(sample_frames(), {30, 0});
    REQUIRE(body.size() / ts::kPacketSize > 4);
    auto flipped = body;
    flipped[3 * ts::kPacketSize] ^= 0xFF;
    CHECK(demux_error(flipped) == TsErrorKind::SyncLoss);
    auto dropped = body;
    dropped.erase(dropped.begin() + 3 * ts::kPacketSize, dropped.begin() + 4 * ts::kPacketSize);
    CHECK(demux_error(dropped) == TsErrorKind::ContinuityGap);
    auto cut = body;
    cut.resize(cut.size() - 10);
    CHECK(demux_error(cut) == TsErrorKind::Alignment);
    auto crc = body;
    crc[10] ^= 1;
    CHECK(demux_error(crc) == TsErrorKind::TableMismatch);
    try {
      demux_segment(flipped);
    } catch (const TsError& e) {
      CHECK(e.packet_index() == 3);
    }
  }

  TEST_CASE("live window slides by one per rotation") {
    LivePlaylist live(2.0, 6);
    for (std::uint64_t s = 0; s < 8; ++s) live.rotate(s, 2.0);
    const Playlist p = parse_m3u8(live.render());
    CHECK(p.media_sequence == 2);
    REQUIRE(p.entries.size() == 6);
    CHECK(p.entries.front().uri == "seg00002.ts");
    CHECK(p.entries.back().uri == "seg00007.ts");
    CHECK(p.target_duration == 2);
    CHECK_FALSE(p.ended);
    CHECK(entry_sequence(p, 5) == 7);
    CHECK_THROWS_AS(live.rotate(9, 2.0), SequencingError);
    live.end();
    CHECK(parse_m3u8(live.render()).ended);
    CHECK_THROWS_AS(live.rotate(8, 2.0), SequencingError);
  }

  TEST_CASE("playlist text round-trips and keeps unknown tags") {
    Playlist p;
    p.target_duration = 1;
    p.media_sequence = 41;
    p.entries = {{"seg00041.ts", 0.5}, {"seg00042.ts", 0.5}};
    p.extras = {"#EXT-X-INDEPENDENT-SEGMENTS"};
    p.ended = true;
    const auto text = render_m3u8(p);
    CHECK(text.find("#EXTINF:0.500,\nseg00041.ts\n") != std::string::npos);
    CHECK(parse_m3u8(text) == p);
    CHECK(parse_m3u8("#EXTM3U\r\n#EXT-X-MEDIA-SEQUENCE:3\r\n#EXTINF:2.0,\r\nseg00003.ts\r\n").media_sequence == 3);
  }

  TEST_CASE("malformed playlists report the line") {
    auto line_of = [](const std::string& text) {
      try {
        parse_m3u8(text);
      } catch (const FormatError& e) {
        return e.line();
      }
      return -1;
    };
    CHECK(line_of("seg.ts\n") == 1);
    CHECK(line_of("#EXTM3U\n#EXT-X-MEDIA-SEQUENCE:x\n") == 2);
    CHECK(line_of("#EXTM3U\n#EXTINF:abc,\nseg.ts\n") == 2);
    CHECK(line_of("#EXTM3U\n\nseg.ts\n") == 3);
    CHECK(line_of("#EXTM3U\n#EXTINF:1.0,\n") == 2);
  }

  TEST_CASE("segment plan places I-frames at gop multiples") {
    const auto p = segment_plan(30, 2.0, 15);
    CHECK(p.frames_per_segment == 60);
    CHECK(p.iframe_positions == std::vector<int>{0, 15, 30, 45});
    CHECK_THROWS_AS(segment_plan(30, 2.0, 40), GopAlignmentError);
    CHECK(segment_uri(123456) == "seg123456.ts");
  }
}
