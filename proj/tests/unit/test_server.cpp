#include <thread>

#include "doctest.h"
#include "fvv/capture_sim.hpp"
#include "fvv/server.hpp"
#include "httplib.h"

using namespace fvv;

namespace {

std::vector<std::vector<Frame>> small_ticks(int cams, int frames, int w = 64, int h = 32) {
  const auto scene = make_default_scene(17, w, h, cams);
  std::vector<std::vector<Frame>> ticks;
  for (int t = 0; t < frames; ++t) {
    std::vector<Frame> row;
    for (int c = 0; c < cams; ++c) row.push_back(render_view(scene, c, t).with_timestamp(t));
    ticks.push_back(std::move(row));
  }
  return ticks;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.live = false;
  cfg.stages = 1;
  cfg.views_per_side = 1;
  cfg.fps = 4;
  cfg.segment_duration = 0.5;
  cfg.gop = 2;
  cfg.quality = 75;
  cfg.playlist_window = 3;
  return cfg;
}

std::vector<std::uint8_t> body_for(std::uint64_t seq) {
  std::vector<std::uint8_t> b(64 + seq % 7);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<std::uint8_t>(seq * 31 + i);
  return b;
}

}  // namespace

TEST_SUITE("edge-server") {
  TEST_CASE("config validation") {
    PipelineConfig c = small_config();
    CHECK_NOTHROW(c.validate());
    c.gop = 3;
    CHECK_THROWS_AS(c.validate(), GopAlignmentError);
    c = small_config();
    c.quality = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.views_per_side = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("segment store statuses and retention") {
    SegmentStore s(2, 1.0, 3, 2);
    CHECK(s.segment(0, 0).status == SegmentStore::Status::NotFound);
    for (std::uint64_t q = 0; q < 8; ++q) s.publish(0, q, body_for(q), 1.0);
    CHECK(s.segment(0, 2).status == SegmentStore::Status::Gone);
    CHECK(s.segment(0, 3).status == SegmentStore::Status::Ok);
    CHECK(*s.segment(0, 7).body == body_for(7));
    CHECK(s.segment(0, 8).status == SegmentStore::Status::NotFound);
    CHECK(s.segment(1, 0).status == SegmentStore::Status::NotFound);
    CHECK(s.segment(5, 0).status == SegmentStore::Status::NotFound);
    CHECK_FALSE(s.playlist(2).has_value());
    CHECK(parse_m3u8(*s.playlist(0)).media_sequence == 5);
    CHECK_THROWS_AS(s.publish(0, 9, {}, 1.0), SequencingError);
    s.end_stream();
    CHECK(parse_m3u8(*s.playlist(1)).ended);
  }

  TEST_CASE("every listed segment is fetchable while rotation runs") {
    SegmentStore s(1, 1.0, 6, 2);
    std::atomic<bool> done{false};
    std::atomic<int> missing{0}, wrong{0}, fetched{0};
    std::thread publisher([&] {
      for (std::uint64_t q = 0; q < 1000; ++q) {
        s.publish(0, q, body_for(q), 1.0);
        std::this_thread::yield();
      }
      done = true;
    });
    std::vector<std::thread> readers;
    for (int r = 0; r < 3; ++r) {
      readers.emplace_back([&] {
        bool last = false;
        while (!last) {
          last = done;
          const Playlist p = parse_m3u8(*s.playlist(0));
          for (std::size_t i = 0; i < p.entries.size(); ++i) {
            const auto q = entry_sequence(p, i);
            const auto got = s.segment(0, q);
            if (got.status == SegmentStore::Status::NotFound) ++missing;
            if (got.status == SegmentStore::Status::Ok) {
              ++fetched;
              if (*got.body != body_for(q)) ++wrong;
            }
          }
        }
      });
    }
    publisher.join();
    for (auto& t : readers) t.join();
    CHECK(missing == 0);
    CHECK(wrong == 0);
    CHECK(fetched > 0);
  }

  TEST_CASE("published tiles equal a direct reference encode") {
    const auto ticks = small_ticks(3, 9);
    const PipelineConfig cfg = small_config();
    Pipeline p(cfg, memory_source(ticks, cfg.fps));
    p.start();
    p.wait();
    CHECK(p.finished());
    CHECK(p.frames_published() == 9);
    CHECK(p.store().ended());
    REQUIRE(p.store().published(0) == 5);

    const auto& layouts = p.layouts();
    std::vector<std::vector<TileEncoder>> enc(layouts.size());
    std::vector<ClusterGeometry> geo;
    for (const auto& l : layouts) {
      geo.push_back(cluster_geometry(l, 64, 32));
      for (const auto& r : geo.back().tiles) {
        enc[l.cluster_id].emplace_back(TileStreamHeader{r.width, r.height, PixelFormat::YUV420, 2, 75, 4});
      }
    }
    std::vector<std::vector<std::vector<std::vector<std::uint8_t>>>> expect(layouts.size());
    for (const auto& cams : ticks) {
      const auto clusters = organize_clusters(synthesize_views(cams, p.model(), cfg.interp, nullptr), layouts);
      for (std::size_t c = 0; c < layouts.size(); ++c) {
        std::vector<std::vector<std::uint8_t>> tiles;
        for (std::size_t k = 0; k < geo[c].tiles.size(); ++k) {
          const auto& r = geo[c].tiles[k];
          std::vector<std::uint8_t> bytes;
          append_record(bytes, enc[c][k].encode(crop(clusters[c].stitched, r.x, r.y, r.width, r.height)).record);
          tiles.push_back(std::move(bytes));
        }
        expect[c].push_back(std::move(tiles));
      }
    }
    for (std::size_t c = 0; c < layouts.size(); ++c) {
      std::size_t frame = 0;
      for (std::uint64_t q = 0; q < 5; ++q) {
        const auto got = p.store().segment(static_cast<int>(c), q);
        REQUIRE(got.status == SegmentStore::Status::Ok);
        const auto seg = demux_segment(*got.body);
        CHECK(seg.frames.size() == (q < 4 ? 2u : 1u));
        for (const auto& f : seg.frames) {
          CHECK(f.pts == frame * 90000 / 4);
          for (std::size_t k = 0; k < expect[c][frame].size(); ++k) {
            const auto t = f.tile(k);
            CHECK(std::vector<std::uint8_t>(t.begin(), t.end()) == expect[c][frame][k]);
          }
          ++frame;
        }
      }
      CHECK(frame == 9);
    }
    const auto report = p.latency().report();
    CHECK(report.iterations == 9);
    for (const char* name : {kStageInterp, kStageStitch, kStageSchedule, kStageEncode}) {
      CHECK(report.stage(name).count == 9);
    }
  }

  TEST_CASE("a scene fps that disagrees with the config is rejected") {
    PipelineConfig cfg = small_config();
    cfg.fps = 8;
    CHECK_THROWS_AS(Pipeline(cfg, memory_source(small_ticks(3, 2), 4)), ConfigError);
  }

  TEST_CASE("http routes serve playlists, segments and status codes") {
    PipelineConfig cfg = small_config();
    Pipeline p(cfg, memory_source(small_ticks(3, 20), cfg.fps));
    p.start();
    p.wait();
    EdgeHttpServer server(p);
    const int port = server.start("127.0.0.1", 0);
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);

    auto lookup = cli.Get("/lookup.json");
    REQUIRE(lookup);
    CHECK(lookup->status == 200);
    const auto doc = nlohmann::json::parse(lookup->body);
    CHECK(lookup_from_json(doc) == p.lookup());
    CHECK(doc.at("frame").at("width") == 64);

    auto pl = cli.Get("/cluster/1/playlist.m3u8");
    REQUIRE(pl);
    CHECK(pl->status == 200);
    CHECK(pl->get_header_value("Content-Type") == "application/vnd.apple.mpegurl");
    const Playlist parsed = parse_m3u8(pl->body);
    CHECK(parsed.media_sequence == 7);
    CHECK(parsed.ended);

    CHECK(cli.Get("/cluster/9/playlist.m3u8")->status == 404);
    CHECK(cli.Get("/cluster/1/seg00099.ts")->status == 404);
    CHECK(cli.Get("/cluster/1/seg00000.ts")->status == 410);
    CHECK(cli.Get("/nowhere")->status == 404);

    const std::string uri = "/cluster/1/" + parsed.entries.front().uri;
    std::vector<std::string> bodies(8);
    std::vector<std::thread> fetchers;
    for (int i = 0; i < 8; ++i) {
      fetchers.emplace_back([&, i] {
        httplib::Client c("127.0.0.1", port);
        auto r = c.Get(uri);
        if (r && r->status == 200) bodies[i] = r->body;
      });
    }
    for (auto& t : fetchers) t.join();
    const auto& stored = *p.store().segment(1, 7).body;
    for (const auto& b : bodies) CHECK(b == std::string(stored.begin(), stored.end()));
    auto seg = cli.Get(uri);
    CHECK(seg->get_header_value("Content-Type") == "video/mp2t");

    auto metrics = cli.Get("/metrics");
    REQUIRE(metrics);
    const auto m = nlohmann::json::parse(metrics->body);
    CHECK(m.at("frames_published") == 20);
    CHECK(m.at("ended") == true);
    server.stop();
  }
}
