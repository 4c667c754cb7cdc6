// Acceptance runner: one PASS/FAIL line per primary criterion, exit status 1 if any fails.
#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "fvv/capture_sim.hpp"
#include "fvv/client.hpp"
#include "fvv/cluster.hpp"
#include "fvv/codec.hpp"
#include "fvv/hls.hpp"
#include "fvv/interp.hpp"
#include "fvv/metrics.hpp"
#include "fvv/server.hpp"
#include "httplib.h"

#ifndef FVV_CLI_PATH
#define FVV_CLI_PATH "fvv"
#endif

namespace fs = std::filesystem;
using namespace fvv;

namespace {

// Pinned tolerances.
constexpr double kCombinatoricsSeconds = 1.0;
constexpr double kOracleSeconds = 30.0;
constexpr double kFlowTolerancePx = 0.5;
constexpr double kFlowInlierFraction = 0.95;
constexpr double kMidpointPsnrDb = 32.0;
constexpr int kBorderBand = 8;
constexpr double kMirrorFraction = 0.99;
constexpr int kMirrorLevels = 1;
constexpr double kOracleEps = 1e-9;
constexpr double kE2eSeconds = 180.0;
constexpr double kLoadNoiseBound = 0.20;
constexpr int kLoadFps = 10;
constexpr int kLoadRepeats = 3;
constexpr std::size_t kBenchIterations = 1000;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------------------------

Outcome combinatorics() {
  Outcome o;
  const auto t0 = Clock::now();
  auto scene = make_default_scene(5, 32, 32, 2, PixelFormat::Gray8);
  const SceneRenderer r(scene);
  const Frame a = r.render(0, 0), b = r.render(1, 0);
  for (int n = 1; n <= 5; ++n) {
    const auto v = dense_views(a, b, n);
    o.require(v.size() == static_cast<std::size_t>((1 << n) - 1), fmt("dense_views(%d) gave %zu", n, v.size()));
  }
  o.require(dense_views(a, b, 4).size() == 15, "n=4 -> 15");
  o.require(dense_views(a, b, 3).size() + 2 == 9, "n=3 -> 9 with endpoints");
  const ViewIndexModel m(12, 4);
  o.require(m.total_views() == 177, fmt("12 cameras, n=4 gave %d views", m.total_views()));
  const auto layouts = build_layouts(m, 16);
  o.require(layouts[5].tile_count() == 33, fmt("interior cluster has %d tiles", layouts[5].tile_count()));
  o.require(cluster_geometry(layouts[5], 64, 32).tiles.size() == 33, "interior geometry tile count");
  const double s = seconds_since(t0);
  o.require(s < kCombinatoricsSeconds, fmt("runtime %.2f s", s));
  o.note("2^n-1 for n=1..5, 177 views, 33 tiles");
  return o;
}

// ---------------------------------------------------------------------------------------------

Outcome interpolation_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto scene = make_default_scene(42, 640, 360, 2);
  const InterpConfig cfg;
  const double coarse_span = cfg.search_radius[0] * (1 << (InterpConfig::kScales - 1));
  o.require(scene.max_disparity() <= coarse_span,
            fmt("scene shift %.1f px exceeds coarse span %.0f px", scene.max_disparity(), coarse_span));
  const SceneRenderer r(scene);
  double worst_fraction = 1.0, worst_median = 0.0, worst_psnr = INFINITY;
  for (int t : {0, 17, 45}) {
    const Frame l = r.render(0, t), rt = r.render(1, t);
    const auto res = interpolate_with_diagnostics(l, rt, cfg);
    const auto& flow = res.scales.back().flows.left_to_right;
    const PlaneF disp = r.disparity_map(0, t);
    std::vector<float> err;
    for (int y = kBorderBand; y < 360 - kBorderBand; ++y) {
      for (int x = kBorderBand; x < 640 - kBorderBand; ++x) {
        // A layer with disparity d sits d pixels further left in the right view.
        const float ex = flow.dx.at(x, y) + disp.at(x, y);
        const float ey = flow.dy.at(x, y);
        err.push_back(std::sqrt(ex * ex + ey * ey));
      }
    }
    const std::size_t inliers = static_cast<std::size_t>(
        std::count_if(err.begin(), err.end(), [](float e) { return e <= kFlowTolerancePx; }));
    std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
    worst_median = std::max(worst_median, static_cast<double>(err[err.size() / 2]));
    worst_fraction = std::min(worst_fraction, static_cast<double>(inliers) / static_cast<double>(err.size()));
    worst_psnr = std::min(worst_psnr, psnr(res.frame, r.render(0.5, t), kBorderBand));
  }
  const double s = seconds_since(t0);
  o.require(worst_median <= kFlowTolerancePx, fmt("median flow error %.3f px", worst_median));
  o.require(worst_fraction >= kFlowInlierFraction, fmt("only %.2f%% within %.1f px", 100 * worst_fraction, kFlowTolerancePx));
  o.require(worst_psnr >= kMidpointPsnrDb, fmt("midpoint PSNR %.2f dB", worst_psnr));
  o.require(s < kOracleSeconds, fmt("runtime %.1f s", s));
  o.note(fmt("640x360, 3 frames: median flow err %.3f px, %.2f%% <= %.1f px, midpoint PSNR %.2f dB", worst_median,
             100 * worst_fraction, kFlowTolerancePx, worst_psnr));
  return o;
}

// ---------------------------------------------------------------------------------------------

Block8 naive_dct(const Block8& in) {
  Block8 out{};
  for (int v = 0; v < 8; ++v) {
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          s += in[y * 8 + x] * std::cos((2 * x + 1) * u * M_PI / 16) * std::cos((2 * y + 1) * v * M_PI / 16);
        }
      }
      out[v * 8 + u] = (u == 0 ? std::sqrt(0.125) : 0.5) * (v == 0 ? std::sqrt(0.125) : 0.5) * s;
    }
  }
  return out;
}

double naive_ssim(const Plane& pa, const Plane& pb) {
  const auto g = ssim_window();
  const SsimParams p;
  const double c1 = std::pow(p.k1 * p.max_value, 2), c2 = std::pow(p.k2 * p.max_value, 2);
  double total = 0;
  int n = 0;
  for (int y = 0; y + SsimParams::kWindow <= pa.height; ++y) {
    for (int x = 0; x + SsimParams::kWindow <= pa.width; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int j = 0; j < SsimParams::kWindow; ++j) {
        for (int i = 0; i < SsimParams::kWindow; ++i) {
          const double w = g[i] * g[j], a = pa.at(x + i, y + j), b = pb.at(x + i, y + j);
          ma += w * a;
          mb += w * b;
          saa += w * a * a;
          sbb += w * b * b;
          sab += w * a * b;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++n;
    }
  }
  return total / n;
}

// Direct 2-D form: 5x5 binomial blur with replicated edges, decimation, and expansion by
// zero insertion (coarse index clamped) with gain 4.
std::array<double, kLapLevels> naive_lap_levels(const Plane& pa, const Plane& pb) {
  using G = std::vector<std::vector<double>>;
  const double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  auto from = [](const Plane& p) {
    G g(p.height, std::vector<double>(p.width));
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) g[y][x] = p.at(x, y);
    }
    return g;
  };
  auto reduce = [&](const G& g) {
    const int h = static_cast<int>(g.size()), w = static_cast<int>(g[0].size());
    G out(h / 2, std::vector<double>(w / 2));
    for (int y = 0; y < h / 2; ++y) {
      for (int x = 0; x < w / 2; ++x) {
        double s = 0;
        for (int j = -2; j <= 2; ++j) {
          for (int i = -2; i <= 2; ++i) {
            s += k[j + 2] * k[i + 2] * g[std::clamp(2 * y + j, 0, h - 1)][std::clamp(2 * x + i, 0, w - 1)];
          }
        }
        out[y][x] = s;
      }
    }
    return out;
  };
  auto expand = [&](const G& c, int w, int h) {
    const int ch = static_cast<int>(c.size()), cw = static_cast<int>(c[0].size());
    G out(h, std::vector<double>(w));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0;
        for (int j = -2; j <= 2; ++j) {
          for (int i = -2; i <= 2; ++i) {
            const int sy = y - j, sx = x - i;
            if ((sy & 1) || (sx & 1)) continue;
            s += k[j + 2] * k[i + 2] * c[std::clamp(sy >> 1, 0, ch - 1)][std::clamp(sx >> 1, 0, cw - 1)];
          }
        }
        out[y][x] = 4 * s;
      }
    }
    return out;
  };
  auto pyramid = [&](G g) {
    std::vector<G> levels;
    for (int l = 0; l < kLapLevels - 1; ++l) {
      G next = reduce(g);
      const G up = expand(next, static_cast<int>(g[0].size()), static_cast<int>(g.size()));
      for (std::size_t y = 0; y < g.size(); ++y) {
        for (std::size_t x = 0; x < g[y].size(); ++x) g[y][x] -= up[y][x];
      }
      levels.push_back(std::move(g));
      g = std::move(next);
    }
    levels.push_back(std::move(g));
    return levels;
  };
  const auto la = pyramid(from(pa)), lb = pyramid(from(pb));
  std::array<double, kLapLevels> out{};
  for (int l = 0; l < kLapLevels; ++l) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < la[l].size(); ++y) {
      for (std::size_t x = 0; x < la[l][y].size(); ++x, ++n) s += std::abs(la[l][y][x] - lb[l][y][x]);
    }
    out[l] = s / static_cast<double>(n);
  }
  return out;
}

double mirror_agreement(const SceneRenderer& r, int t) {
  const Frame l = r.render(0, t), rt = r.render(1, t);
  const Plane a = interpolate(l, rt).luma();
  const Plane b = mirror_horizontal(interpolate(mirror_horizontal(rt), mirror_horizontal(l))).luma();
  std::size_t close = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) close += std::abs(int(a.data[i]) - int(b.data[i])) <= kMirrorLevels;
  return static_cast<double>(close) / static_cast<double>(a.data.size());
}

Outcome identity_symmetry() {
  Outcome o;
  const auto scene = make_default_scene(21, 640, 360, 2);
  const SceneRenderer r(scene);
  const Frame f = r.render(0, 0);
  o.require(interpolate(f, f).same_pixels(f), "interpolate(I, I) != I at 640x360");
  const Frame g = render_view(make_default_scene(8, 96, 64, 2, PixelFormat::Gray8), 0.0, 0);
  o.require(interpolate(g, g).same_pixels(g), "interpolate(I, I) != I at 96x64 gray");

  double worst_mirror = 1.0;
  for (int t : {0, 3}) worst_mirror = std::min(worst_mirror, mirror_agreement(r, t));
  const SceneRenderer small(make_default_scene(21, 128, 96, 2, PixelFormat::Gray8));
  worst_mirror = std::min(worst_mirror, mirror_agreement(small, 3));
  o.require(worst_mirror >= kMirrorFraction, fmt("mirror agreement %.4f", worst_mirror));

  float lo = 1.0f, hi = 0.0f;
  const auto diag = interpolate_with_diagnostics(r.render(0, 5), r.render(1, 5));
  for (const auto& s : diag.scales) {
    for (float w : s.mask.weight.data) {
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
  }
  o.require(lo >= 0.0f && hi <= 1.0f, fmt("mask range [%g, %g]", lo, hi));

  const auto w = lap_weights();
  o.require(w == std::array<double, kLapLevels>{1, 2, 4, 8, 16}, "pyramid weights are not {1,2,4,8,16}");

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-128.0, 127.0);
  double dct_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Block8 b{};
    for (auto& v : b) v = u(rng);
    const Block8 fast = dct8_forward(b), ref = naive_dct(b);
    for (int i = 0; i < 64; ++i) dct_err = std::max(dct_err, std::abs(fast[i] - ref[i]));
  }
  o.require(dct_err <= kOracleEps, fmt("DCT differs from the direct sum by %g", dct_err));

  const Plane pa = r.render(0, 0).luma(), pb = r.render(0.25, 0).luma();
  const Plane ca = crop(Frame::from_components(PixelFormat::Gray8, {pa}), 100, 50, 96, 64).luma();
  const Plane cb = crop(Frame::from_components(PixelFormat::Gray8, {pb}), 100, 50, 96, 64).luma();
  const double ssim_err = std::abs(ssim(ca, cb, 0) - naive_ssim(ca, cb));
  o.require(ssim_err <= kOracleEps, fmt("SSIM differs from the naive windowed form by %g", ssim_err));

  const auto fast_lap = lap_level_differences(ca, cb);
  const auto ref_lap = naive_lap_levels(ca, cb);
  double lap_err = 0.0;
  for (int l = 0; l < kLapLevels; ++l) lap_err = std::max(lap_err, std::abs(fast_lap[l] - ref_lap[l]));
  o.require(lap_err <= kOracleEps, fmt("pyramid differs from the naive form by %g", lap_err));

  o.note(fmt("identity exact, mirror %.4f, mask in [%.3f, %.3f], oracle errors dct %.1e ssim %.1e pyramid %.1e",
             worst_mirror, lo, hi, dct_err, ssim_err, lap_err));
  return o;
}

// ---------------------------------------------------------------------------------------------

Outcome codec_suite() {
  Outcome o;
  const auto scene = make_default_scene(42, 640, 360, 4);
  const SceneRenderer r(scene);
  std::vector<Frame> seq;
  for (int t = 0; t < 6; ++t) seq.push_back(r.render(1, t));

  // q = 100 round trip, I and P records.
  {
    TileEncoder enc({640, 360, PixelFormat::YUV420, 3, 100, 30});
    TileDecoder dec;
    bool exact = true;
    for (const auto& f : seq) exact = exact && dec.decode(enc.encode(f).record).same_pixels(f);
    o.require(exact, "q=100 is not lossless");
  }

  // Tiles decoded from their own slices equal the same region of the fully decoded cluster.
  {
    const ViewIndexModel m(4, 2);
    const auto layouts = build_layouts(m, 2);
    const auto& l = layouts[1];
    const auto geo = cluster_geometry(l, 160, 96);
    std::vector<TileEncoder> enc;
    for (const auto& t : geo.tiles) enc.emplace_back(TileStreamHeader{t.width, t.height, PixelFormat::YUV420, 3, 60, 30});
    const SceneRenderer small(make_default_scene(42, 160, 96, 4));
    std::vector<ClusterRecord> frames;
    for (int t = 0; t < 6; ++t) {
      std::vector<Frame> cams;
      for (int c = 0; c < 4; ++c) cams.push_back(small.render(c, t));
      const auto views = synthesize_views(cams, m, {}, nullptr);
      const auto cf = organize_clusters(views, {l}).front();
      ClusterRecord rec;
      for (std::size_t k = 0; k < geo.tiles.size(); ++k) {
        const auto& g = geo.tiles[k];
        std::vector<std::uint8_t> bytes;
        append_record(bytes, enc[k].encode(crop(cf.stitched, g.x, g.y, g.width, g.height)).record);
        rec.tiles.push_back(std::move(bytes));
      }
      frames.push_back(std::move(rec));
    }
    const auto seg = demux_segment(mux_segment(frames, {30, 0}));
    std::vector<TileDecoder> all(geo.tiles.size());
    std::vector<Frame> full;
    for (const auto& f : seg.frames) {
      std::vector<Frame> tiles;
      for (std::size_t k = 0; k < geo.tiles.size(); ++k) {
        std::size_t off = 0;
        tiles.push_back(all[k].decode(read_record(f.tile(k), off)));
      }
      full.push_back(stitch_tiles(tiles, l, 160, 96));
    }
    bool independent = true;
    for (int k = 0; k < l.tile_count(); ++k) {
      TileDecoder alone;
      const auto view = extract_view(seg, l.indices[k], l);
      const auto& g = geo.tiles[k];
      for (std::size_t i = 0; i < view.records.size(); ++i) {
        std::size_t off = 0;
        const Frame mine = alone.decode(read_record(view.records[i], off));
        independent = independent && mine.same_pixels(crop(full[i], g.x, g.y, g.width, g.height));
      }
    }
    o.require(independent, "tile decoded from its slice differs from the crop of the full decode");
  }

  // Starting at any GOP boundary reproduces the full-stream decode.
  {
    TileEncoder enc({640, 360, PixelFormat::YUV420, 2, 50, 30});
    std::vector<FrameRecord> recs;
    for (const auto& f : seq) recs.push_back(enc.encode(f).record);
    TileDecoder full;
    std::vector<Frame> ref;
    for (const auto& rec : recs) ref.push_back(full.decode(rec));
    bool same = true;
    for (std::size_t start = 2; start < recs.size(); start += 2) {
      TileDecoder d;
      for (std::size_t i = start; i < recs.size(); ++i) same = same && d.decode(recs[i]).same_pixels(ref[i]);
    }
    o.require(same, "GOP seek differs from the full decode");
  }

  // Rate falls and PSNR does not rise as q goes 100 -> 25.
  std::string curve;
  {
    std::size_t prev_bytes = SIZE_MAX;
    double prev_psnr = INFINITY;
    bool monotone = true;
    for (int q : {100, 75, 50, 25}) {
      TileEncoder enc({640, 360, PixelFormat::YUV420, 3, q, 30});
      TileDecoder dec;
      std::size_t bytes = 0;
      double sum_mse = 0.0;
      for (const auto& f : seq) {
        const auto e = enc.encode(f);
        bytes += e.record.payload.size();
        const double p = psnr(dec.decode(e.record), f);
        sum_mse += std::isinf(p) ? 0.0 : std::pow(10.0, -p / 10.0);
      }
      const double p = sum_mse == 0.0 ? INFINITY : -10.0 * std::log10(sum_mse / static_cast<double>(seq.size()));
      monotone = monotone && bytes < prev_bytes && p <= prev_psnr;
      curve += fmt("%sq%d %zuB/%.1fdB", curve.empty() ? "" : ", ", q, bytes, p);
      prev_bytes = bytes;
      prev_psnr = p;
    }
    o.require(monotone, "rate-quality not monotone: " + curve);
  }
  o.note("lossless, tile-independent, GOP-seek equal; " + curve);
  return o;
}

// ---------------------------------------------------------------------------------------------

TsErrorKind demux_kind(const std::vector<std::uint8_t>& body, std::size_t* packet) {
  try {
    demux_segment(body);
  } catch (const TsError& e) {
    if (packet) *packet = e.packet_index();
    return e.kind();
  }
  return static_cast<TsErrorKind>(-1);
}

Outcome wire_conformance() {
  Outcome o;
  // Every segment a real pipeline run produces.
  const auto scene = make_default_scene(11, 160, 96, 4);
  std::vector<std::vector<Frame>> ticks;
  for (int t = 0; t < 40; ++t) {
    std::vector<Frame> cams;
    for (int c = 0; c < 4; ++c) cams.push_back(render_view(scene, c, t));
    ticks.push_back(std::move(cams));
  }
  PipelineConfig cfg;
  cfg.live = false;
  cfg.stages = 2;
  cfg.views_per_side = 2;
  cfg.fps = 30;
  cfg.segment_duration = 1.0 / 3.0;
  cfg.gop = 5;
  cfg.playlist_window = 6;
  Pipeline p(cfg, memory_source(ticks, 30));
  p.start();
  p.wait();
  std::size_t segments = 0, bad = 0;
  bool pts_exact = true;
  for (int c = 0; c < static_cast<int>(p.layouts().size()); ++c) {
    const auto text = *p.store().playlist(c);
    const Playlist pl = parse_m3u8(text);
    o.require(render_m3u8(pl) == text, "playlist text does not survive parse/render");
    for (std::size_t i = 0; i < pl.entries.size(); ++i) {
      const auto seq = entry_sequence(pl, i);
      const auto got = p.store().segment(c, seq);
      if (got.status != SegmentStore::Status::Ok) {
        ++bad;
        continue;
      }
      ++segments;
      try {
        if (got.body->size() % ts::kPacketSize != 0) throw std::runtime_error("unaligned");
        const auto seg = demux_segment(*got.body);
        for (std::size_t f = 0; f < seg.frames.size(); ++f) {
          const std::uint64_t frame = seq * 10 + f;
          pts_exact = pts_exact && seg.frames[f].pts == frame * 90000 / 30;
        }
      } catch (const std::exception&) {
        ++bad;
      }
    }
  }
  o.require(bad == 0, fmt("%zu produced segments failed validation", bad));
  o.require(pts_exact, "segment PTS are not frame * 90000 / fps");

  // Tile byte ranges through mux and demux.
  std::vector<ClusterRecord> frames(4);
  for (auto& f : frames) {
    for (int k = 0; k < 5; ++k) {
      std::vector<std::uint8_t> rec;
      append_record(rec, encode_frame(render_view(scene, 1.0, k), nullptr, 75).record);
      f.tiles.push_back(std::move(rec));
    }
  }
  const auto body = mux_segment(frames, {30, 123456});
  const auto seg = demux_segment(body);
  bool ranges = seg.frames.size() == frames.size();
  for (std::size_t i = 0; ranges && i < frames.size(); ++i) {
    ranges = seg.frames[i].pts == 123456 + i * 3000;
    for (std::size_t k = 0; ranges && k < 5; ++k) {
      const auto t = seg.frames[i].tile(k);
      ranges = std::equal(t.begin(), t.end(), frames[i].tiles[k].begin(), frames[i].tiles[k].end());
    }
  }
  o.require(ranges, "demux(mux(x)) does not restore tile bytes and PTS");

  // Live window.
  LivePlaylist live(2.0, 6);
  for (std::uint64_t s = 0; s < 8; ++s) live.rotate(s, 2.0);
  const auto text = live.render();
  const Playlist pl = parse_m3u8(text);
  std::vector<std::string> uris;
  for (const auto& e : pl.entries) uris.push_back(e.uri);
  const std::vector<std::string> want{"seg00002.ts", "seg00003.ts", "seg00004.ts",
                                      "seg00005.ts", "seg00006.ts", "seg00007.ts"};
  o.require(pl.media_sequence == 2 && uris == want, "8 rotations did not give MEDIA-SEQUENCE 2, seg00002..seg00007");
  o.require(text.find("#EXT-X-MEDIA-SEQUENCE:2\n") != std::string::npos, "MEDIA-SEQUENCE tag text");
  o.require(pl == live.model() && render_m3u8(pl) == text, "parser does not round-trip packager output");

  // Fault injection.
  auto flipped = body;
  flipped[2 * ts::kPacketSize] = 0x46;
  std::size_t at = 0;
  o.require(demux_kind(flipped, &at) == TsErrorKind::SyncLoss && at == 2, "flipped sync byte not reported as SyncLoss at packet 2");
  auto dropped = body;
  dropped.erase(dropped.begin() + 3 * ts::kPacketSize, dropped.begin() + 4 * ts::kPacketSize);
  at = 0;
  o.require(demux_kind(dropped, &at) == TsErrorKind::ContinuityGap && at == 3,
            "dropped packet not reported as ContinuityGap at packet 3");
  o.note(fmt("%zu pipeline segments valid, PTS exact, window ok, SyncLoss and ContinuityGap raised", segments));
  return o;
}

// ---------------------------------------------------------------------------------------------

Outcome end_to_end(const std::string& cli, const fs::path& work) {
  Outcome o;
  const auto t0 = Clock::now();
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path scene_dir = work / "scene", dump = work / "dump";
  const int fps = 30, frames = 150;
  const std::string sim = cli + " sim --out " + scene_dir.string() + " --seed 42 --cameras 4 --width 640 --height 360" +
                          " --frames " + std::to_string(frames) + " --fps 30 > " + (work / "sim.log").string() + " 2>&1";
  if (std::system(sim.c_str()) != 0) {
    o.require(false, "fvv sim failed");
    return o;
  }
  {
    std::ofstream traj(work / "trajectory.txt");
    traj << "# anchor, sweep inside cluster 1, leave it, then cluster 2\n"
         << "0 4\n20 5\n35 6\n50 7\n80 8\n100 9\n120 8\n";
  }
  const std::string serve = cli + " serve --input " + scene_dir.string() +
                            " --stages 2 --views-per-side 2 --fps 30 --segment-duration 0.5 --gop 1 --quality 100" +
                            " --window 6 --port 0 --exit-when-done --linger 2 2> " + (work / "serve.err").string();
  FILE* server = popen(serve.c_str(), "r");
  if (!server) {
    o.require(false, "cannot start fvv serve");
    return o;
  }
  char line[256] = {0};
  std::string url;
  if (std::fgets(line, sizeof(line), server)) {
    const std::string s(line);
    const auto a = s.find("http://");
    const auto b = s.find(' ', a);
    if (a != std::string::npos) url = s.substr(a, b - a);
  }
  if (url.empty()) {
    pclose(server);
    o.require(false, "fvv serve did not report a URL");
    return o;
  }
  const std::string client = cli + " client --url " + url + " --view 4 --trajectory " +
                             (work / "trajectory.txt").string() + " --dump " + dump.string() + " --no-realtime > " +
                             (work / "client.log").string() + " 2>&1";
  const int client_rc = std::system(client.c_str());
  while (std::fgets(line, sizeof(line), server)) {
  }
  const int serve_rc = pclose(server);
  const double elapsed = seconds_since(t0);
  o.require(client_rc == 0, "fvv client exited with an error");
  o.require(serve_rc == 0, "fvv serve exited with an error");

  std::vector<DisplayRecord> tr;
  {
    std::ifstream in(dump / "transcript.jsonl");
    for (std::string l; std::getline(in, l);) {
      if (!l.empty()) tr.push_back(DisplayRecord::from_json(nlohmann::json::parse(l)));
    }
  }
  std::set<std::uint64_t> segs;
  for (const auto& r : tr) segs.insert(r.segment);
  o.require(tr.size() == static_cast<std::size_t>(frames), fmt("%zu frames displayed", tr.size()));
  o.require(segs.size() == 10 && *segs.begin() == 0, fmt("%zu segments played", segs.size()));

  // (a) anchors are bit-exact against the capture.
  const auto cap = read_manifest(scene_dir);
  std::size_t anchors = 0, anchor_mismatch = 0;
  for (const auto& r : tr) {
    if (r.tier != Tier::Full) continue;
    ++anchors;
    char name[32];
    std::snprintf(name, sizeof(name), "display%06lld.raw", static_cast<long long>(r.display));
    const Frame shown = read_raw_frame((dump / name).string(), 640, 360, PixelFormat::YUV420);
    const int tick = static_cast<int>(r.pts * fps / 90000);
    if (!shown.same_pixels(load_captured_frame(scene_dir, cap.scene, r.view / 4, tick))) ++anchor_mismatch;
  }
  o.require(anchors > 0 && anchor_mismatch == 0, fmt("%zu of %zu anchor frames differ", anchor_mismatch, anchors));

  // (b) one download per segment; none extra while sweeping inside the cluster.
  bool downloads_ok = true;
  for (const auto& r : tr) downloads_ok = downloads_ok && r.segment_downloads == r.segment + 1;
  o.require(downloads_ok, "segment downloads exceed one per played segment");

  // (c) pinned transcript around the cluster exit.
  struct Expect {
    int from, to, requested, view, cluster;
    bool clamped;
  };
  const std::vector<Expect> pinned{{0, 20, 4, 4, 1, false},  {20, 35, 5, 5, 1, false}, {35, 50, 6, 6, 1, false},
                                   {50, 60, 7, 6, 1, true},  {60, 80, 7, 7, 2, false}, {80, 100, 8, 8, 2, false},
                                   {100, 120, 9, 9, 2, false}, {120, 150, 8, 8, 2, false}};
  std::string mismatch;
  for (const auto& e : pinned) {
    for (int d = e.from; d < e.to && d < static_cast<int>(tr.size()); ++d) {
      const auto& r = tr[d];
      if (r.display != d || r.requested != e.requested || r.view != e.view || r.cluster != e.cluster ||
          r.clamped != e.clamped) {
        if (mismatch.empty()) {
          mismatch = fmt("display %d: requested %d view %d cluster %d clamped %d", d, r.requested, r.view, r.cluster,
                         int(r.clamped));
        }
      }
    }
  }
  o.require(mismatch.empty(), "transcript off the pinned path at " + mismatch);

  // (d) one tile per displayed frame.
  bool one_tile = !tr.empty();
  for (const auto& r : tr) one_tile = one_tile && r.tiles_decoded == 1 && r.records_decoded == 1;
  o.require(one_tile, "more than one tile decoded for a displayed frame");

  o.require(elapsed < kE2eSeconds, fmt("runtime %.0f s", elapsed));
  o.note(fmt("%zu frames over %zu segments, %zu anchors bit-exact, clamp 50..59 then cluster 2 at 60, %.0f s", tr.size(),
             segs.size(), anchors, elapsed));
  return o;
}

// ---------------------------------------------------------------------------------------------

std::vector<std::vector<Frame>> synthetic_ticks(int cams, int w, int h, int distinct) {
  const auto scene = make_default_scene(42, w, h, cams);
  const SceneRenderer r(scene);
  std::vector<std::vector<Frame>> ticks;
  for (int t = 0; t < distinct; ++t) {
    std::vector<Frame> row;
    for (int c = 0; c < cams; ++c) row.push_back(r.render(c, t).with_timestamp(t));
    ticks.push_back(std::move(row));
  }
  return ticks;
}

StageLatencyReport loaded_run(const std::vector<std::vector<Frame>>& ticks, int clients, std::uint64_t* fetched) {
  PipelineConfig cfg;
  cfg.live = true;
  cfg.stages = 2;
  cfg.views_per_side = 2;
  // Paced below what one core sustains so the viewers have idle time to run in.
  cfg.fps = kLoadFps;
  cfg.segment_duration = 1.0;
  cfg.gop = kLoadFps;
  cfg.quality = 75;
  cfg.max_frames = 15 * kLoadFps;
  Pipeline p(cfg, memory_source(ticks, cfg.fps, true));
  EdgeHttpServer http(p);
  const int port = http.start("127.0.0.1", 0);
  std::atomic<bool> done{false};
  std::atomic<std::uint64_t> bytes{0};
  std::vector<std::thread> load;
  for (int i = 0; i < clients; ++i) {
    // Each synthetic viewer polls its cluster's playlist and downloads every new segment once.
    load.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port);
      const std::string base = "/cluster/" + std::to_string(i % 4) + "/";
      std::uint64_t next = 0;
      while (!done) {
        if (auto pl = c.Get(base + "playlist.m3u8"); pl && pl->status == 200) {
          const Playlist parsed = parse_m3u8(pl->body);
          for (std::size_t k = 0; k < parsed.entries.size(); ++k) {
            const auto seq = entry_sequence(parsed, k);
            if (seq < next) continue;
            if (auto seg = c.Get(base + parsed.entries[k].uri); seg && seg->status == 200) bytes += seg->body.size();
            next = seq + 1;
          }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
      }
    });
  }
  p.start();
  p.wait();
  done = true;
  for (auto& t : load) t.join();
  http.stop();
  if (fetched) *fetched = bytes;
  return p.latency().report();
}

Outcome load_decoupling() {
  Outcome o;
  const auto ticks = synthetic_ticks(4, 160, 96, 30);
  loaded_run(ticks, 0, nullptr);  // warm caches and allocator
  std::uint64_t fetched = 0;
  // Interleaved repeats; each stage is compared on its median run average.
  std::vector<StageLatencyReport> idle_runs, busy_runs;
  for (int r = 0; r < kLoadRepeats; ++r) {
    idle_runs.push_back(loaded_run(ticks, 0, nullptr));
    std::uint64_t f = 0;
    busy_runs.push_back(loaded_run(ticks, 8, &f));
    fetched += f;
  }
  o.require(fetched > 0, "synthetic clients fetched nothing");
  auto median = [](const std::vector<StageLatencyReport>& runs, const char* name, bool cpu) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(cpu ? r.stage(name).cpu_avg_ms : r.stage(name).avg_ms);
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  std::string table;
  for (const char* name : {kStageInterp, kStageStitch, kStageSchedule, kStageEncode}) {
    const double a = median(idle_runs, name, false), b = median(busy_runs, name, false);
    const double ca = std::max(median(idle_runs, name, true), 1e-9), cb = median(busy_runs, name, true);
    const double wall = std::abs(b - a) / a;
    table += fmt("%s%s %.3f/%.3f ms (%+.0f%%, cpu %+.0f%%)", table.empty() ? "" : ", ", name, a, b, 100 * (b - a) / a,
                 100 * (cb - ca) / ca);
    o.require(wall < kLoadNoiseBound, fmt("%s wall latency moved %.0f%% under 8 clients", name, 100 * wall));
  }

  const auto t0 = Clock::now();
  PipelineConfig cfg;
  cfg.stages = 2;
  cfg.views_per_side = 2;
  cfg.fps = 30;
  cfg.segment_duration = 1.0;
  cfg.gop = 30;
  cfg.quality = 75;
  const auto report = bench(cfg, memory_source(ticks, 30, true), kBenchIterations);
  const double bench_s = seconds_since(t0);
  bool shape = report.iterations == kBenchIterations && report.stages.size() == 4;
  for (const char* name : {kStageInterp, kStageStitch, kStageSchedule, kStageEncode}) {
    const auto& s = report.stage(name);
    shape = shape && s.count == kBenchIterations && s.min_ms <= s.avg_ms && s.avg_ms <= s.max_ms;
  }
  o.require(shape, "bench report is not four stages x min/avg/max over 1000 iterations");
  std::printf("%s", report.table().c_str());
  o.note("0 vs 8 clients: " + table + fmt("; bench %zu iterations in %.0f s", report.iterations, bench_s));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string cli = FVV_CLI_PATH;
  std::string work = (fs::temp_directory_path() / "fvv_acceptance").string();
  std::vector<std::string> only;
  app.add_option("--fvv", cli, "Path of the fvv binary")->capture_default_str();
  app.add_option("--work", work, "Scratch directory")->capture_default_str();
  app.add_option("--only", only, "Run just these checks");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"combinatorics", combinatorics},
      {"interpolation-oracle", interpolation_oracle},
      {"identity-symmetry", identity_symmetry},
      {"codec", codec_suite},
      {"wire-conformance", wire_conformance},
      {"end-to-end", [&] { return end_to_end(cli, fs::path(work) / "e2e"); }},
      {"load-decoupling", load_decoupling},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("%s [PRIMARY] %-20s %6.1fs  %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
