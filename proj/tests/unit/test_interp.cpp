#include <cmath>

#include "doctest.h"
#include "fvv/capture_sim.hpp"
#include "fvv/interp.hpp"
#include "fvv/metrics.hpp"
#include "helpers.hpp"

using namespace fvv;

TEST_SUITE("view-interp") {
  TEST_CASE("interpolating a frame with itself returns it exactly") {
    const Frame f = render_view(make_default_scene(3, 96, 64, 2), 0.0, 0);
    CHECK(interpolate(f, f).same_pixels(f));
    const Frame g = testutil::noise_frame(40, 24, PixelFormat::Gray8, 8);
    CHECK(interpolate(g, g).same_pixels(g));
  }

  TEST_CASE("dense_views count is 2^n - 1") {
    const Frame a = render_view(make_default_scene(3, 32, 32, 2, PixelFormat::Gray8), 0.0, 0);
    const Frame b = render_view(make_default_scene(3, 32, 32, 2, PixelFormat::Gray8), 1.0, 0);
    for (int n = 1; n <= 4; ++n) CHECK(dense_views(a, b, n).size() == static_cast<std::size_t>((1 << n) - 1));
    CHECK_THROWS_AS(dense_views(a, b, 0), ConfigError);
    CHECK_THROWS_AS(dense_views(a, b, kMaxDenseStages + 1), ConfigError);
  }

  TEST_CASE("mask weights stay in [0, 1] and constant flow is recovered") {
    auto scene = make_default_scene(11, 128, 96, 2, PixelFormat::Gray8);
    scene.sprites.clear();
    const SceneRenderer r(scene);
    const auto res = interpolate_with_diagnostics(r.render(0, 0), r.render(1, 0));
    REQUIRE(res.scales.size() == InterpConfig::kScales);
    for (const auto& s : res.scales) {
      for (float w : s.mask.weight.data) {
        CHECK(w >= 0.0f);
        CHECK(w <= 1.0f);
      }
    }
    const auto& f = res.scales.back().flows.left_to_right;
    const double d = scene.layer_disparity(scene.background_depth);
    int good = 0, total = 0;
    for (int y = 16; y < 80; ++y) {
      for (int x = 16; x < 112; ++x) {
        ++total;
        good += std::abs(f.dx.at(x, y) + d) <= 0.5 && std::abs(f.dy.at(x, y)) <= 0.5;
      }
    }
    CHECK(good > total * 95 / 100);
  }

  TEST_CASE("mirrored inputs give the mirrored midpoint within one level") {
    const auto scene = make_default_scene(21, 128, 96, 2, PixelFormat::Gray8);
    const SceneRenderer r(scene);
    const Frame l = r.render(0, 3), rt = r.render(1, 3);
    const Plane a = interpolate(l, rt).luma();
    const Plane b = mirror_horizontal(interpolate(mirror_horizontal(rt), mirror_horizontal(l))).luma();
    std::size_t close = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) close += std::abs(int(a.data[i]) - int(b.data[i])) <= 1;
    CHECK(static_cast<double>(close) >= 0.99 * static_cast<double>(a.data.size()));
  }

  TEST_CASE("midpoint beats either input against ground truth") {
    const auto scene = make_default_scene(42, 160, 96, 2);
    const SceneRenderer r(scene);
    const Frame mid = interpolate(r.render(0, 0), r.render(1, 0));
    const Frame truth = r.render(0.5, 0);
    const double p = psnr(mid, truth, 8);
    CHECK(p > psnr(r.render(0, 0), truth, 8) + 6.0);
    CHECK(p >= 32.0);
  }

  TEST_CASE("refine hook receives the blend") {
    InterpConfig cfg;
    int calls = 0;
    cfg.refine = [&](const Frame& blended, const Frame&, const Frame&) {
      ++calls;
      return blended;
    };
    const Frame f = testutil::smooth_frame(32, 32, PixelFormat::Gray8);
    interpolate(f, f, cfg);
    CHECK(calls == 1);
  }

  TEST_CASE("mismatched inputs are rejected") {
    const Frame a = testutil::smooth_frame(32, 32, PixelFormat::Gray8);
    const Frame b = testutil::smooth_frame(32, 24, PixelFormat::Gray8);
    CHECK_THROWS_AS(interpolate(a, b), ShapeError);
  }

  TEST_CASE("backward warp by a constant integer flow is a shift") {
    PlaneF img(16, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 16; ++x) img.at(x, y) = static_cast<float>(x * 10 + y);
    }
    const PlaneF w = backward_warp(img, FlowField::constant(16, 8, 2.0f, 1.0f));
    CHECK(w.at(3, 2) == doctest::Approx(img.at(5, 3)));
    CHECK(w.at(15, 7) == doctest::Approx(img.at(15, 7)));
  }
}

TEST_SUITE("quality-metrics") {
  TEST_CASE("psnr of identical frames is infinite") {
    const Frame f = testutil::smooth_frame(32, 32, PixelFormat::YUV420);
    CHECK(std::isinf(psnr(f, f)));
  }

  TEST_CASE("psnr matches the closed form for a constant offset") {
    const Frame a = Frame::filled(32, 32, PixelFormat::Gray8, 100);
    const Frame b = Frame::filled(32, 32, PixelFormat::Gray8, 110);
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(255.0 * 255.0 / 100.0)));
  }

  TEST_CASE("ssim matches a naive windowed implementation") {
    const Frame fa = testutil::noise_frame(40, 32, PixelFormat::Gray8, 1);
    Plane pb = fa.luma();
    for (std::size_t i = 0; i < pb.data.size(); i += 3) pb.data[i] = static_cast<std::uint8_t>(pb.data[i] / 2);
    const Plane pa = fa.luma();
    const auto g = ssim_window();
    const SsimParams p;
    const double c1 = std::pow(p.k1 * 255, 2), c2 = std::pow(p.k2 * 255, 2);
    double total = 0;
    int n = 0;
    for (int y = 0; y + 11 <= 32; ++y) {
      for (int x = 0; x + 11 <= 40; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int j = 0; j < 11; ++j) {
          for (int i = 0; i < 11; ++i) {
            const double w = g[i] * g[j];
            const double a = pa.at(x + i, y + j), b = pb.at(x + i, y + j);
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
    CHECK(ssim(pa, pb, 0) == doctest::Approx(total / n).epsilon(1e-9));
    CHECK(ssim(pa, pa, 0) == doctest::Approx(1.0));
  }

  TEST_CASE("laplacian weights double per level") {
    const auto w = lap_weights();
    CHECK(w[0] == 1.0);
    CHECK(w[1] == 2.0);
    CHECK(w[2] == 4.0);
    CHECK(w[3] == 8.0);
    CHECK(w[4] == 16.0);
  }

  TEST_CASE("lap distance is zero for equal frames and needs sides divisible by 16") {
    const Frame f = testutil::smooth_frame(64, 48, PixelFormat::Gray8);
    CHECK(lap_distance(f, f) == 0.0);
    const Frame g = testutil::smooth_frame(64, 40, PixelFormat::Gray8);
    CHECK_THROWS_AS(lap_distance(g, g), ShapeError);
  }

  TEST_CASE("a constant offset lands only in the coarsest level") {
    Plane pa(64, 64, 0), pb(64, 64, 0);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        pa.at(x, y) = static_cast<std::uint8_t>(60 + (x * y) % 50);
        pb.at(x, y) = static_cast<std::uint8_t>(pa.at(x, y) + 10);
      }
    }
    const auto d = lap_level_differences(pa, pb);
    for (int i = 0; i < kLapLevels - 1; ++i) CHECK(d[i] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(d[kLapLevels - 1] == doctest::Approx(10.0));
    CHECK(lap_distance(pa, pb) == doctest::Approx(160.0));
  }

  TEST_CASE("evaluate crops to a pyramid-friendly region") {
    const auto scene = make_default_scene(42, 96, 72, 2);
    const Frame a = render_view(scene, 0.0, 0), b = render_view(scene, 0.25, 0);
    const auto r = evaluate(a, b, 8);
    CHECK(r.lap_distance > 0.0);
    CHECK(r.ssim < 1.0);
    CHECK(r.excluded_border == 8);
  }
}
