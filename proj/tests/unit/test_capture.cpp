#include <filesystem>

#include "doctest.h"
#include "fvv/capture_sim.hpp"

using namespace fvv;

TEST_SUITE("capture-sim") {
  TEST_CASE("rendering is deterministic in the seed") {
    const auto a = render_view(make_default_scene(42, 64, 48, 3), 0.5, 4);
    const auto b = render_view(make_default_scene(42, 64, 48, 3), 0.5, 4);
    const auto c = render_view(make_default_scene(43, 64, 48, 3), 0.5, 4);
    CHECK(a.same_pixels(b));
    CHECK_FALSE(a.same_pixels(c));
  }

  TEST_CASE("background shifts by its disparity between cameras") {
    auto scene = make_default_scene(7, 96, 64, 2, PixelFormat::Gray8);
    scene.sprites.clear();
    const SceneRenderer r(scene);
    const Plane l = r.render(0, 0).luma();
    const Plane rt = r.render(1, 0).luma();
    const double d = scene.layer_disparity(scene.background_depth);
    REQUIRE(d == doctest::Approx(2.0));
    int same = 0, total = 0;
    for (int y = 4; y < 60; ++y) {
      for (int x = 8; x < 88; ++x) {
        ++total;
        // A layer at positive disparity moves left as the camera moves right.
        same += std::abs(int(rt.at(x, y)) - int(l.at(x + 2, y))) <= 1;
      }
    }
    CHECK(same > total * 95 / 100);
  }

  TEST_CASE("capture writes raw planes and a manifest that reloads") {
    const auto dir = std::filesystem::temp_directory_path() / "fvv_capture_test";
    std::filesystem::remove_all(dir);
    const auto scene = make_default_scene(5, 32, 24, 3);
    capture_sequence(scene, 2, dir);
    const auto cap = read_manifest(dir);
    CHECK(cap.frame_count == 2);
    CHECK(cap.scene.rig.camera_count == 3);
    CHECK(cap.scene.sprites.size() == scene.sprites.size());
    CHECK(std::filesystem::file_size(captured_frame_path(dir, 2, 1)) == 32u * 24u * 3u / 2u);
    const Frame f = load_captured_frame(dir, cap.scene, 2, 1);
    CHECK(f.same_pixels(render_view(scene, 2.0, 1)));
    CHECK_THROWS_AS(load_captured_frame(dir, cap.scene, 0, 5), IoError);
    CHECK_THROWS_AS(read_manifest(dir / "missing"), IoError);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("position outside the rig is rejected") {
    const SceneRenderer r(make_default_scene(1, 32, 32, 3));
    CHECK_THROWS_AS(r.render(2.5, 0), RangeError);
    CHECK_THROWS_AS(r.render(-0.1, 0), RangeError);
  }

  TEST_CASE("validity mask excludes the frame border band") {
    const SceneRenderer r(make_default_scene(1, 64, 48, 3));
    const Plane m = r.validity_mask(0.5, 0, 8);
    CHECK(m.at(3, 20) == 0);
    CHECK(m.at(60, 20) == 0);
  }
}
