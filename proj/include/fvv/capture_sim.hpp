#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "fvv/frame.hpp"
#include "fvv/view_index.hpp"

namespace fvv {

// Seeded procedural texture: multi-octave value noise plus random rectangles.
struct TextureSpec {
  std::uint64_t seed = 1;
  double cell = 16.0;      // coarsest lattice spacing in pixels
  double contrast = 1.0;   // luma excursion scale
  int shapes = 12;         // geometric patches
};

struct MotionPath {
  double x0 = 0.0;
  double y0 = 0.0;
  double amp_x = 0.0;
  double amp_y = 0.0;
  double period_frames = 90.0;
  double phase = 0.0;

  // Top-left corner of the sprite in layer coordinates at frame t.
  double x(int t) const;
  double y(int t) const;
};

struct SpriteSpec {
  TextureSpec texture;
  double depth = 4.0;
  int width = 96;
  int height = 96;
  MotionPath path;
};

// Planar-parallax scene: every layer shifts horizontally by position * gain * baseline / depth.
struct SyntheticScene {
  std::uint64_t seed = 42;
  int width = 640;
  int height = 360;
  PixelFormat format = PixelFormat::YUV420;
  int fps = 30;
  CameraRig rig;
  double baseline = 1.0;
  double disparity_gain = 24.0;
  double background_depth = 12.0;
  TextureSpec background;
  std::vector<SpriteSpec> sprites;

  // Horizontal shift in pixels between adjacent cameras for a layer at `depth`.
  double layer_disparity(double depth) const { return disparity_gain * baseline / depth; }
  double max_disparity() const;
};

SyntheticScene make_default_scene(std::uint64_t seed, int width = 640, int height = 360, int camera_count = 12,
                                  PixelFormat format = PixelFormat::YUV420, int fps = 30);

// Holds the rasterized layer textures so repeated renders are cheap.
class SceneRenderer {
 public:
  explicit SceneRenderer(SyntheticScene scene);
  ~SceneRenderer();
  SceneRenderer(SceneRenderer&&) noexcept;
  SceneRenderer& operator=(SceneRenderer&&) noexcept;

  const SyntheticScene& scene() const noexcept { return scene_; }

  // position is continuous in [0, camera_count - 1].
  Frame render(double position, int frame_index) const;

  // Per-pixel inter-camera disparity of the visible layer (pixels per camera step).
  PlaneF disparity_map(double position, int frame_index) const;

  // 1 where a pixel is at least `band` pixels away from the frame edge and from every sprite
  // silhouette edge at this position, else 0.
  Plane validity_mask(double position, int frame_index, int band) const;

 private:
  struct Layers;
  void check_position(double position) const;
  SyntheticScene scene_;
  std::unique_ptr<Layers> layers_;
};

Frame render_view(const SyntheticScene& scene, double position, int frame_index);

// Writes scene/cam<CC>/frame<NNNNNN>.raw plus scene/manifest.json.
void capture_sequence(const SyntheticScene& scene, int frame_count, const std::filesystem::path& dir);

struct CapturedScene {
  SyntheticScene scene;
  int frame_count = 0;
};

CapturedScene read_manifest(const std::filesystem::path& dir);
void write_manifest(const SyntheticScene& scene, int frame_count, const std::filesystem::path& dir);
Frame load_captured_frame(const std::filesystem::path& dir, const SyntheticScene& scene, int camera, int frame_index);
std::filesystem::path captured_frame_path(const std::filesystem::path& dir, int camera, int frame_index);

}  // namespace fvv
