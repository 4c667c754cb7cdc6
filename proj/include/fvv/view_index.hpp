#pragma once

#include <cstdint>

namespace fvv {

struct CameraRig {
  int camera_count = 12;
  double angular_step_deg = 5.0;  // metadata only
};

struct ViewLocation {
  int left_camera = 0;
  int right_camera = 0;
  int offset = 0;         // steps past the left camera, 0 for anchors
  double position = 0.0;  // offset / 2^stages
};

// Global numbering of real and interpolated viewpoints along the rig. With n interpolation
// stages each camera gap holds 2^n - 1 virtual views, and camera c sits at index c * 2^n.
class ViewIndexModel {
 public:
  ViewIndexModel() = default;
  ViewIndexModel(int camera_count, int stages);

  int camera_count() const noexcept { return camera_count_; }
  int stages() const noexcept { return stages_; }
  int step() const noexcept { return 1 << stages_; }
  int views_per_gap() const noexcept { return step() - 1; }
  int total_views() const noexcept { return (camera_count_ - 1) * step() + 1; }

  int global_index(int camera) const;
  ViewLocation locate(int index) const;
  bool is_anchor(int index) const { return index % step() == 0; }

  bool operator==(const ViewIndexModel&) const = default;

 private:
  int camera_count_ = 12;
  int stages_ = 4;
};

}  // namespace fvv
