#include "fvv/view_index.hpp"

#include <string>

#include "fvv/error.hpp"

namespace fvv {

ViewIndexModel::ViewIndexModel(int camera_count, int stages) : camera_count_(camera_count), stages_(stages) {
  if (camera_count < 2) throw ConfigError("camera_count must be at least 2");
  if (stages < 0 || stages > 6) throw ConfigError("stages must be in 0..6");
}

int ViewIndexModel::global_index(int camera) const {
  if (camera < 0 || camera >= camera_count_) {
    throw RangeError("camera " + std::to_string(camera) + " outside 0.." + std::to_string(camera_count_ - 1));
  }
  return camera * step();
}

ViewLocation ViewIndexModel::locate(int index) const {
  if (index < 0 || index >= total_views()) {
    throw RangeError("view index " + std::to_string(index) + " outside 0.." + std::to_string(total_views() - 1));
  }
  ViewLocation loc;
  loc.left_camera = index / step();
  loc.offset = index % step();
  loc.right_camera = loc.offset == 0 && loc.left_camera == camera_count_ - 1 ? loc.left_camera : loc.left_camera + 1;
  loc.position = static_cast<double>(loc.offset) / step();
  return loc;
}

}  // namespace fvv
