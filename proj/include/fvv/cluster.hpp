#pragma once

#include <string>
#include <vector>

#include "fvv/frame.hpp"
#include "fvv/view_index.hpp"
#include "json.hpp"

namespace fvv {

enum class Tier : std::uint8_t { Full = 0, Quarter = 1 };

std::string to_string(Tier tier);
Tier parse_tier(const std::string& name);

constexpr int kQuarterFactor = 4;
constexpr int kGridRows = 4;

// One camera's multi-view cluster: the anchor plus views_per_side neighbours on each side,
// clamped to the valid index range. Tiles are ordered by global index.
struct ClusterLayout {
  int cluster_id = 0;  // == anchor camera
  int anchor_index = 0;
  int views_per_side = 0;
  std::vector<int> indices;

  int first_index() const { return indices.front(); }
  int last_index() const { return indices.back(); }
  int tile_count() const { return static_cast<int>(indices.size()); }
  bool contains(int index) const { return index >= first_index() && index <= last_index(); }
  // Tile position of a global index; throws RangeError when outside the cluster.
  int tile_of(int index) const;
  int anchor_tile() const { return tile_of(anchor_index); }
  // Nearest index inside the cluster.
  int clamp(int index) const { return std::clamp(index, first_index(), last_index()); }
  Tier tier_of_tile(int tile) const { return indices.at(tile) == anchor_index ? Tier::Full : Tier::Quarter; }
  bool operator==(const ClusterLayout&) const = default;
};

std::vector<ClusterLayout> build_layouts(const ViewIndexModel& model, int views_per_side);

struct TileRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  int global_index = 0;
  Tier tier = Tier::Full;
  bool operator==(const TileRect&) const = default;
};

// Stitched geometry for a base resolution: anchor at the left, quarter tiles in a column-major
// grid of kGridRows rows to its right, sized for 2 * views_per_side cells.
struct ClusterGeometry {
  int width = 0;
  int height = 0;
  std::vector<TileRect> tiles;  // TileMap, in tile order
};

ClusterGeometry cluster_geometry(const ClusterLayout& layout, int base_width, int base_height);

struct ClusterFrame {
  int cluster_id = 0;
  Frame stitched;
  std::vector<TileRect> tiles;
};

// interp_frames holds every non-anchor view of the layout in global index order, at base resolution.
ClusterFrame assemble_cluster_frame(const Frame& anchor, const std::vector<Frame>& interp_frames,
                                    const ClusterLayout& layout);
Frame extract_tile(const ClusterFrame& cluster, int tile);
// Inverse of extract_tile over a full set of tiles; absent grid cells stay black.
Frame stitch_tiles(const std::vector<Frame>& tiles, const ClusterLayout& layout, int base_width, int base_height);

// Box-filter reduction and bilinear enlargement, per component.
Frame downscale(const Frame& frame, int factor);
Frame upscale(const Frame& frame, int factor);

struct Placement {
  int cluster = 0;
  int tile = 0;
  Tier tier = Tier::Full;
  bool operator==(const Placement&) const = default;
};

struct LookupTable {
  ViewIndexModel model;
  int views_per_side = 0;
  std::vector<std::vector<Placement>> views;  // by global index
  bool operator==(const LookupTable&) const = default;
};

LookupTable build_lookup_table(const ViewIndexModel& model, const std::vector<ClusterLayout>& layouts);

// Cluster whose anchor is nearest the view; ties go to the lower cluster id.
int select_cluster(int view, const ViewIndexModel& model);

nlohmann::json to_json(const LookupTable& table);
LookupTable lookup_from_json(const nlohmann::json& doc);

}  // namespace fvv
