#include "fvv/cluster.hpp"

#include <cstring>

namespace fvv {

std::string to_string(Tier tier) { return tier == Tier::Full ? "full" : "quarter"; }

Tier parse_tier(const std::string& name) {
  if (name == "full") return Tier::Full;
  if (name == "quarter") return Tier::Quarter;
  throw FormatError("unknown tier '" + name + "'", 0);
}

int ClusterLayout::tile_of(int index) const {
  if (!contains(index)) {
    throw RangeError("view " + std::to_string(index) + " is outside cluster " + std::to_string(cluster_id) + " (" +
                     std::to_string(first_index()) + ".." + std::to_string(last_index()) + ")");
  }
  return index - first_index();
}

std::vector<ClusterLayout> build_layouts(const ViewIndexModel& model, int views_per_side) {
  if (views_per_side < 0 || views_per_side > model.step()) {
    throw ConfigError("views_per_side must be in 0.." + std::to_string(model.step()) + ", got " +
                      std::to_string(views_per_side));
  }
  std::vector<ClusterLayout> out;
  for (int c = 0; c < model.camera_count(); ++c) {
    ClusterLayout l;
    l.cluster_id = c;
    l.anchor_index = model.global_index(c);
    l.views_per_side = views_per_side;
    const int lo = std::max(0, l.anchor_index - views_per_side);
    const int hi = std::min(model.total_views() - 1, l.anchor_index + views_per_side);
    for (int i = lo; i <= hi; ++i) l.indices.push_back(i);
    out.push_back(std::move(l));
  }
  return out;
}

ClusterGeometry cluster_geometry(const ClusterLayout& layout, int base_width, int base_height) {
  if (base_width % (2 * kQuarterFactor) != 0 || base_height % (2 * kQuarterFactor) != 0) {
    throw ShapeError("cluster base size must be a multiple of 8, got " + std::to_string(base_width) + "x" +
                     std::to_string(base_height));
  }
  const int tw = base_width / kQuarterFactor;
  const int th = base_height / kQuarterFactor;
  const int cells = 2 * layout.views_per_side;
  const int cols = (cells + kGridRows - 1) / kGridRows;
  ClusterGeometry g;
  g.width = base_width + cols * tw;
  g.height = base_height;
  int slot = 0;
  for (int t = 0; t < layout.tile_count(); ++t) {
    const int index = layout.indices[t];
    if (index == layout.anchor_index) {
      g.tiles.push_back({0, 0, base_width, base_height, index, Tier::Full});
      continue;
    }
    const int col = slot / kGridRows;
    const int row = slot % kGridRows;
    g.tiles.push_back({base_width + col * tw, row * th, tw, th, index, Tier::Quarter});
    ++slot;
  }
  return g;
}

namespace {

void paste(std::vector<Plane>& dst, const Frame& src, int x, int y) {
  const auto comps = src.components();
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const int s = src.component_shift(i);
    const int cx = x >> s, cy = y >> s;
    for (int yy = 0; yy < comps[i].height; ++yy) {
      std::memcpy(&dst[i].at(cx, cy + yy), &comps[i].at(0, yy), static_cast<std::size_t>(comps[i].width));
    }
  }
}

std::vector<Plane> black_canvas(int width, int height, PixelFormat format) {
  auto comps = Frame::filled(width, height, format, 0).components();
  // Neutral chroma so padding is black rather than green.
  if (format == PixelFormat::YUV420) {
    for (std::size_t i = 1; i < comps.size(); ++i) std::fill(comps[i].data.begin(), comps[i].data.end(), 128);
  }
  return comps;
}

}  // namespace

Frame stitch_tiles(const std::vector<Frame>& tiles, const ClusterLayout& layout, int base_width, int base_height) {
  if (static_cast<int>(tiles.size()) != layout.tile_count()) {
    throw LayoutError("cluster " + std::to_string(layout.cluster_id) + " expects " +
                      std::to_string(layout.tile_count()) + " tiles, got " + std::to_string(tiles.size()));
  }
  const ClusterGeometry g = cluster_geometry(layout, base_width, base_height);
  const PixelFormat format = tiles.front().format();
  auto canvas = black_canvas(g.width, g.height, format);
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const auto& r = g.tiles[t];
    if (tiles[t].width() != r.width || tiles[t].height() != r.height || tiles[t].format() != format) {
      throw ShapeError("tile " + std::to_string(t) + " does not match its cell");
    }
    paste(canvas, tiles[t], r.x, r.y);
  }
  return Frame::from_components(format, std::move(canvas), tiles.front().timestamp());
}

ClusterFrame assemble_cluster_frame(const Frame& anchor, const std::vector<Frame>& interp_frames,
                                    const ClusterLayout& layout) {
  if (static_cast<int>(interp_frames.size()) != layout.tile_count() - 1) {
    throw LayoutError("cluster " + std::to_string(layout.cluster_id) + " needs " +
                      std::to_string(layout.tile_count() - 1) + " interpolated views, got " +
                      std::to_string(interp_frames.size()));
  }
  std::vector<Frame> tiles;
  tiles.reserve(layout.tile_count());
  std::size_t next = 0;
  for (int t = 0; t < layout.tile_count(); ++t) {
    if (layout.indices[t] == layout.anchor_index) {
      tiles.push_back(anchor);
      continue;
    }
    const Frame& f = interp_frames[next++];
    if (f.width() != anchor.width() || f.height() != anchor.height() || f.format() != anchor.format()) {
      throw ShapeError("interpolated view differs from the anchor resolution or format");
    }
    tiles.push_back(downscale(f, kQuarterFactor));
  }
  ClusterFrame out;
  out.cluster_id = layout.cluster_id;
  out.stitched = stitch_tiles(tiles, layout, anchor.width(), anchor.height()).with_timestamp(anchor.timestamp());
  out.tiles = cluster_geometry(layout, anchor.width(), anchor.height()).tiles;
  return out;
}

Frame extract_tile(const ClusterFrame& cluster, int tile) {
  const auto& r = cluster.tiles.at(static_cast<std::size_t>(tile));
  return crop(cluster.stitched, r.x, r.y, r.width, r.height);
}

Frame downscale(const Frame& frame, int factor) {
  if (factor < 1) throw ConfigError("scale factor must be positive");
  if (frame.width() % factor != 0 || frame.height() % factor != 0) {
    throw ShapeError(std::to_string(frame.width()) + "x" + std::to_string(frame.height()) + " is not divisible by " +
                     std::to_string(factor));
  }
  auto comps = frame.components();
  std::vector<Plane> out;
  const int area = factor * factor;
  for (const auto& c : comps) {
    if (c.width % factor != 0 || c.height % factor != 0) {
      throw ShapeError("component " + std::to_string(c.width) + "x" + std::to_string(c.height) +
                       " is not divisible by " + std::to_string(factor));
    }
    Plane p(c.width / factor, c.height / factor);
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        int s = 0;
        for (int j = 0; j < factor; ++j) {
          const std::uint8_t* row = &c.at(x * factor, y * factor + j);
          for (int i = 0; i < factor; ++i) s += row[i];
        }
        p.at(x, y) = static_cast<std::uint8_t>((s + area / 2) / area);
      }
    }
    out.push_back(std::move(p));
  }
  return Frame::from_components(frame.format(), std::move(out), frame.timestamp());
}

Frame upscale(const Frame& frame, int factor) {
  if (factor < 1) throw ConfigError("scale factor must be positive");
  auto comps = frame.components();
  std::vector<Plane> out;
  const float inv = 1.0f / static_cast<float>(factor);
  for (const auto& c : comps) {
    Plane p(c.width * factor, c.height * factor);
    for (int y = 0; y < p.height; ++y) {
      const float sy = (static_cast<float>(y) + 0.5f) * inv - 0.5f;
      for (int x = 0; x < p.width; ++x) {
        const float sx = (static_cast<float>(x) + 0.5f) * inv - 0.5f;
        p.at(x, y) = clamp_u8(BilinearTap(c.width, c.height, sx, sy)(c));
      }
    }
    out.push_back(std::move(p));
  }
  return Frame::from_components(frame.format(), std::move(out), frame.timestamp());
}

LookupTable build_lookup_table(const ViewIndexModel& model, const std::vector<ClusterLayout>& layouts) {
  LookupTable t;
  t.model = model;
  t.views.resize(static_cast<std::size_t>(model.total_views()));
  for (const auto& l : layouts) {
    t.views_per_side = l.views_per_side;
    for (int k = 0; k < l.tile_count(); ++k) {
      const int index = l.indices[k];
      if (index < 0 || index >= model.total_views()) throw LayoutError("layout index out of range");
      t.views[index].push_back({l.cluster_id, k, l.tier_of_tile(k)});
    }
  }
  for (std::size_t i = 0; i < t.views.size(); ++i) {
    if (t.views[i].empty()) throw LayoutError("view " + std::to_string(i) + " is not covered by any cluster");
  }
  return t;
}

int select_cluster(int view, const ViewIndexModel& model) {
  if (view < 0 || view >= model.total_views()) {
    throw RangeError("view " + std::to_string(view) + " outside 0.." + std::to_string(model.total_views() - 1));
  }
  // Nearest anchor; an exact half-way view rounds down to the lower camera.
  const int step = model.step();
  const int lower = view / step;
  const int rem = view % step;
  return (2 * rem > step) ? std::min(lower + 1, model.camera_count() - 1) : lower;
}

nlohmann::json to_json(const LookupTable& table) {
  nlohmann::json views = nlohmann::json::array();
  for (std::size_t i = 0; i < table.views.size(); ++i) {
    nlohmann::json placements = nlohmann::json::array();
    for (const auto& p : table.views[i]) {
      placements.push_back({{"cluster", p.cluster}, {"tile", p.tile}, {"tier", to_string(p.tier)}});
    }
    views.push_back({{"index", i}, {"placements", placements}});
  }
  return {{"views", views},
          {"model",
           {{"cameras", table.model.camera_count()},
            {"stages", table.model.stages()},
            {"views_per_side", table.views_per_side}}}};
}

LookupTable lookup_from_json(const nlohmann::json& doc) {
  try {
    LookupTable t;
    const auto& m = doc.at("model");
    t.model = ViewIndexModel(m.at("cameras").get<int>(), m.at("stages").get<int>());
    t.views_per_side = m.at("views_per_side").get<int>();
    t.views.resize(static_cast<std::size_t>(t.model.total_views()));
    for (const auto& v : doc.at("views")) {
      const int index = v.at("index").get<int>();
      if (index < 0 || index >= t.model.total_views()) throw FormatError("lookup index out of range", 0);
      for (const auto& p : v.at("placements")) {
        t.views[index].push_back(
            {p.at("cluster").get<int>(), p.at("tile").get<int>(), parse_tier(p.at("tier").get<std::string>())});
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed lookup table: ") + e.what(), 0);
  }
}

}  // namespace fvv
