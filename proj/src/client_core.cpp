#include <fstream>
#include <sstream>

#include "fvv/client.hpp"

namespace fvv {

TileChoice choose_tile(int desired_view, const ClusterLayout& layout) {
  TileChoice c;
  c.clamped = !layout.contains(desired_view);
  c.view = layout.clamp(desired_view);
  c.tile = layout.tile_of(c.view);
  c.tier = layout.tier_of_tile(c.tile);
  return c;
}

std::span<const std::uint8_t> extract_tile_record(const DemuxedFrame& frame, int tile, const ClusterLayout& layout) {
  if (static_cast<int>(frame.tiles.size()) != layout.tile_count()) {
    throw ExtractionError("tile table lists " + std::to_string(frame.tiles.size()) + " tiles, cluster " +
                          std::to_string(layout.cluster_id) + " has " + std::to_string(layout.tile_count()));
  }
  if (tile < 0 || tile >= layout.tile_count()) throw ExtractionError("tile " + std::to_string(tile) + " out of range");
  const std::size_t header = 2 + 8 * frame.tiles.size();
  const auto& s = frame.tiles[static_cast<std::size_t>(tile)];
  if (header > frame.payload.size() || s.offset > frame.payload.size() - header ||
      s.length > frame.payload.size() - header - s.offset) {
    throw ExtractionError("tile " + std::to_string(tile) + " slice runs past the payload");
  }
  return frame.tile(static_cast<std::size_t>(tile));
}

ExtractedView extract_view(const DemuxedSegment& segment, int desired_view, const ClusterLayout& layout) {
  ExtractedView out;
  out.choice = choose_tile(desired_view, layout);
  out.records.reserve(segment.frames.size());
  for (const auto& f : segment.frames) out.records.push_back(extract_tile_record(f, out.choice.tile, layout));
  return out;
}

Trajectory Trajectory::parse(const std::string& text) {
  Trajectory t;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    long long frame = 0;
    int view = 0;
    if (!(fields >> frame)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw FormatError("expected '<frame_index> <view_index>'", number);
    }
    std::string rest;
    if (!(fields >> view) || (fields >> rest) || frame < 0 || view < 0) {
      throw FormatError("expected '<frame_index> <view_index>'", number);
    }
    t.points_[frame] = view;
  }
  return t;
}

Trajectory Trajectory::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<int> Trajectory::change_at(std::int64_t display_index) const {
  auto it = points_.find(display_index);
  if (it == points_.end()) return std::nullopt;
  return it->second;
}

nlohmann::json DisplayRecord::to_json() const {
  return {{"display", display},
          {"segment", segment},
          {"frame", frame},
          {"pts", pts},
          {"cluster", cluster},
          {"requested", requested},
          {"view", view},
          {"tile", tile},
          {"tier", fvv::to_string(tier)},
          {"clamped", clamped},
          {"records_decoded", records_decoded},
          {"tiles_decoded", tiles_decoded},
          {"requests", requests},
          {"segment_downloads", segment_downloads}};
}

DisplayRecord DisplayRecord::from_json(const nlohmann::json& j) {
  DisplayRecord r;
  r.display = j.at("display").get<std::int64_t>();
  r.segment = j.at("segment").get<std::uint64_t>();
  r.frame = j.at("frame").get<int>();
  r.pts = j.at("pts").get<std::uint64_t>();
  r.cluster = j.at("cluster").get<int>();
  r.requested = j.at("requested").get<int>();
  r.view = j.at("view").get<int>();
  r.tile = j.at("tile").get<int>();
  r.tier = parse_tier(j.at("tier").get<std::string>());
  r.clamped = j.at("clamped").get<bool>();
  r.records_decoded = j.at("records_decoded").get<int>();
  r.tiles_decoded = j.at("tiles_decoded").get<int>();
  r.requests = j.at("requests").get<std::uint64_t>();
  r.segment_downloads = j.at("segment_downloads").get<std::uint64_t>();
  return r;
}

}  // namespace fvv
