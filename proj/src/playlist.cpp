#include <cmath>
#include <cstdio>
#include <sstream>

#include "fvv/codec.hpp"
#include "fvv/hls.hpp"

namespace fvv {

std::string segment_uri(std::uint64_t sequence) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seg%05llu.ts", static_cast<unsigned long long>(sequence));
  return buf;
}

std::string render_m3u8(const Playlist& p) {
  std::string out = "#EXTM3U\n";
  out += "#EXT-X-VERSION:" + std::to_string(p.version) + "\n";
  out += "#EXT-X-TARGETDURATION:" + std::to_string(p.target_duration) + "\n";
  out += "#EXT-X-MEDIA-SEQUENCE:" + std::to_string(p.media_sequence) + "\n";
  for (const auto& extra : p.extras) out += extra + "\n";
  for (const auto& e : p.entries) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "#EXTINF:%.3f,\n", e.duration);
    out += buf;
    out += e.uri + "\n";
  }
  if (p.ended) out += "#EXT-X-ENDLIST\n";
  return out;
}

namespace {

std::uint64_t parse_uint(const std::string& v, int line, const char* tag) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError(std::string("malformed ") + tag + " value '" + v + "'", line);
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw FormatError(std::string(tag) + " value out of range", line);
  }
}

}  // namespace

Playlist parse_m3u8(const std::string& text) {
  Playlist p;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  bool header = false;
  bool pending = false;
  double pending_duration = 0.0;
  int pending_line = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "#EXTM3U") throw FormatError("playlist does not start with #EXTM3U", number);
      header = true;
      continue;
    }
    if (line.rfind("#EXTINF:", 0) == 0) {
      const std::string v = line.substr(8);
      const auto comma = v.find(',');
      if (comma == std::string::npos) throw FormatError("EXTINF without a comma", number);
      const std::string d = v.substr(0, comma);
      char* end = nullptr;
      const double duration = std::strtod(d.c_str(), &end);
      if (d.empty() || end != d.c_str() + d.size() || !(duration >= 0.0) || !std::isfinite(duration)) {
        throw FormatError("malformed EXTINF duration '" + d + "'", number);
      }
      if (pending) throw FormatError("EXTINF without a following URI", pending_line);
      pending = true;
      pending_duration = duration;
      pending_line = number;
    } else if (line.rfind("#EXT-X-VERSION:", 0) == 0) {
      p.version = static_cast<int>(parse_uint(line.substr(15), number, "EXT-X-VERSION"));
    } else if (line.rfind("#EXT-X-TARGETDURATION:", 0) == 0) {
      p.target_duration = static_cast<int>(parse_uint(line.substr(22), number, "EXT-X-TARGETDURATION"));
    } else if (line.rfind("#EXT-X-MEDIA-SEQUENCE:", 0) == 0) {
      p.media_sequence = parse_uint(line.substr(22), number, "EXT-X-MEDIA-SEQUENCE");
    } else if (line == "#EXT-X-ENDLIST") {
      p.ended = true;
    } else if (line[0] == '#') {
      p.extras.push_back(line);
    } else {
      if (!pending) throw FormatError("URI without a preceding EXTINF", number);
      p.entries.push_back({line, pending_duration});
      pending = false;
    }
  }
  if (!header) throw FormatError("playlist does not start with #EXTM3U", 1);
  if (pending) throw FormatError("EXTINF without a following URI", pending_line);
  return p;
}

LivePlaylist::LivePlaylist(double segment_duration, std::size_t window, std::uint64_t first_sequence)
    : window_(window), next_(first_sequence) {
  if (!(segment_duration > 0.0)) throw ConfigError("segment duration must be positive");
  if (window == 0) throw ConfigError("playlist window must hold at least one segment");
  model_.target_duration = static_cast<int>(std::ceil(segment_duration - 1e-9));
  model_.media_sequence = first_sequence;
}

std::string LivePlaylist::rotate(std::uint64_t sequence, double duration) {
  if (model_.ended) throw SequencingError("playlist already ended");
  if (sequence != next_) {
    throw SequencingError("segment " + std::to_string(sequence) + " does not follow " +
                          (next_ == model_.media_sequence && model_.entries.empty() ? std::string("the start")
                                                                                    : std::to_string(next_ - 1)));
  }
  model_.entries.push_back({segment_uri(sequence), duration});
  model_.target_duration = std::max(model_.target_duration, static_cast<int>(std::ceil(duration - 1e-9)));
  while (model_.entries.size() > window_) {
    model_.entries.erase(model_.entries.begin());
    ++model_.media_sequence;
  }
  ++next_;
  return render();
}

void LivePlaylist::end() { model_.ended = true; }

SegmentPlan segment_plan(int fps, double segment_duration, int gop) {
  const GopCheck check = validate_gop(gop, fps, segment_duration);
  if (!check.ok) {
    throw GopAlignmentError("GOP " + std::to_string(gop) + " must divide fps * segment_duration = " +
                            std::to_string(std::lround(fps * segment_duration)) + " frames; segment " +
                            std::to_string(check.first_bad_segment) + " would not start on an I-frame");
  }
  SegmentPlan plan;
  plan.frames_per_segment = static_cast<int>(std::lround(fps * segment_duration));
  for (int f = 0; f < plan.frames_per_segment; f += gop) plan.iframe_positions.push_back(f);
  return plan;
}

}  // namespace fvv
