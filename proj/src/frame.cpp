#include "fvv/frame.hpp"

#include <cstring>
#include <fstream>

#include "fvv/bytes.hpp"

namespace fvv {

std::string to_string(PixelFormat format) {
  switch (format) {
    case PixelFormat::Gray8: return "gray8";
    case PixelFormat::YUV420: return "yuv420";
    case PixelFormat::RGB8: return "rgb8";
  }
  return "unknown";
}

PixelFormat parse_pixel_format(const std::string& name) {
  if (name == "gray8" || name == "gray") return PixelFormat::Gray8;
  if (name == "yuv420" || name == "yuv420p") return PixelFormat::YUV420;
  if (name == "rgb8" || name == "rgb") return PixelFormat::RGB8;
  throw ConfigError("unknown pixel format '" + name + "'");
}

std::size_t plane_count_for(PixelFormat format) { return format == PixelFormat::YUV420 ? 3 : 1; }

std::size_t expected_plane_size(int width, int height, PixelFormat format, std::size_t plane) {
  const auto w = static_cast<std::size_t>(width);
  const auto h = static_cast<std::size_t>(height);
  switch (format) {
    case PixelFormat::Gray8: return w * h;
    case PixelFormat::RGB8: return 3 * w * h;
    case PixelFormat::YUV420: return plane == 0 ? w * h : ((w + 1) / 2) * ((h + 1) / 2);
  }
  return 0;
}

PlaneF to_float(const Plane& plane) {
  PlaneF out(plane.width, plane.height);
  std::transform(plane.data.begin(), plane.data.end(), out.data.begin(), [](std::uint8_t v) { return float(v); });
  return out;
}

Plane to_u8(const PlaneF& plane) {
  Plane out(plane.width, plane.height);
  std::transform(plane.data.begin(), plane.data.end(), out.data.begin(), [](float v) { return clamp_u8(v); });
  return out;
}

Frame::Frame(int width, int height, PixelFormat format, std::vector<std::vector<std::uint8_t>> planes,
             std::int64_t timestamp)
    : width_(width), height_(height), format_(format), timestamp_(timestamp) {
  if (width <= 0 || height <= 0) throw ShapeError("frame dimensions must be positive");
  if (planes.size() != plane_count_for(format)) throw ShapeError("wrong plane count for " + to_string(format));
  planes_.reserve(planes.size());
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (planes[i].size() != expected_plane_size(width, height, format, i)) {
      throw ShapeError("plane " + std::to_string(i) + " size " + std::to_string(planes[i].size()) +
                       " does not match " + std::to_string(width) + "x" + std::to_string(height) + " " +
                       to_string(format));
    }
    planes_.push_back(std::make_shared<const std::vector<std::uint8_t>>(std::move(planes[i])));
  }
}

Frame Frame::filled(int width, int height, PixelFormat format, std::uint8_t luma, std::int64_t timestamp) {
  std::vector<std::vector<std::uint8_t>> planes;
  for (std::size_t i = 0; i < plane_count_for(format); ++i) {
    const std::uint8_t v = (format == PixelFormat::YUV420 && i > 0) ? 128 : luma;
    planes.emplace_back(expected_plane_size(width, height, format, i), v);
  }
  return Frame(width, height, format, std::move(planes), timestamp);
}

Frame Frame::from_gray(Plane gray, std::int64_t timestamp) {
  const int w = gray.width;
  const int h = gray.height;
  std::vector<std::vector<std::uint8_t>> planes;
  planes.push_back(std::move(gray.data));
  return Frame(w, h, PixelFormat::Gray8, std::move(planes), timestamp);
}

Frame Frame::from_components(PixelFormat format, std::vector<Plane> components, std::int64_t timestamp) {
  if (components.empty()) throw ShapeError("no components");
  const int w = components[0].width;
  const int h = components[0].height;
  std::vector<std::vector<std::uint8_t>> planes;
  if (format == PixelFormat::RGB8) {
    if (components.size() != 3) throw ShapeError("RGB8 needs three components");
    std::vector<std::uint8_t> interleaved(static_cast<std::size_t>(w) * h * 3);
    for (int c = 0; c < 3; ++c) {
      if (!components[c].same_shape(components[0])) throw ShapeError("RGB component size mismatch");
      for (std::size_t i = 0; i < components[c].data.size(); ++i) interleaved[3 * i + c] = components[c].data[i];
    }
    planes.push_back(std::move(interleaved));
  } else {
    for (auto& c : components) planes.push_back(std::move(c.data));
  }
  return Frame(w, h, format, std::move(planes), timestamp);
}

std::size_t Frame::byte_size() const {
  std::size_t n = 0;
  for (const auto& p : planes_) n += p->size();
  return n;
}

std::vector<Plane> Frame::components() const {
  std::vector<Plane> out;
  if (format_ == PixelFormat::RGB8) {
    const auto& src = *planes_[0];
    for (int c = 0; c < 3; ++c) {
      Plane p(width_, height_);
      for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = src[3 * i + c];
      out.push_back(std::move(p));
    }
    return out;
  }
  for (std::size_t i = 0; i < planes_.size(); ++i) {
    const int s = component_shift(i);
    Plane p;
    p.width = (width_ + s) >> s;
    p.height = (height_ + s) >> s;
    p.data = *planes_[i];
    out.push_back(std::move(p));
  }
  return out;
}

Plane Frame::luma() const {
  if (format_ != PixelFormat::RGB8) {
    Plane p;
    p.width = width_;
    p.height = height_;
    p.data = *planes_[0];
    return p;
  }
  const auto& src = *planes_[0];
  Plane p(width_, height_);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const int r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    p.data[i] = static_cast<std::uint8_t>((77 * r + 150 * g + 29 * b + 128) >> 8);
  }
  return p;
}

Frame Frame::with_timestamp(std::int64_t t) const {
  Frame f = *this;
  f.timestamp_ = t;
  return f;
}

bool Frame::same_pixels(const Frame& other) const {
  if (width_ != other.width_ || height_ != other.height_ || format_ != other.format_) return false;
  for (std::size_t i = 0; i < planes_.size(); ++i) {
    if (planes_[i] != other.planes_[i] && *planes_[i] != *other.planes_[i]) return false;
  }
  return true;
}

void append_frame(std::vector<std::uint8_t>& out, const Frame& frame) {
  ByteWriter w(out);
  w.u16(static_cast<std::uint16_t>(frame.width()));
  w.u16(static_cast<std::uint16_t>(frame.height()));
  w.u8(static_cast<std::uint8_t>(frame.format()));
  w.u64(static_cast<std::uint64_t>(frame.timestamp()));
  for (std::size_t i = 0; i < frame.plane_count(); ++i) w.bytes(frame.plane(i));
}

Frame read_frame(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  ByteReader r(bytes, offset);
  const int w = r.u16();
  const int h = r.u16();
  const auto format = static_cast<PixelFormat>(r.u8());
  if (format != PixelFormat::Gray8 && format != PixelFormat::YUV420 && format != PixelFormat::RGB8) {
    throw BitstreamError("bad pixel format", offset + 4);
  }
  const auto ts = static_cast<std::int64_t>(r.u64());
  std::vector<std::vector<std::uint8_t>> planes;
  for (std::size_t i = 0; i < plane_count_for(format); ++i) {
    auto s = r.take(expected_plane_size(w, h, format, i));
    planes.emplace_back(s.begin(), s.end());
  }
  offset = r.offset();
  return Frame(w, h, format, std::move(planes), ts);
}

std::vector<std::uint8_t> serialize_frames(std::span<const Frame> frames) {
  std::vector<std::uint8_t> out;
  std::size_t total = 4;
  for (const auto& f : frames) total += 13 + f.byte_size();
  out.reserve(total);
  ByteWriter(out).u32(static_cast<std::uint32_t>(frames.size()));
  for (const auto& f : frames) append_frame(out, f);
  return out;
}

std::vector<Frame> deserialize_frames(std::span<const std::uint8_t> bytes) {
  std::size_t offset = 0;
  ByteReader r(bytes, offset);
  const auto n = r.u32();
  offset = r.offset();
  std::vector<Frame> frames;
  frames.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) frames.push_back(read_frame(bytes, offset));
  return frames;
}

Frame crop(const Frame& frame, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > frame.width() || y + h > frame.height()) {
    throw ShapeError("crop rectangle outside frame");
  }
  if (frame.format() == PixelFormat::YUV420 && ((x | y) & 1)) throw ShapeError("YUV420 crop needs even origin");
  if (frame.format() == PixelFormat::RGB8) {
    const auto src = frame.plane(0);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h * 3);
    for (int yy = 0; yy < h; ++yy) {
      std::memcpy(&out[static_cast<std::size_t>(yy) * w * 3],
                  &src[(static_cast<std::size_t>(y + yy) * frame.width() + x) * 3], static_cast<std::size_t>(w) * 3);
    }
    return Frame(w, h, frame.format(), {std::move(out)}, frame.timestamp());
  }
  std::vector<std::vector<std::uint8_t>> planes;
  for (std::size_t i = 0; i < frame.plane_count(); ++i) {
    const int s = frame.component_shift(i);
    const int cx = x >> s, cy = y >> s;
    const int cw = (w + s) >> s, ch = (h + s) >> s;
    const int stride = (frame.width() + s) >> s;
    const auto src = frame.plane(i);
    std::vector<std::uint8_t> p(static_cast<std::size_t>(cw) * ch);
    for (int yy = 0; yy < ch; ++yy) {
      std::memcpy(&p[static_cast<std::size_t>(yy) * cw], &src[static_cast<std::size_t>(cy + yy) * stride + cx],
                  static_cast<std::size_t>(cw));
    }
    planes.push_back(std::move(p));
  }
  return Frame(w, h, frame.format(), std::move(planes), frame.timestamp());
}

Frame mirror_horizontal(const Frame& frame) {
  auto comps = frame.components();
  for (auto& c : comps) {
    for (int y = 0; y < c.height; ++y) std::reverse(&c.at(0, y), &c.at(0, y) + c.width);
  }
  return Frame::from_components(frame.format(), std::move(comps), frame.timestamp());
}

void write_raw_frame(const std::string& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  for (std::size_t i = 0; i < frame.plane_count(); ++i) {
    const auto p = frame.plane(i);
    out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

Frame read_raw_frame(const std::string& path, int width, int height, PixelFormat format, std::int64_t timestamp) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<std::uint8_t>> planes;
  for (std::size_t i = 0; i < plane_count_for(format); ++i) {
    std::vector<std::uint8_t> p(expected_plane_size(width, height, format, i));
    in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size()));
    if (in.gcount() != static_cast<std::streamsize>(p.size())) throw IoError("short read: " + path);
    planes.push_back(std::move(p));
  }
  return Frame(width, height, format, std::move(planes), timestamp);
}

}  // namespace fvv
