#include "fvv/capture_sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace fvv {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy, std::uint64_t salt) {
  const std::uint64_t h = splitmix(seed ^ splitmix(static_cast<std::uint64_t>(ix) * 0x632BE59BD9B4E019ull ^
                                                   splitmix(static_cast<std::uint64_t>(iy) + salt)));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, double x, double y, double cell, std::uint64_t salt) {
  const double gx = x / cell;
  const double gy = y / cell;
  const auto ix = static_cast<std::int64_t>(std::floor(gx));
  const auto iy = static_cast<std::int64_t>(std::floor(gy));
  const double fx = smooth(gx - static_cast<double>(ix));
  const double fy = smooth(gy - static_cast<double>(iy));
  const double a = lattice(seed, ix, iy, salt);
  const double b = lattice(seed, ix + 1, iy, salt);
  const double c = lattice(seed, ix, iy + 1, salt);
  const double d = lattice(seed, ix + 1, iy + 1, salt);
  return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
}

// Three float channels: luma-like detail plus two smooth chroma-like channels.
struct TextureRaster {
  PlaneF ch[3];
};

TextureRaster make_texture(const TextureSpec& spec, int w, int h) {
  TextureRaster t;
  for (auto& c : t.ch) c = PlaneF(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double n = 0.0;
      double amp = 1.0;
      double norm = 0.0;
      double cell = spec.cell;
      for (std::uint64_t o = 0; o < 4; ++o) {
        n += amp * value_noise(spec.seed, x, y, cell, o);
        norm += amp;
        amp *= 0.6;
        cell *= 0.5;
      }
      n /= norm;
      t.ch[0].at(x, y) = static_cast<float>(128.0 + spec.contrast * (n - 0.5) * 220.0);
      t.ch[1].at(x, y) = static_cast<float>(128.0 + 60.0 * (value_noise(spec.seed, x, y, spec.cell * 3, 11) - 0.5));
      t.ch[2].at(x, y) = static_cast<float>(128.0 + 60.0 * (value_noise(spec.seed, x, y, spec.cell * 3, 12) - 0.5));
    }
  }
  // Geometric patches: random rectangles with a luma offset.
  std::uint64_t state = splitmix(spec.seed ^ 0xA5A5A5A5ull);
  auto next = [&] {
    state = splitmix(state);
    return static_cast<double>(state >> 11) * (1.0 / 9007199254740992.0);
  };
  for (int s = 0; s < spec.shapes; ++s) {
    const int rw = 3 + static_cast<int>(next() * spec.cell * 1.5);
    const int rh = 3 + static_cast<int>(next() * spec.cell * 1.5);
    const int rx = static_cast<int>(next() * std::max(1, w - rw));
    const int ry = static_cast<int>(next() * std::max(1, h - rh));
    const float delta = static_cast<float>((next() - 0.5) * 90.0 * spec.contrast);
    for (int y = ry; y < std::min(h, ry + rh); ++y) {
      for (int x = rx; x < std::min(w, rx + rw); ++x) t.ch[0].at(x, y) += delta;
    }
  }
  for (auto& v : t.ch[0].data) v = std::clamp(v, 16.0f, 240.0f);
  return t;
}

}  // namespace

double MotionPath::x(int t) const {
  return x0 + amp_x * std::sin(2.0 * std::numbers::pi * t / period_frames + phase);
}

double MotionPath::y(int t) const {
  return y0 + amp_y * std::sin(2.0 * std::numbers::pi * t / period_frames + phase);
}

double SyntheticScene::max_disparity() const {
  double m = layer_disparity(background_depth);
  for (const auto& s : sprites) m = std::max(m, layer_disparity(s.depth));
  return m;
}

SyntheticScene make_default_scene(std::uint64_t seed, int width, int height, int camera_count, PixelFormat format,
                                  int fps) {
  SyntheticScene s;
  s.seed = seed;
  s.width = width;
  s.height = height;
  s.format = format;
  s.fps = fps;
  s.rig.camera_count = camera_count;
  s.background.seed = splitmix(seed);
  s.background.cell = 16.0;
  const double depths[] = {6.0, 4.0, 3.0};
  for (int i = 0; i < 3; ++i) {
    SpriteSpec sp;
    sp.texture.seed = splitmix(seed + 101 + i);
    sp.texture.cell = 12.0;
    sp.texture.shapes = 6;
    sp.depth = depths[i];
    sp.width = std::max(16, width / 5);
    sp.height = std::max(16, height / 3);
    const double shift = s.layer_disparity(sp.depth) * (camera_count - 1);
    sp.path.x0 = width * (0.2 + 0.25 * i) + shift * 0.5;
    sp.path.y0 = height * (0.15 + 0.2 * i);
    sp.path.amp_x = width * 0.05;
    sp.path.amp_y = height * 0.03;
    sp.path.period_frames = 90.0 + 30.0 * i;
    sp.path.phase = 0.7 * i;
    s.sprites.push_back(sp);
  }
  return s;
}

struct SceneRenderer::Layers {
  TextureRaster background;
  std::vector<TextureRaster> sprites;
  std::vector<std::size_t> order;  // sprite indices from far to near
};

SceneRenderer::SceneRenderer(SyntheticScene scene) : scene_(std::move(scene)), layers_(std::make_unique<Layers>()) {
  if (scene_.width <= 0 || scene_.height <= 0) throw ConfigError("scene size must be positive");
  if (scene_.rig.camera_count < 2) throw ConfigError("camera_count must be at least 2");
  if (scene_.background_depth <= 0) throw ConfigError("depth must be positive");
  const double span = scene_.layer_disparity(scene_.background_depth) * (scene_.rig.camera_count - 1);
  layers_->background = make_texture(scene_.background, scene_.width + static_cast<int>(std::ceil(span)) + 2,
                                     scene_.height);
  for (const auto& sp : scene_.sprites) {
    if (sp.depth <= 0) throw ConfigError("depth must be positive");
    layers_->sprites.push_back(make_texture(sp.texture, sp.width, sp.height));
    layers_->order.push_back(layers_->order.size());
  }
  std::stable_sort(layers_->order.begin(), layers_->order.end(), [&](std::size_t a, std::size_t b) {
    return scene_.sprites[a].depth > scene_.sprites[b].depth;
  });
}

SceneRenderer::~SceneRenderer() = default;
SceneRenderer::SceneRenderer(SceneRenderer&&) noexcept = default;
SceneRenderer& SceneRenderer::operator=(SceneRenderer&&) noexcept = default;

void SceneRenderer::check_position(double position) const {
  if (!(position >= 0.0 && position <= scene_.rig.camera_count - 1)) {
    throw RangeError("camera position " + std::to_string(position) + " outside rig span [0, " +
                     std::to_string(scene_.rig.camera_count - 1) + "]");
  }
}

namespace {

// Index of the visible layer at every pixel: -1 background, otherwise sprite index.
Image<int> layer_labels(const SyntheticScene& scene, const std::vector<std::size_t>& order, double position,
                        int frame_index) {
  Image<int> labels(scene.width, scene.height, -1);
  for (const std::size_t k : order) {
    const auto& sp = scene.sprites[k];
    const double shift = position * scene.layer_disparity(sp.depth);
    const double ox = sp.path.x(frame_index) - shift;
    const double oy = sp.path.y(frame_index);
    const int x_begin = std::max(0, static_cast<int>(std::ceil(ox)));
    const int x_end = std::min(scene.width - 1, static_cast<int>(std::floor(ox + sp.width - 1)));
    const int y_begin = std::max(0, static_cast<int>(std::ceil(oy)));
    const int y_end = std::min(scene.height - 1, static_cast<int>(std::floor(oy + sp.height - 1)));
    for (int y = y_begin; y <= y_end; ++y) {
      for (int x = x_begin; x <= x_end; ++x) labels.at(x, y) = static_cast<int>(k);
    }
  }
  return labels;
}

}  // namespace

Frame SceneRenderer::render(double position, int frame_index) const {
  check_position(position);
  const int w = scene_.width;
  const int h = scene_.height;
  const auto labels = layer_labels(scene_, layers_->order, position, frame_index);
  const float bg_shift = static_cast<float>(position * scene_.layer_disparity(scene_.background_depth));

  std::vector<float> sprite_dx(scene_.sprites.size());
  std::vector<float> sprite_dy(scene_.sprites.size());
  for (std::size_t k = 0; k < scene_.sprites.size(); ++k) {
    const auto& sp = scene_.sprites[k];
    sprite_dx[k] = static_cast<float>(position * scene_.layer_disparity(sp.depth) - sp.path.x(frame_index));
    sprite_dy[k] = static_cast<float>(-sp.path.y(frame_index));
  }

  PlaneF ch[3] = {PlaneF(w, h), PlaneF(w, h), PlaneF(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int label = labels.at(x, y);
      const TextureRaster* tex = &layers_->background;
      float tx = static_cast<float>(x) + bg_shift;
      float ty = static_cast<float>(y);
      if (label >= 0) {
        tex = &layers_->sprites[static_cast<std::size_t>(label)];
        tx = static_cast<float>(x) + sprite_dx[label];
        ty = static_cast<float>(y) + sprite_dy[label];
      }
      for (int c = 0; c < 3; ++c) ch[c].at(x, y) = sample_bilinear(tex->ch[c], tx, ty);
    }
  }

  std::vector<Plane> comps;
  switch (scene_.format) {
    case PixelFormat::Gray8:
      comps.push_back(to_u8(ch[0]));
      break;
    case PixelFormat::YUV420: {
      comps.push_back(to_u8(ch[0]));
      for (int c = 1; c < 3; ++c) {
        Plane p((w + 1) / 2, (h + 1) / 2);
        for (int y = 0; y < p.height; ++y) {
          for (int x = 0; x < p.width; ++x) {
            const float s = ch[c].clamped(2 * x, 2 * y) + ch[c].clamped(2 * x + 1, 2 * y) +
                            ch[c].clamped(2 * x, 2 * y + 1) + ch[c].clamped(2 * x + 1, 2 * y + 1);
            p.at(x, y) = clamp_u8(s * 0.25);
          }
        }
        comps.push_back(std::move(p));
      }
      break;
    }
    case PixelFormat::RGB8: {
      Plane r(w, h), g(w, h), b(w, h);
      for (std::size_t i = 0; i < r.data.size(); ++i) {
        const double yy = ch[0].data[i], u = ch[1].data[i] - 128.0, v = ch[2].data[i] - 128.0;
        r.data[i] = clamp_u8(yy + 1.402 * v);
        g.data[i] = clamp_u8(yy - 0.344136 * u - 0.714136 * v);
        b.data[i] = clamp_u8(yy + 1.772 * u);
      }
      comps.push_back(std::move(r));
      comps.push_back(std::move(g));
      comps.push_back(std::move(b));
      break;
    }
  }
  return Frame::from_components(scene_.format, std::move(comps), frame_index);
}

PlaneF SceneRenderer::disparity_map(double position, int frame_index) const {
  check_position(position);
  const auto labels = layer_labels(scene_, layers_->order, position, frame_index);
  PlaneF out(scene_.width, scene_.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const int label = labels.data[i];
    const double depth = label < 0 ? scene_.background_depth : scene_.sprites[static_cast<std::size_t>(label)].depth;
    out.data[i] = static_cast<float>(scene_.layer_disparity(depth));
  }
  return out;
}

Plane SceneRenderer::validity_mask(double position, int frame_index, int band) const {
  check_position(position);
  const int w = scene_.width;
  const int h = scene_.height;
  const auto labels = layer_labels(scene_, layers_->order, position, frame_index);
  Plane edge(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels.at(x, y);
      if ((x + 1 < w && labels.at(x + 1, y) != l) || (y + 1 < h && labels.at(x, y + 1) != l)) {
        edge.at(x, y) = 1;
        if (x + 1 < w) edge.at(x + 1, y) = 1;
        if (y + 1 < h) edge.at(x, y + 1) = 1;
      }
    }
  }
  // Chebyshev dilation of the silhouette edges.
  Plane rows(w, h, 0);
  for (int y = 0; y < h; ++y) {
    int last = -1000000;
    for (int x = 0; x < w; ++x) {
      if (edge.at(x, y)) last = x;
      if (x - last <= band) rows.at(x, y) = 1;
    }
    last = 1000000;
    for (int x = w - 1; x >= 0; --x) {
      if (edge.at(x, y)) last = x;
      if (last - x <= band) rows.at(x, y) = 1;
    }
  }
  Plane mask(w, h, 1);
  for (int x = 0; x < w; ++x) {
    int last = -1000000;
    for (int y = 0; y < h; ++y) {
      if (rows.at(x, y)) last = y;
      if (y - last <= band) mask.at(x, y) = 0;
    }
    last = 1000000;
    for (int y = h - 1; y >= 0; --y) {
      if (rows.at(x, y)) last = y;
      if (last - y <= band) mask.at(x, y) = 0;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x < band || y < band || x >= w - band || y >= h - band) mask.at(x, y) = 0;
    }
  }
  return mask;
}

Frame render_view(const SyntheticScene& scene, double position, int frame_index) {
  return SceneRenderer(scene).render(position, frame_index);
}

namespace {

nlohmann::json texture_json(const TextureSpec& t) {
  return {{"seed", t.seed}, {"cell", t.cell}, {"contrast", t.contrast}, {"shapes", t.shapes}};
}

TextureSpec texture_from(const nlohmann::json& j) {
  TextureSpec t;
  t.seed = j.at("seed").get<std::uint64_t>();
  t.cell = j.at("cell").get<double>();
  t.contrast = j.at("contrast").get<double>();
  t.shapes = j.at("shapes").get<int>();
  return t;
}

}  // namespace

std::filesystem::path captured_frame_path(const std::filesystem::path& dir, int camera, int frame_index) {
  char cam[16];
  char frame[32];
  std::snprintf(cam, sizeof cam, "cam%02d", camera);
  std::snprintf(frame, sizeof frame, "frame%06d.raw", frame_index);
  return dir / cam / frame;
}

void write_manifest(const SyntheticScene& scene, int frame_count, const std::filesystem::path& dir) {
  nlohmann::json sprites = nlohmann::json::array();
  for (const auto& sp : scene.sprites) {
    sprites.push_back({{"texture", texture_json(sp.texture)},
                       {"depth", sp.depth},
                       {"width", sp.width},
                       {"height", sp.height},
                       {"path",
                        {{"x0", sp.path.x0},
                         {"y0", sp.path.y0},
                         {"amp_x", sp.path.amp_x},
                         {"amp_y", sp.path.amp_y},
                         {"period_frames", sp.path.period_frames},
                         {"phase", sp.path.phase}}}});
  }
  nlohmann::json m = {{"seed", scene.seed},
                      {"format", to_string(scene.format)},
                      {"width", scene.width},
                      {"height", scene.height},
                      {"fps", scene.fps},
                      {"frame_count", frame_count},
                      {"rig", {{"camera_count", scene.rig.camera_count}, {"angular_step", scene.rig.angular_step_deg}}},
                      {"baseline", scene.baseline},
                      {"disparity_gain", scene.disparity_gain},
                      {"background", {{"texture", texture_json(scene.background)}, {"depth", scene.background_depth}}},
                      {"sprites", sprites}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + (dir / "manifest.json").string());
}

CapturedScene read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
  CapturedScene c;
  try {
    const auto m = nlohmann::json::parse(in);
    auto& s = c.scene;
    s.seed = m.at("seed").get<std::uint64_t>();
    s.format = parse_pixel_format(m.at("format").get<std::string>());
    s.width = m.at("width").get<int>();
    s.height = m.at("height").get<int>();
    s.fps = m.at("fps").get<int>();
    s.rig.camera_count = m.at("rig").at("camera_count").get<int>();
    s.rig.angular_step_deg = m.at("rig").at("angular_step").get<double>();
    s.baseline = m.at("baseline").get<double>();
    s.disparity_gain = m.at("disparity_gain").get<double>();
    s.background = texture_from(m.at("background").at("texture"));
    s.background_depth = m.at("background").at("depth").get<double>();
    for (const auto& j : m.at("sprites")) {
      SpriteSpec sp;
      sp.texture = texture_from(j.at("texture"));
      sp.depth = j.at("depth").get<double>();
      sp.width = j.at("width").get<int>();
      sp.height = j.at("height").get<int>();
      const auto& p = j.at("path");
      sp.path = {p.at("x0").get<double>(),    p.at("y0").get<double>(),
                 p.at("amp_x").get<double>(), p.at("amp_y").get<double>(),
                 p.at("period_frames").get<double>(), p.at("phase").get<double>()};
      s.sprites.push_back(sp);
    }
    c.frame_count = m.at("frame_count").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }
  return c;
}

void capture_sequence(const SyntheticScene& scene, int frame_count, const std::filesystem::path& dir) {
  if (scene.width % 8 != 0 || scene.height % 8 != 0) throw ConfigError("capture size must be a multiple of 8");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  SceneRenderer renderer(scene);
  for (int c = 0; c < scene.rig.camera_count; ++c) {
    std::filesystem::create_directories(captured_frame_path(dir, c, 0).parent_path(), ec);
    if (ec) throw IoError("cannot create camera directory: " + ec.message());
    for (int t = 0; t < frame_count; ++t) {
      const Frame f = renderer.render(c, t);
      write_raw_frame(captured_frame_path(dir, c, t).string(), f);
    }
  }
  write_manifest(scene, frame_count, dir);
}

Frame load_captured_frame(const std::filesystem::path& dir, const SyntheticScene& scene, int camera, int frame_index) {
  return read_raw_frame(captured_frame_path(dir, camera, frame_index).string(), scene.width, scene.height,
                        scene.format, frame_index);
}

}  // namespace fvv
