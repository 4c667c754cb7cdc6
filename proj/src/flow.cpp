#include "fvv/flow.hpp"

#include <cmath>
#include <limits>

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

namespace fvv {

FlowField FlowField::constant(int w, int h, float fx, float fy) {
  FlowField f(w, h);
  std::fill(f.dx.data.begin(), f.dx.data.end(), fx);
  std::fill(f.dy.data.begin(), f.dy.data.end(), fy);
  return f;
}

FlowField FlowField::scaled(float factor) const {
  FlowField f = *this;
  for (auto& v : f.dx.data) v *= factor;
  for (auto& v : f.dy.data) v *= factor;
  return f;
}

FlowField FlowField::resized(int target_width, int target_height) const {
  FlowField out(target_width, target_height);
  const float sx = static_cast<float>(width) / static_cast<float>(target_width);
  const float sy = static_cast<float>(height) / static_cast<float>(target_height);
  for (int y = 0; y < target_height; ++y) {
    const float src_y = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
    for (int x = 0; x < target_width; ++x) {
      const float src_x = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
      out.dx.at(x, y) = sample_bilinear(dx, src_x, src_y) / sx;
      out.dy.at(x, y) = sample_bilinear(dy, src_x, src_y) / sy;
    }
  }
  return out;
}

namespace {

// Exact 2x bilinear resample with half-pixel centres: taps 0.25/0.75, edges clamped.
void upsample_rows(const PlaneF& in, PlaneF& out, float gain) {
  const int tw = out.width;
  PlaneF tmp(tw, in.height);
  for (int y = 0; y < in.height; ++y) {
    const float* src = &in.at(0, y);
    float* dst = &tmp.at(0, y);
    for (int x = 0; x < tw; ++x) {
      const float sx = std::clamp((static_cast<float>(x) + 0.5f) * 0.5f - 0.5f, 0.0f, static_cast<float>(in.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, in.width - 1);
      const float f = sx - static_cast<float>(x0);
      dst[x] = src[x0] * (1.0f - f) + src[x1] * f;
    }
  }
  for (int y = 0; y < out.height; ++y) {
    const float sy = std::clamp((static_cast<float>(y) + 0.5f) * 0.5f - 0.5f, 0.0f, static_cast<float>(in.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, in.height - 1);
    const float f = sy - static_cast<float>(y0);
    const float* a = &tmp.at(0, y0);
    const float* b = &tmp.at(0, y1);
    float* dst = &out.at(0, y);
    for (int x = 0; x < tw; ++x) dst[x] = gain * (a[x] * (1.0f - f) + b[x] * f);
  }
}

}  // namespace

FlowField FlowField::upscale2x(int target_width, int target_height) const {
  FlowField out(target_width, target_height);
  upsample_rows(dx, out.dx, 2.0f);
  upsample_rows(dy, out.dy, 2.0f);
  return out;
}

float FlowField::max_abs_difference(const FlowField& other) const {
  if (width != other.width || height != other.height) throw ShapeError("flow size mismatch");
  float m = 0.0f;
  for (std::size_t i = 0; i < dx.data.size(); ++i) {
    m = std::max(m, std::abs(dx.data[i] - other.dx.data[i]));
    m = std::max(m, std::abs(dy.data[i] - other.dy.data[i]));
  }
  return m;
}

PlaneF backward_warp(const PlaneF& image, const FlowField& flow) {
  if (image.width != flow.width || image.height != flow.height) {
    throw ShapeError("flow " + std::to_string(flow.width) + "x" + std::to_string(flow.height) +
                     " does not match image " + std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  PlaneF out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    const float* fdx = &flow.dx.at(0, y);
    const float* fdy = &flow.dy.at(0, y);
    float* o = &out.at(0, y);
    for (int x = 0; x < image.width; ++x) {
      o[x] = BilinearTap(image.width, image.height, static_cast<float>(x) + fdx[x], static_cast<float>(y) + fdy[x])(image);
    }
  }
  return out;
}

Frame backward_warp(const Frame& image, const FlowField& flow) {
  if (image.width() != flow.width || image.height() != flow.height) {
    throw ShapeError("flow does not match frame size");
  }
  auto comps = image.components();
  std::vector<Plane> out;
  std::optional<FlowField> chroma_flow;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const FlowField* f = &flow;
    if (image.component_shift(i) > 0) {
      if (!chroma_flow) chroma_flow = flow.resized(comps[i].width, comps[i].height);
      f = &*chroma_flow;
    }
    out.push_back(to_u8(backward_warp(to_float(comps[i]), *f)));
  }
  return Frame::from_components(image.format(), std::move(out), image.timestamp());
}

PlaneF downsample2x(const PlaneF& image) {
  PlaneF out((image.width + 1) / 2, (image.height + 1) / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = 0.25f * (image.clamped(2 * x, 2 * y) + image.clamped(2 * x + 1, 2 * y) +
                              image.clamped(2 * x, 2 * y + 1) + image.clamped(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

namespace {

struct Candidate {
  double sad = std::numeric_limits<double>::infinity();
  int dx = 0;
  int dy = 0;
  double magnitude = 0.0;
};

// Strict ordering: lower SAD, then smaller residual magnitude, then smaller dy, then smaller dx.
bool better(const Candidate& a, const Candidate& b) {
  if (a.sad != b.sad) return a.sad < b.sad;
  if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
  if (a.dy != b.dy) return a.dy < b.dy;
  return a.dx < b.dx;
}

// Levels are averages of 8-bit samples, so a x16 fixed-point copy keeps SAD exact and integer.
using FixedPlane = Image<std::int16_t>;

FixedPlane to_fixed(const PlaneF& p) {
  FixedPlane out(p.width, p.height);
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const float v = p.data[i] * 16.0f;
    out.data[i] = static_cast<std::int16_t>(std::clamp(v + 0.5f, 0.0f, 32767.0f));
  }
  return out;
}

double block_sad(const FixedPlane& src, const FixedPlane& dst, int x0, int y0, int x1, int y1, int ox, int oy) {
  std::int32_t sad = 0;
  const bool inside = x0 + ox >= 0 && y0 + oy >= 0 && x1 + ox <= dst.width && y1 + oy <= dst.height;
  const int n = x1 - x0;
#if defined(__SSE2__)
  if (inside && n == 8) {
    // Samples are non-negative, so |a - b| = sat(a - b) | sat(b - a) in unsigned 16-bit.
    __m128i acc = _mm_setzero_si128();
    const __m128i ones = _mm_set1_epi16(1);
    for (int y = y0; y < y1; ++y) {
      const __m128i a = _mm_loadu_si128(reinterpret_cast<const __m128i*>(&src.at(x0, y)));
      const __m128i b = _mm_loadu_si128(reinterpret_cast<const __m128i*>(&dst.at(x0 + ox, y + oy)));
      const __m128i d = _mm_or_si128(_mm_subs_epu16(a, b), _mm_subs_epu16(b, a));
      acc = _mm_add_epi32(acc, _mm_madd_epi16(d, ones));
    }
    acc = _mm_add_epi32(acc, _mm_shuffle_epi32(acc, _MM_SHUFFLE(1, 0, 3, 2)));
    acc = _mm_add_epi32(acc, _mm_shuffle_epi32(acc, _MM_SHUFFLE(2, 3, 0, 1)));
    return _mm_cvtsi128_si32(acc) / 16.0;
  }
#endif
  if (inside) {
    for (int y = y0; y < y1; ++y) {
      const std::int16_t* s = &src.at(x0, y);
      const std::int16_t* d = &dst.at(x0 + ox, y + oy);
      for (int x = 0; x < n; ++x) sad += std::abs(static_cast<std::int32_t>(s[x]) - d[x]);
    }
  } else {
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) sad += std::abs(static_cast<std::int32_t>(src.at(x, y)) - dst.clamped(x + ox, y + oy));
    }
  }
  return sad / 16.0;
}

// Parabolic refinement around the minimum; returns an offset in [-0.5, 0.5].
double parabola(double minus, double centre, double plus) {
  const double denom = minus - 2.0 * centre + plus;
  if (!(denom > 0.0)) return 0.0;
  return std::clamp(0.5 * (minus - plus) / denom, -0.5, 0.5);
}

// Pixel refinement window half-size.
constexpr int R = 1;

// SAD between src around (x, y) and dst displaced by (ox, oy), bilinear, edges clamped.
float window_sad(const PlaneF& src, const PlaneF& dst, int x, int y, float ox, float oy) {
  const int w = src.width, h = src.height;
  const int ix = static_cast<int>(std::floor(ox)), iy = static_cast<int>(std::floor(oy));
  float cost = 0.0f;
  if (x - R >= 0 && y - R >= 0 && x + R < w && y + R < h && x - R + ix >= 0 && y - R + iy >= 0 &&
      x + R + 1 + ix < w && y + R + 1 + iy < h) {
    const float fx = ox - static_cast<float>(ix), fy = oy - static_cast<float>(iy);
    const float w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy, w11 = fx * fy;
    for (int j = -R; j <= R; ++j) {
      const float* s0 = &src.at(x - R, y + j);
      const float* d0 = &dst.at(x - R + ix, y + j + iy);
      const float* d1 = d0 + w;
      for (int i = 0; i <= 2 * R; ++i) {
        cost += std::abs(s0[i] - (w00 * d0[i] + w10 * d0[i + 1] + w01 * d1[i] + w11 * d1[i + 1]));
      }
    }
    return cost;
  }
  for (int j = -R; j <= R; ++j) {
    const int yy = std::clamp(y + j, 0, h - 1);
    for (int i = -R; i <= R; ++i) {
      const int xx = std::clamp(x + i, 0, w - 1);
      cost += std::abs(src.at(xx, yy) - BilinearTap(w, h, static_cast<float>(xx) + ox, static_cast<float>(yy) + oy)(dst));
    }
  }
  return cost;
}

struct DirectionResult {
  FlowField flow;
  PlaneF error;
};

DirectionResult match_direction(const PlaneF& src, const PlaneF& dst, const FlowField* prior,
                                const BlockSearch& search) {
  const FixedPlane src_fixed = to_fixed(src);
  const FixedPlane dst_fixed = to_fixed(dst);
  const int w = src.width;
  const int h = src.height;
  const int bs = search.block_size;
  const int r = search.radius;
  const int bw = (w + bs - 1) / bs;
  const int bh = (h + bs - 1) / bs;
  const double limit = r + 1e-9;

  PlaneF res_x(bw, bh);
  PlaneF res_y(bw, bh);
  const int span = 2 * r + 3;
  std::vector<double> costs(static_cast<std::size_t>(span) * span);

  for (int by = 0; by < bh; ++by) {
    for (int bx = 0; bx < bw; ++bx) {
      const int x0 = bx * bs, y0 = by * bs;
      const int x1 = std::min(x0 + bs, w), y1 = std::min(y0 + bs, h);
      const float cx = 0.5f * static_cast<float>(x0 + x1 - 1);
      const float cy = 0.5f * static_cast<float>(y0 + y1 - 1);
      double px = 0.0, py = 0.0;
      if (prior) {
        px = sample_bilinear(prior->dx, cx, cy);
        py = sample_bilinear(prior->dy, cx, cy);
      }
      const int base_x = static_cast<int>(std::lround(px));
      const int base_y = static_cast<int>(std::lround(py));

      Candidate best;
      std::fill(costs.begin(), costs.end(), std::numeric_limits<double>::infinity());
      for (int dy = -r - 1; dy <= r + 1; ++dy) {
        const double ry = base_y + dy - py;
        if (std::abs(ry) > limit) continue;
        for (int dx = -r - 1; dx <= r + 1; ++dx) {
          const double rx = base_x + dx - px;
          if (std::abs(rx) > limit) continue;
          Candidate c;
          c.sad = block_sad(src_fixed, dst_fixed, x0, y0, x1, y1, base_x + dx, base_y + dy);
          c.dx = dx;
          c.dy = dy;
          c.magnitude = rx * rx + ry * ry;
          costs[static_cast<std::size_t>(dy + r + 1) * span + (dx + r + 1)] = c.sad;
          if (better(c, best)) best = c;
        }
      }

      double sub_x = 0.0, sub_y = 0.0;
      if (best.sad > 0.0) {
        auto cost = [&](int dx, int dy) {
          if (dx < -r - 1 || dx > r + 1 || dy < -r - 1 || dy > r + 1) return std::numeric_limits<double>::infinity();
          return costs[static_cast<std::size_t>(dy + r + 1) * span + (dx + r + 1)];
        };
        const double lx = cost(best.dx - 1, best.dy), hx = cost(best.dx + 1, best.dy);
        const double ly = cost(best.dx, best.dy - 1), hy = cost(best.dx, best.dy + 1);
        if (std::isfinite(lx) && std::isfinite(hx)) sub_x = parabola(lx, best.sad, hx);
        if (std::isfinite(ly) && std::isfinite(hy)) sub_y = parabola(ly, best.sad, hy);
      }
      double rx = base_x + best.dx + sub_x - px;
      double ry = base_y + best.dy + sub_y - py;
      rx = std::clamp(rx, -static_cast<double>(r), static_cast<double>(r));
      ry = std::clamp(ry, -static_cast<double>(r), static_cast<double>(r));
      res_x.at(bx, by) = static_cast<float>(rx);
      res_y.at(bx, by) = static_cast<float>(ry);
    }
  }

  DirectionResult out{FlowField(w, h), PlaneF(w, h)};
  // Residuals are bilinear between block centres; rows are blended first, then columns.
  const float inv = 1.0f / static_cast<float>(bs);
  std::vector<int> col0(w), col1(w);
  std::vector<float> colf(w);
  for (int x = 0; x < w; ++x) {
    const float gx = std::clamp((static_cast<float>(x) + 0.5f) * inv - 0.5f, 0.0f, static_cast<float>(bw - 1));
    col0[x] = static_cast<int>(gx);
    col1[x] = std::min(col0[x] + 1, bw - 1);
    colf[x] = gx - static_cast<float>(col0[x]);
  }
  std::vector<float> row_x(bw), row_y(bw);
  for (int y = 0; y < h; ++y) {
    const float gy = std::clamp((static_cast<float>(y) + 0.5f) * inv - 0.5f, 0.0f, static_cast<float>(bh - 1));
    const int r0 = static_cast<int>(gy);
    const int r1 = std::min(r0 + 1, bh - 1);
    const float fy = gy - static_cast<float>(r0);
    for (int i = 0; i < bw; ++i) {
      row_x[i] = res_x.at(i, r0) * (1.0f - fy) + res_x.at(i, r1) * fy;
      row_y[i] = res_y.at(i, r0) * (1.0f - fy) + res_y.at(i, r1) * fy;
    }
    float* odx = &out.flow.dx.at(0, y);
    float* ody = &out.flow.dy.at(0, y);
    for (int x = 0; x < w; ++x) {
      const float f = colf[x];
      odx[x] = row_x[col0[x]] * (1.0f - f) + row_x[col1[x]] * f;
      ody[x] = row_y[col0[x]] * (1.0f - f) + row_y[col1[x]] * f;
    }
    if (search.pixel_refine) {
      for (int x = 0; x < w; ++x) {
        const int bxs[2] = {col0[x], col1[x]};
        const int bys[2] = {r0, r1};
        float cand_x[5] = {odx[x]}, cand_y[5] = {ody[x]};
        int n = 1;
        float spread = 0.0f;
        for (int j : bys) {
          for (int i : bxs) {
            const float cx = res_x.at(i, j), cy = res_y.at(i, j);
            spread = std::max(spread, std::abs(cx - odx[x]) + std::abs(cy - ody[x]));
            bool seen = false;
            for (int k = 1; k < n; ++k) seen = seen || (cand_x[k] == cx && cand_y[k] == cy);
            if (seen) continue;
            cand_x[n] = cx;
            cand_y[n] = cy;
            ++n;
          }
        }
        if (spread <= 0.5f) continue;
        const float px = prior ? prior->dx.at(x, y) : 0.0f;
        const float py = prior ? prior->dy.at(x, y) : 0.0f;
        float best_cost = std::numeric_limits<float>::infinity();
        int best = 0;
        for (int k = 0; k < n; ++k) {
          const float ox = px + cand_x[k], oy = py + cand_y[k];
          // Windows reaching outside the other view carry no evidence; keep the smooth vector.
          const bool inside = x >= R && y >= R && x + R < w && y + R < h && static_cast<float>(x - R) + ox >= 0.0f &&
                              static_cast<float>(x + R) + ox <= static_cast<float>(w - 1) &&
                              static_cast<float>(y - R) + oy >= 0.0f && static_cast<float>(y + R) + oy <= static_cast<float>(h - 1);
          if (k > 0 && !inside) continue;
          const float cost = window_sad(src, dst, x, y, ox, oy);
          if (cost < best_cost) {
            best_cost = cost;
            best = k;
          }
        }
        odx[x] = cand_x[best];
        ody[x] = cand_y[best];
      }
    }
    if (prior) {
      const float* pdx = &prior->dx.at(0, y);
      const float* pdy = &prior->dy.at(0, y);
      for (int x = 0; x < w; ++x) {
        odx[x] += pdx[x];
        ody[x] += pdy[x];
      }
    }
  }

  PlaneF raw(w, h);
  for (int y = 0; y < h; ++y) {
    const float* fdx = &out.flow.dx.at(0, y);
    const float* fdy = &out.flow.dy.at(0, y);
    const float* s = &src.at(0, y);
    float* o = &raw.at(0, y);
    for (int x = 0; x < w; ++x) {
      o[x] = std::abs(s[x] - BilinearTap(w, h, static_cast<float>(x) + fdx[x], static_cast<float>(y) + fdy[x])(dst));
    }
  }
  // 3x3 box with replicated borders, done separably.
  PlaneF rows(w, h);
  for (int y = 0; y < h; ++y) {
    const float* in = &raw.at(0, y);
    float* o = &rows.at(0, y);
    for (int x = 0; x < w; ++x) o[x] = in[std::max(x - 1, 0)] + in[x] + in[std::min(x + 1, w - 1)];
  }
  for (int y = 0; y < h; ++y) {
    const float* a = &rows.at(0, std::max(y - 1, 0));
    const float* b = &rows.at(0, y);
    const float* c = &rows.at(0, std::min(y + 1, h - 1));
    float* o = &out.error.at(0, y);
    for (int x = 0; x < w; ++x) o[x] = (a[x] + b[x] + c[x]) / 9.0f;
  }
  return out;
}

}  // namespace

FlowLevelResult estimate_flow_level(const PlaneF& left, const PlaneF& right,
                                    const std::optional<std::pair<FlowField, FlowField>>& prior,
                                    const BlockSearch& search) {
  if (!left.same_shape(right)) throw ShapeError("pyramid levels differ in size");
  if (search.block_size <= 0 || search.radius < 0) throw ConfigError("invalid block search parameters");
  if (prior && (prior->first.width != left.width || prior->first.height != left.height ||
                prior->second.width != left.width || prior->second.height != left.height)) {
    throw ShapeError("prior flow does not match level size");
  }
  auto lr = match_direction(left, right, prior ? &prior->first : nullptr, search);
  auto rl = match_direction(right, left, prior ? &prior->second : nullptr, search);
  FlowLevelResult out;
  out.mid_to_left = lr.flow.scaled(-0.5f);
  out.mid_to_right = rl.flow.scaled(-0.5f);
  out.left_to_right = std::move(lr.flow);
  out.right_to_left = std::move(rl.flow);
  out.error_left = std::move(lr.error);
  out.error_right = std::move(rl.error);
  return out;
}

OcclusionMask estimate_mask(const PlaneF& warped_left, const PlaneF& warped_right, const PlaneF& error_left,
                            const PlaneF& error_right, double epsilon) {
  if (!warped_left.same_shape(warped_right) || !warped_left.same_shape(error_left) ||
      !warped_left.same_shape(error_right)) {
    throw ShapeError("mask inputs differ in size");
  }
  OcclusionMask m{PlaneF(warped_left.width, warped_left.height)};
  for (std::size_t i = 0; i < m.weight.data.size(); ++i) {
    const double el = std::max(0.0f, error_left.data[i]);
    const double er = std::max(0.0f, error_right.data[i]);
    m.weight.data[i] = static_cast<float>((er + epsilon) / (el + er + 2.0 * epsilon));
  }
  return m;
}

namespace {

void check_mask(const OcclusionMask& mask) {
  for (const float v : mask.weight.data) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ContractViolation("mask value " + std::to_string(v) + " outside [0, 1]");
  }
}

PlaneF reduce_mask(const PlaneF& mask, int w, int h) {
  if (mask.width == w && mask.height == h) return mask;
  PlaneF out(w, h);
  const int fx = (mask.width + w - 1) / w;
  const int fy = (mask.height + h - 1) / h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float s = 0.0f;
      for (int j = 0; j < fy; ++j) {
        for (int i = 0; i < fx; ++i) s += mask.clamped(fx * x + i, fy * y + j);
      }
      out.at(x, y) = s / static_cast<float>(fx * fy);
    }
  }
  return out;
}

}  // namespace

PlaneF blend(const PlaneF& warped_left, const PlaneF& warped_right, const OcclusionMask& mask) {
  if (!warped_left.same_shape(warped_right) || !warped_left.same_shape(mask.weight)) {
    throw ShapeError("blend inputs differ in size");
  }
  check_mask(mask);
  PlaneF out(warped_left.width, warped_left.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const float m = mask.weight.data[i];
    out.data[i] = m * warped_left.data[i] + (1.0f - m) * warped_right.data[i];
  }
  return out;
}

Frame blend(const Frame& warped_left, const Frame& warped_right, const OcclusionMask& mask) {
  if (warped_left.width() != warped_right.width() || warped_left.height() != warped_right.height() ||
      warped_left.format() != warped_right.format() || warped_left.width() != mask.width() ||
      warped_left.height() != mask.height()) {
    throw ShapeError("blend inputs differ in size or format");
  }
  check_mask(mask);
  const auto lc = warped_left.components();
  const auto rc = warped_right.components();
  std::vector<Plane> out;
  for (std::size_t c = 0; c < lc.size(); ++c) {
    const PlaneF m = reduce_mask(mask.weight, lc[c].width, lc[c].height);
    Plane p(lc[c].width, lc[c].height);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const float a = lc[c].data[i];
      const float b = rc[c].data[i];
      p.data[i] = a == b ? lc[c].data[i] : clamp_u8(m.data[i] * a + (1.0f - m.data[i]) * b);
    }
    out.push_back(std::move(p));
  }
  return Frame::from_components(warped_left.format(), std::move(out), warped_left.timestamp());
}

}  // namespace fvv
