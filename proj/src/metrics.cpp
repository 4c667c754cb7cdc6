#include "fvv/metrics.hpp"

#include <cmath>
#include <vector>

namespace fvv {

namespace {

void require_same(const Plane& a, const Plane& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("metric inputs differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                     std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

void require_same(const Frame& a, const Frame& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw ShapeError("metric inputs differ in size");
}

}  // namespace

double psnr(const Plane& a, const Plane& b, const Plane* valid, int border) {
  require_same(a, b);
  if (valid) require_same(a, *valid);
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = border; y < a.height - border; ++y) {
    for (int x = border; x < a.width - border; ++x) {
      if (valid && !valid->at(x, y)) continue;
      const double d = static_cast<double>(a.at(x, y)) - static_cast<double>(b.at(x, y));
      sum += d * d;
      ++n;
    }
  }
  if (n == 0) throw ShapeError("no pixels left after border exclusion");
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sum / static_cast<double>(n);
  return 20.0 * std::log10(255.0 / std::sqrt(mse));
}

double psnr(const Frame& a, const Frame& b, int border) {
  require_same(a, b);
  return psnr(a.luma(), b.luma(), nullptr, border);
}

double psnr(const Frame& a, const Frame& b, const Plane& valid, int border) {
  require_same(a, b);
  return psnr(a.luma(), b.luma(), &valid, border);
}

std::array<double, SsimParams::kWindow> ssim_window() {
  std::array<double, SsimParams::kWindow> w{};
  const double sigma = SsimParams{}.sigma;
  double total = 0.0;
  for (int i = 0; i < SsimParams::kWindow; ++i) {
    const double d = i - SsimParams::kWindow / 2;
    w[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

double ssim(const Plane& a, const Plane& b, int border) {
  require_same(a, b);
  constexpr int k = SsimParams::kWindow;
  const int w = a.width - 2 * border;
  const int h = a.height - 2 * border;
  if (w < k || h < k) throw ShapeError("frame smaller than the 11x11 SSIM window");
  const SsimParams p;
  const double c1 = (p.k1 * p.max_value) * (p.k1 * p.max_value);
  const double c2 = (p.k2 * p.max_value) * (p.k2 * p.max_value);
  const auto g = ssim_window();

  // Horizontal pass over the cropped region, "valid" mode.
  const int ow = w - k + 1;
  const int oh = h - k + 1;
  std::vector<double> ha(static_cast<std::size_t>(ow) * h), hb(ha.size()), haa(ha.size()), hbb(ha.size()),
      hab(ha.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < k; ++i) {
        const double va = a.at(border + x + i, border + y);
        const double vb = b.at(border + x + i, border + y);
        sa += g[i] * va;
        sb += g[i] * vb;
        saa += g[i] * va * va;
        sbb += g[i] * vb * vb;
        sab += g[i] * va * vb;
      }
      const std::size_t idx = static_cast<std::size_t>(y) * ow + x;
      ha[idx] = sa;
      hb[idx] = sb;
      haa[idx] = saa;
      hbb[idx] = sbb;
      hab[idx] = sab;
    }
  }
  double total = 0.0;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
      for (int j = 0; j < k; ++j) {
        const std::size_t idx = static_cast<std::size_t>(y + j) * ow + x;
        ma += g[j] * ha[idx];
        mb += g[j] * hb[idx];
        maa += g[j] * haa[idx];
        mbb += g[j] * hbb[idx];
        mab += g[j] * hab[idx];
      }
      const double va = maa - ma * ma;
      const double vb = mbb - mb * mb;
      const double cov = mab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  return total / (static_cast<double>(ow) * oh);
}

double ssim(const Frame& a, const Frame& b, int border) {
  require_same(a, b);
  return ssim(a.luma(), b.luma(), border);
}

namespace {

using Grid = Image<double>;
constexpr double kBinomial[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

Grid blur(const Grid& in) {
  Grid tmp(in.width, in.height), out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int m = -2; m <= 2; ++m) s += kBinomial[m + 2] * in.clamped(x + m, y);
      tmp.at(x, y) = s;
    }
  }
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double s = 0.0;
      for (int m = -2; m <= 2; ++m) s += kBinomial[m + 2] * tmp.clamped(x, y + m);
      out.at(x, y) = s;
    }
  }
  return out;
}

Grid reduce(const Grid& in) {
  const Grid b = blur(in);
  Grid out(in.width / 2, in.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) out.at(x, y) = b.at(2 * x, 2 * y);
  }
  return out;
}

// Zero-insertion upsampling followed by the binomial kernel (gain 4), coarse indices clamped.
Grid expand(const Grid& coarse, int w, int h) {
  auto coarse_index = [](int j, int n) { return std::clamp(j >> 1, 0, n - 1); };
  Grid tmp(w, coarse.height);
  for (int y = 0; y < coarse.height; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int m = -2; m <= 2; ++m) {
        const int j = x - m;
        if (j & 1) continue;
        s += kBinomial[m + 2] * coarse.at(coarse_index(j, coarse.width), y);
      }
      tmp.at(x, y) = 2.0 * s;
    }
  }
  Grid out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int m = -2; m <= 2; ++m) {
        const int j = y - m;
        if (j & 1) continue;
        s += kBinomial[m + 2] * tmp.at(x, coarse_index(j, coarse.height));
      }
      out.at(x, y) = 2.0 * s;
    }
  }
  return out;
}

std::array<Grid, kLapLevels> laplacian_pyramid(const Plane& p) {
  std::array<Grid, kLapLevels> out;
  Grid g(p.width, p.height);
  for (std::size_t i = 0; i < p.data.size(); ++i) g.data[i] = p.data[i];
  for (int level = 0; level < kLapLevels - 1; ++level) {
    Grid next = reduce(g);
    const Grid up = expand(next, g.width, g.height);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] -= up.data[i];
    out[level] = std::move(g);
    g = std::move(next);
  }
  out[kLapLevels - 1] = std::move(g);
  return out;
}

}  // namespace

std::array<double, kLapLevels> lap_level_differences(const Plane& a, const Plane& b) {
  require_same(a, b);
  constexpr int factor = 1 << (kLapLevels - 1);
  if (a.width % factor != 0 || a.height % factor != 0) {
    throw ShapeError("Laplacian pyramid needs dimensions divisible by 16, got " + std::to_string(a.width) + "x" +
                     std::to_string(a.height));
  }
  const auto pa = laplacian_pyramid(a);
  const auto pb = laplacian_pyramid(b);
  std::array<double, kLapLevels> diffs{};
  for (int i = 0; i < kLapLevels; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < pa[i].data.size(); ++j) s += std::abs(pa[i].data[j] - pb[i].data[j]);
    diffs[i] = s / static_cast<double>(pa[i].data.size());
  }
  return diffs;
}

double lap_distance(const Plane& a, const Plane& b) {
  const auto diffs = lap_level_differences(a, b);
  const auto weights = lap_weights();
  double total = 0.0;
  for (int i = 0; i < kLapLevels; ++i) total += weights[i] * diffs[i];
  return total;
}

double lap_distance(const Frame& a, const Frame& b) {
  require_same(a, b);
  return lap_distance(a.luma(), b.luma());
}

MetricReport evaluate(const Frame& a, const Frame& b, int border) {
  MetricReport r;
  r.psnr = psnr(a, b, border);
  r.ssim = ssim(a, b, border);
  // The pyramid needs sides divisible by 16: use the centred such region inside the border.
  constexpr int factor = 1 << (kLapLevels - 1);
  const int w = (a.width() - 2 * border) / factor * factor;
  const int h = (a.height() - 2 * border) / factor * factor;
  if (w < factor || h < factor) throw ShapeError("frame too small for the Laplacian pyramid");
  const int x0 = (a.width() - w) / 2;
  const int y0 = (a.height() - h) / 2;
  const Plane la = a.luma(), lb = b.luma();
  Plane ca(w, h), cb(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      ca.at(x, y) = la.at(x0 + x, y0 + y);
      cb.at(x, y) = lb.at(x0 + x, y0 + y);
    }
  }
  r.lap_distance = lap_distance(ca, cb);
  r.excluded_border = border;
  return r;
}

}  // namespace fvv
