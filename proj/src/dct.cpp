#include <cmath>
#include <numbers>

#include "fvv/codec.hpp"

namespace fvv {

namespace {

struct CosTable {
  double c[8][8];  // c[k][n] = a(k) cos((2n + 1) k pi / 16)
  CosTable() {
    for (int k = 0; k < 8; ++k) {
      const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) c[k][n] = a * std::cos((2 * n + 1) * k * std::numbers::pi / 16.0);
    }
  }
};

const CosTable& table() {
  static const CosTable t;
  return t;
}

}  // namespace

Block8 dct8_forward(const Block8& block) {
  const auto& t = table();
  Block8 tmp{}, out{};
  for (int y = 0; y < 8; ++y) {
    for (int k = 0; k < 8; ++k) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) s += t.c[k][n] * block[y * 8 + n];
      tmp[y * 8 + k] = s;
    }
  }
  for (int x = 0; x < 8; ++x) {
    for (int k = 0; k < 8; ++k) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) s += t.c[k][n] * tmp[n * 8 + x];
      out[k * 8 + x] = s;
    }
  }
  return out;
}

Block8 dct8_inverse(const Block8& coeffs) {
  const auto& t = table();
  Block8 tmp{}, out{};
  for (int x = 0; x < 8; ++x) {
    for (int n = 0; n < 8; ++n) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += t.c[k][n] * coeffs[k * 8 + x];
      tmp[n * 8 + x] = s;
    }
  }
  for (int y = 0; y < 8; ++y) {
    for (int n = 0; n < 8; ++n) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += t.c[k][n] * tmp[y * 8 + k];
      out[y * 8 + n] = s;
    }
  }
  return out;
}

namespace {

// One S-transform level over the first `len` entries of a strided line:
// lows to the front half, highs to the back half.
void haar_line_forward(std::int32_t* v, int stride, int len) {
  std::int32_t lo[4], hi[4];
  for (int i = 0; i < len / 2; ++i) {
    const std::int32_t a = v[(2 * i) * stride];
    const std::int32_t b = v[(2 * i + 1) * stride];
    hi[i] = a - b;
    lo[i] = b + (hi[i] >> 1);
  }
  for (int i = 0; i < len / 2; ++i) {
    v[i * stride] = lo[i];
    v[(len / 2 + i) * stride] = hi[i];
  }
}

void haar_line_inverse(std::int32_t* v, int stride, int len) {
  std::int32_t out[8] = {};
  for (int i = 0; i < len / 2; ++i) {
    const std::int32_t l = v[i * stride];
    const std::int32_t h = v[(len / 2 + i) * stride];
    const std::int32_t b = l - (h >> 1);
    out[2 * i] = h + b;
    out[2 * i + 1] = b;
  }
  for (int i = 0; i < len; ++i) v[i * stride] = out[i];
}

}  // namespace

IntBlock8 haar8_forward(const IntBlock8& block) {
  IntBlock8 v = block;
  for (int len = 8; len >= 2; len /= 2) {
    for (int y = 0; y < len; ++y) haar_line_forward(&v[y * 8], 1, len);
    for (int x = 0; x < len; ++x) haar_line_forward(&v[x], 8, len);
  }
  return v;
}

IntBlock8 haar8_inverse(const IntBlock8& coeffs) {
  IntBlock8 v = coeffs;
  for (int len = 2; len <= 8; len *= 2) {
    for (int x = 0; x < len; ++x) haar_line_inverse(&v[x], 8, len);
    for (int y = 0; y < len; ++y) haar_line_inverse(&v[y * 8], 1, len);
  }
  return v;
}

const std::array<int, 64>& zigzag_order() {
  static const std::array<int, 64> order = [] {
    std::array<int, 64> o{};
    int i = 0;
    for (int s = 0; s < 15; ++s) {
      if (s % 2 == 0) {
        for (int y = std::min(s, 7); y >= std::max(0, s - 7); --y) o[i++] = y * 8 + (s - y);
      } else {
        for (int x = std::min(s, 7); x >= std::max(0, s - 7); --x) o[i++] = (s - x) * 8 + x;
      }
    }
    return o;
  }();
  return order;
}

}  // namespace fvv
