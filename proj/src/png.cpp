#include <png.h>

#include "fvv/client.hpp"

namespace fvv {

Frame to_rgb(const Frame& frame) {
  if (frame.format() == PixelFormat::RGB8) return frame;
  const int w = frame.width(), h = frame.height();
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  const auto y = frame.plane(0);
  if (frame.format() == PixelFormat::Gray8) {
    for (std::size_t i = 0; i < y.size(); ++i) rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = y[i];
    return Frame(w, h, PixelFormat::RGB8, {std::move(rgb)}, frame.timestamp());
  }
  const auto u = frame.plane(1), v = frame.plane(2);
  const int cw = (w + 1) / 2;
  // BT.601 full range.
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      const std::size_t c = static_cast<std::size_t>(yy / 2) * cw + xx / 2;
      const double Y = y[static_cast<std::size_t>(yy) * w + xx];
      const double U = u[c] - 128.0, V = v[c] - 128.0;
      std::uint8_t* p = &rgb[(static_cast<std::size_t>(yy) * w + xx) * 3];
      p[0] = clamp_u8(Y + 1.402 * V);
      p[1] = clamp_u8(Y - 0.344136 * U - 0.714136 * V);
      p[2] = clamp_u8(Y + 1.772 * U);
    }
  }
  return Frame(w, h, PixelFormat::RGB8, {std::move(rgb)}, frame.timestamp());
}

namespace {

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Frame& frame) {
  if (frame.empty()) throw ShapeError("cannot encode an empty frame");
  const bool gray = frame.format() == PixelFormat::Gray8;
  const Frame src = gray ? frame : to_rgb(frame);
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw IoError("PNG encoding failed");
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(src.width()), static_cast<png_uint_32>(src.height()), 8,
               gray ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 1);
  png_write_info(png, info);
  const auto data = src.plane(0);
  const std::size_t stride = static_cast<std::size_t>(src.width()) * (gray ? 1 : 3);
  for (int row = 0; row < src.height(); ++row) {
    png_write_row(png, const_cast<png_bytep>(data.data() + stride * static_cast<std::size_t>(row)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace fvv
