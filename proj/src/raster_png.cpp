// SPDX-License-Identifier: Apache-2.0
#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstring>
#include <cstdio>
#include <memory>

#include "pillarstat/error.hpp"
#include "pillarstat/ingest.hpp"

namespace pillarstat {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Everything touched between setjmp and longjmp is plain data owned by the
// caller, so unwinding through libpng never skips a destructor.
struct PngDecode {
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  std::vector<png_bytep> rows;
};

bool decode_header(std::FILE* f, png_structp png, png_infop info, PngDecode& d) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_read_info(png, info);
  d.width = png_get_image_width(png, info);
  d.height = png_get_image_height(png, info);
  d.bit_depth = png_get_bit_depth(png, info);
  d.color_type = png_get_color_type(png, info);
  return true;
}

bool decode_rows(png_structp png, PngDecode& d) {
  if (setjmp(png_jmpbuf(png))) return false;
  if (d.bit_depth == 16) png_set_swap(png);  // host order for uint16 reads (little-endian hosts)
  png_read_image(png, d.rows.data());
  png_read_end(png, nullptr);
  return true;
}

bool encode_rows(std::FILE* f, png_structp png, png_infop info, int width, int height, int bit_depth,
                 std::vector<png_bytep>& rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, f);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), bit_depth, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

Raster read_raster(const std::filesystem::path& path, double scale) {
  if (!(scale > 0)) throw Error(ErrorKind::InvalidArgument, "raster scale must be positive");
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorKind::UnsupportedFormat, path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::IoFailure, "libpng initialisation failed");
  }
  png_set_sig_bytes(png, 8);

  PngDecode d;
  if (!decode_header(f.get(), png, info, d)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::IoFailure, "corrupt PNG header in " + path.string());
  }
  if (d.color_type != PNG_COLOR_TYPE_GRAY || (d.bit_depth != 8 && d.bit_depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorKind::UnsupportedFormat,
                path.string() + ": expected single-channel 8- or 16-bit grayscale");
  }

  const std::size_t bytes_per_px = d.bit_depth / 8;
  std::vector<unsigned char> pixels(std::size_t(d.width) * d.height * bytes_per_px);
  d.rows.resize(d.height);
  for (png_uint_32 r = 0; r < d.height; ++r) d.rows[r] = pixels.data() + std::size_t(r) * d.width * bytes_per_px;
  const bool ok = decode_rows(png, d);
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw Error(ErrorKind::IoFailure, "corrupt PNG data in " + path.string());

  Raster out;
  out.width = int(d.width);
  out.height = int(d.height);
  out.values.resize(std::size_t(d.width) * d.height);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double stored;
    if (d.bit_depth == 16) {
      std::uint16_t v;
      std::memcpy(&v, pixels.data() + 2 * i, 2);
      stored = v;
    } else {
      stored = pixels[i];
    }
    out.values[i] = stored / scale;
  }
  return out;
}

void write_raster_png(const std::filesystem::path& path, int width, int height,
                      const std::vector<std::uint16_t>& stored, int bit_depth) {
  if ((bit_depth != 8 && bit_depth != 16) || width <= 0 || height <= 0 ||
      stored.size() != std::size_t(width) * height) {
    throw Error(ErrorKind::InvalidArgument, "bad raster dimensions or bit depth");
  }
  const std::size_t bpp = std::size_t(bit_depth) / 8;
  std::vector<unsigned char> pixels(stored.size() * bpp);
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (bit_depth == 16) {
      std::memcpy(pixels.data() + 2 * i, &stored[i], 2);
    } else {
      pixels[i] = static_cast<unsigned char>(std::min<std::uint16_t>(stored[i], 255));
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) rows[std::size_t(r)] = pixels.data() + std::size_t(r) * width * bpp;

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error(ErrorKind::IoFailure, "cannot open for writing " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::IoFailure, "libpng initialisation failed");
  }
  const bool ok = encode_rows(f.get(), png, info, width, height, bit_depth, rows);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw Error(ErrorKind::IoFailure, "PNG encode failed for " + path.string());
}

}  // namespace pillarstat
