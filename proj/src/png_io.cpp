#include "mvf/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "mvf/errors.hpp"

namespace mvf {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

void open_read(PngReader& r, FILE* f, const std::filesystem::path& path,
               png_uint_32* w, png_uint_32* h, int* bit_depth, int* color) {
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f) != 8 || png_sig_cmp(sig, 0, 8)) {
    throw IoError("not a PNG file: " + path.string());
  }
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw IoError("png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(r.png))) {
    throw IoError("PNG decode error: " + path.string());
  }
  png_init_io(r.png, f);
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);
  *w = png_get_image_width(r.png, r.info);
  *h = png_get_image_height(r.png, r.info);
  *bit_depth = png_get_bit_depth(r.png, r.info);
  *color = png_get_color_type(r.png, r.info);
}

}  // namespace

Image<uint16_t> read_png16(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open: " + path.string());
  PngReader r;
  png_uint_32 w, h;
  int depth, color;
  open_read(r, f.get(), path, &w, &h, &depth, &color);
  if (setjmp(png_jmpbuf(r.png))) {
    throw IoError("PNG decode error: " + path.string());
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(r.png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (depth < 16) {
    png_set_expand_gray_1_2_4_to_8(r.png);
  } else {
    png_set_swap(r.png);  // PNG is big-endian on disk
  }
  png_read_update_info(r.png, r.info);
  const int out_depth = png_get_bit_depth(r.png, r.info);
  Image<uint16_t> img(static_cast<int>(w), static_cast<int>(h));
  if (out_depth == 16) {
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) {
      rows[y] = reinterpret_cast<png_bytep>(img.row(static_cast<int>(y)));
    }
    png_read_image(r.png, rows.data());
  } else {
    std::vector<uint8_t> buf(static_cast<size_t>(w) * h);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + static_cast<size_t>(y) * w;
    png_read_image(r.png, rows.data());
    for (size_t i = 0; i < buf.size(); ++i) img.data()[i] = buf[i];
  }
  png_read_end(r.png, nullptr);
  return img;
}

void write_png16(const std::filesystem::path& path, const Image<uint16_t>& img) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path.string());
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wr.png) throw IoError("png_create_write_struct failed");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(wr.png))) {
    throw IoError("PNG encode error: " + path.string());
  }
  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, img.width(), img.height(), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);
  png_set_swap(wr.png);
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) {
    rows[y] = reinterpret_cast<png_bytep>(const_cast<uint16_t*>(img.row(y)));
  }
  png_write_image(wr.png, rows.data());
  png_write_end(wr.png, nullptr);
}

Image<uint8_t> read_png8(const std::filesystem::path& path) {
  Image<uint16_t> wide = read_png16(path);
  Image<uint8_t> img(wide.width(), wide.height());
  for (size_t i = 0; i < wide.size(); ++i) {
    const uint16_t v = wide.data()[i];
    img.data()[i] = static_cast<uint8_t>(v > 255 ? v >> 8 : v);
  }
  return img;
}

void write_png8(const std::filesystem::path& path, const Image<uint8_t>& img) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path.string());
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wr.png) throw IoError("png_create_write_struct failed");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(wr.png))) {
    throw IoError("PNG encode error: " + path.string());
  }
  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, img.width(), img.height(), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) {
    rows[y] = const_cast<png_bytep>(img.row(y));
  }
  png_write_image(wr.png, rows.data());
  png_write_end(wr.png, nullptr);
}

void write_png_rgb(const std::filesystem::path& path, const Image<Rgb8>& img) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path.string());
  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wr.png) throw IoError("png_create_write_struct failed");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(wr.png))) {
    throw IoError("PNG encode error: " + path.string());
  }
  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, img.width(), img.height(), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);
  static_assert(sizeof(Rgb8) == 3);
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) {
    rows[y] = reinterpret_cast<png_bytep>(const_cast<Rgb8*>(img.row(y)));
  }
  png_write_image(wr.png, rows.data());
  png_write_end(wr.png, nullptr);
}

Image<Rgb8> read_png_rgb(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open: " + path.string());
  PngReader r;
  png_uint_32 w, h;
  int depth, color;
  open_read(r, f.get(), path, &w, &h, &depth, &color);
  if (setjmp(png_jmpbuf(r.png))) {
    throw IoError("PNG decode error: " + path.string());
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (!(color & PNG_COLOR_MASK_COLOR)) png_set_gray_to_rgb(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (depth == 16) png_set_strip_16(r.png);
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  png_read_update_info(r.png, r.info);
  Image<Rgb8> img(static_cast<int>(w), static_cast<int>(h));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) {
    rows[y] = reinterpret_cast<png_bytep>(img.row(static_cast<int>(y)));
  }
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return img;
}

}  // namespace mvf
