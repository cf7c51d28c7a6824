#include "ligs/image.hpp"

#include "ligs/types.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace ligs {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// f32 rasters share the layout; only the magic and channel count differ.
void save_f32_raster(const ImageD& img, const std::string& path,
                     const char magic[8], int channels) {
  if (img.channels != channels)
    throw std::runtime_error("raster channel count mismatch for " + path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path, "cannot open for writing");
  os.write(magic, 8);
  write_u32(os, static_cast<std::uint32_t>(img.height));
  write_u32(os, static_cast<std::uint32_t>(img.width));
  std::vector<float> row(static_cast<std::size_t>(img.width) * channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < channels; ++c)
        row[static_cast<std::size_t>(x) * channels + c] =
            static_cast<float>(img.at(x, y, c));
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!os) throw IoError(path, "short write");
}

ImageD load_f32_raster(const std::string& path, const char magic[8],
                       int channels) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path, "cannot open");
  char got[8];
  is.read(got, 8);
  if (!is || std::memcmp(got, magic, 8) != 0)
    throw IoError(path, "bad raster magic");
  const std::uint32_t h = read_u32(is);
  const std::uint32_t w = read_u32(is);
  if (!is || h == 0 || w == 0 || h > 1u << 20 || w > 1u << 20)
    throw IoError(path, "bad raster header");
  ImageD img(static_cast<int>(w), static_cast<int>(h), channels);
  std::vector<float> row(static_cast<std::size_t>(w) * channels);
  for (std::uint32_t y = 0; y < h; ++y) {
    is.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!is) throw IoError(path, "truncated raster");
    for (std::uint32_t x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(static_cast<int>(x), static_cast<int>(y), c) =
            row[static_cast<std::size_t>(x) * channels + c];
  }
  return img;
}

}  // namespace

ImageD load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError(path, "cannot open");

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path, "png decode failed");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_expand(png);  // palette -> rgb, gray<8 -> 8
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int c = static_cast<int>(png_get_channels(png, info));
  if (c != 1 && c != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path, "unsupported png channel count");
  }

  std::vector<png_byte> raw(static_cast<std::size_t>(w) * h * c);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = raw.data() + static_cast<std::size_t>(y) * w * c;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageD img(w, h, c);
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
  return img;
}

void save_png(const ImageD& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw std::runtime_error("save_png expects 1 or 3 channels");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError(path, "cannot open for writing");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path, "png encode failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        const double v = std::clamp(img.at(x, y, c), 0.0, 1.0);
        row[static_cast<std::size_t>(x) * img.channels + c] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_depth(const ImageD& depth, const std::string& path) {
  save_f32_raster(depth, path, "LIGSDEPT", 1);
}

ImageD load_depth(const std::string& path) {
  return load_f32_raster(path, "LIGSDEPT", 1);
}

void save_normals(const ImageD& normals, const std::string& path) {
  save_f32_raster(normals, path, "LIGSNRM1", 3);
}

ImageD load_normals(const std::string& path) {
  return load_f32_raster(path, "LIGSNRM1", 3);
}

}  // namespace ligs
