#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ligs {

// Row-major, channel-interleaved raster with double samples. Color images
// live in [0,1]; depth and normal rasters use whatever the channel means.
struct ImageD {
  int width = 0, height = 0, channels = 0;
  std::vector<double> data;

  ImageD() = default;
  ImageD(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  double& at(int x, int y, int ch = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  double at(int x, int y, int ch = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
};

// 8-bit PNG, grayscale or rgb(a); alpha is dropped, 16-bit files are
// truncated to 8. Values come back in [0,1].
ImageD load_png(const std::string& path);

// Writes 8-bit PNG from a 1- or 3-channel image; samples are clamped to
// [0,1] and rounded.
void save_png(const ImageD& img, const std::string& path);

// Depth rasters: "LIGSDEPT" magic, u32 height, u32 width, then row-major
// f32 meters. Zero means "no return" for sensor-derived maps.
void save_depth(const ImageD& depth, const std::string& path);
ImageD load_depth(const std::string& path);

// Normal rasters: "LIGSNRM1" magic, u32 height, u32 width, then row-major
// interleaved f32 xyz per pixel (unit vectors, or zero where undefined).
void save_normals(const ImageD& normals, const std::string& path);
ImageD load_normals(const std::string& path);

}  // namespace ligs
