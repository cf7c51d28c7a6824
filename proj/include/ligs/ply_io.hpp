#pragma once

#include "ligs/types.hpp"

#include <string>
#include <vector>

namespace ligs {

// Generic single-element PLY support, enough for point payloads. Only the
// "vertex" element carries data; list properties are rejected.
struct PlyProperty {
  enum Type { F32, F64, U8, I32, U32 };
  std::string name;
  Type type = F32;
};

struct PlyData {
  std::vector<std::string> comments;
  std::vector<PlyProperty> properties;
  std::size_t count = 0;
  // count x properties.size() values, row-major, widened to double.
  std::vector<double> values;

  int find(const std::string& name) const;  // -1 when absent
  double value(std::size_t row, int col) const {
    return values[row * properties.size() + static_cast<std::size_t>(col)];
  }
};

PlyData read_ply(const std::string& path);
void write_ply(const PlyData& data, const std::string& path, bool binary);

// Colorized clouds: float x/y/z plus uchar red/green/blue on input; output
// adds float gray so downstream consumers get the intensity channel without
// recomputing it. Coordinates are stored as f32, so values survive a round
// trip bit-exactly only when they are f32-representable (everything we
// write has been through f32 once already).
PointCloud load_ply(const std::string& path);
void save_ply(const PointCloud& cloud, const std::string& path, bool binary);

// Bare geometry clouds (no color yet): float x/y/z.
void save_xyz_ply(const std::vector<Vec3>& points, const std::string& path,
                  bool binary);
std::vector<Vec3> load_xyz_ply(const std::string& path);

// Oriented samples for surface reconstruction: float x/y/z/nx/ny/nz.
void save_oriented_ply(const std::vector<Vec3>& points,
                       const std::vector<Vec3>& normals,
                       const std::string& path, bool binary);
void load_oriented_ply(const std::string& path, std::vector<Vec3>& points,
                       std::vector<Vec3>& normals);

}  // namespace ligs
