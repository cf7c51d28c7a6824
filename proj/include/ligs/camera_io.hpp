#pragma once

#include "ligs/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ligs {

struct NamedCamera {
  std::string name;  // image file name, relative to the scene directory
  CameraModel cam;
};

// Intrinsics file: one line, "fx fy cx cy width height". All cameras of a
// scene share it.
void save_intrinsics(const CameraModel& cam, const std::string& path);
void load_intrinsics(const std::string& path, CameraModel& cam);

// Camera list: one line per view, "name tx ty tz qx qy qz qw" where the
// rotation quaternion and translation map world points into the camera
// frame (x_cam = R x_world + t).
void save_cameras(const std::vector<NamedCamera>& cams, const std::string& path);
std::vector<NamedCamera> load_cameras(const std::string& cameras_path,
                                      const std::string& intrinsics_path);

}  // namespace ligs
