#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ligs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Thrown when a required input file is missing or unreadable. The CLI maps
// this to its own exit code, so keep the path around.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& path, const std::string& what)
      : std::runtime_error(what + ": " + path), path(path) {}
  std::string path;
};

// Thrown on an unknown or malformed config key.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(what + ": " + key), key(key) {}
  std::string key;
};

// Rec.601 luma of linear rgb in [0,1].
inline double luma(const Vec3& rgb) {
  return 0.299 * rgb.x() + 0.587 * rgb.y() + 0.114 * rgb.z();
}

struct ColorizedPoint {
  Vec3 p = Vec3::Zero();
  Vec3 rgb = Vec3::Zero();  // linear, in [0,1]
  double gray = 0.0;        // luma(rgb), kept alongside for 4D fitting
};

using PointCloud = std::vector<ColorizedPoint>;

// Pinhole camera. Pose is camera-from-world: x_cam = R * x_world + t.
struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 world_center() const { return -R.transpose() * t; }
  Vec3 to_camera(const Vec3& pw) const { return R * pw + t; }
  Vec3 to_world(const Vec3& pc) const { return R.transpose() * (pc - t); }

  // Projects a camera-space point with positive depth to pixel coordinates.
  Vec2 project(const Vec3& pc) const {
    return {fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy};
  }

  // Unnormalized camera-space ray direction through pixel center (x, y),
  // scaled so dir.z() == 1 and the ray parameter equals camera depth.
  Vec3 pixel_ray(double x, double y) const {
    return {(x - cx) / fx, (y - cy) / fy, 1.0};
  }
};

// Per-view colorized sub-cloud: the points of the global cloud visible in
// one camera, with that view's sampled colors. frame_id doubles as the
// deterministic seed salt for anything randomized per frame.
struct FrameCloud {
  std::uint64_t frame_id = 0;
  PointCloud points;
  CameraModel camera;
  bool warn_empty = false;  // set when the view saw no points
};

}  // namespace ligs
