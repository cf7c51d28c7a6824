#pragma once

#include "ligs/image.hpp"
#include "ligs/types.hpp"

#include <vector>

namespace ligs {

// Pixel convention used everywhere: pixel (ix, iy) is centered at continuous
// image coordinates (ix, iy) and covers [ix-0.5, ix+0.5) x [iy-0.5, iy+0.5).
// A projection u maps to pixel lround(u).

// Projects the global cloud into every camera and returns one colorized
// frame per view. A point survives into a frame when it has positive depth,
// lands inside the raster, and is within zbuffer_rel_tol relative depth of
// the front-most point in its pixel. Color comes from the nearest pixel.
// Point order inside a frame follows global cloud order, which makes the
// z-buffer tie-break (and everything downstream) deterministic.
std::vector<FrameCloud> colorize_frames(const std::vector<Vec3>& global_cloud,
                                        const std::vector<CameraModel>& cameras,
                                        const std::vector<ImageD>& images,
                                        double zbuffer_rel_tol);

// LiDAR-derived supervision rasters for one frame's camera.
//   depth:  camera-frame z of the nearest member point per pixel, 0 if none
//   normal: camera-frame unit normal from a plane fit over the k nearest
//           world-frame neighbors of the front point, flipped toward the
//           camera; zero where invalid
//   mask:   2 channels, [0] = depth valid, [1] = normal valid
struct LidarImages {
  ImageD depth;
  ImageD normal;
  ImageD mask;
};

LidarImages lidar_depth_normal_images(const FrameCloud& frame, int normal_knn);

}  // namespace ligs
