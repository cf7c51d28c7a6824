#pragma once

#include "ligs/config.hpp"
#include "ligs/image.hpp"
#include "ligs/types.hpp"

#include <string>
#include <vector>

namespace ligs {

// Checker texture on a rectangular face. period = 0 paints color0 only.
struct FaceTexture {
  Vec3 color0 = Vec3::Constant(0.5);
  Vec3 color1 = Vec3::Constant(0.5);
  double period = 0.0;  // meters, along both face axes
};

// Finite rectangle: origin corner plus two orthogonal edge vectors. The
// normal is unit eu x ev, re-oriented at construction toward the side the
// cameras live on.
struct ScenePlane {
  Vec3 origin = Vec3::Zero();
  Vec3 eu = Vec3::UnitX();
  Vec3 ev = Vec3::UnitY();
  Vec3 normal = Vec3::UnitZ();
  FaceTexture tex;

  Vec3 point_at(double s, double t) const { return origin + s * eu + t * ev; }
  Vec3 color_at(double s, double t) const;
  double area() const { return eu.norm() * ev.norm(); }
};

struct RayHit {
  bool hit = false;
  double t = 0.0;  // ray parameter
  int plane = -1;
  double s = 0.0, u = 0.0;  // face coordinates in [0,1]
};

// Nearest intersection of the ray origin + t*dir (t > eps) with any face.
RayHit ray_cast(const std::vector<ScenePlane>& planes, const Vec3& origin,
                const Vec3& dir);

struct SceneData {
  std::vector<ScenePlane> planes;
  std::vector<Vec3> cloud;            // LiDAR samples, world frame
  std::vector<CameraModel> cameras;
  std::vector<std::string> camera_names;
  std::vector<ImageD> images;         // rgb ground truth, [0,1]
  std::vector<ImageD> sky_masks;      // 1 channel; 1 = surface, 0 = sky
  std::vector<Vec3> gt_points;        // reference surface samples
  std::vector<Vec3> gt_normals;
};

// Face layouts for the presets (corner_room, box_room, street).
std::vector<ScenePlane> make_preset_planes(const PipelineConfig& cfg);

// Analytic ray-traced view: exact per-pixel ray vs face intersection, which
// keeps these images independent of the splat renderer.
void ray_trace_view(const std::vector<ScenePlane>& planes,
                    const CameraModel& cam, ImageD& rgb, ImageD& sky_mask);

// Full deterministic scene build from the config (geometry, LiDAR cloud,
// camera ring, GT images, sky masks, reference surface samples).
SceneData generate_scene(const PipelineConfig& cfg);

// Writes the on-disk scene layout consumed by the pipeline stages:
//   cloud_raw.ply, intrinsics.txt, cameras.txt, gt_surface.ply,
//   images/cam_XXX.png, sky_masks/cam_XXX.png
void save_scene(const SceneData& scene, const std::string& dir);

}  // namespace ligs
