#include "ligs/synthetic_scene.hpp"

#include "ligs/camera_io.hpp"
#include "ligs/parallel.hpp"
#include "ligs/ply_io.hpp"
#include "ligs/rng.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace ligs {

namespace {

constexpr double kPi = 3.14159265358979323846;

ScenePlane make_plane(const Vec3& origin, const Vec3& eu, const Vec3& ev,
                      const Vec3& inside, const FaceTexture& tex) {
  ScenePlane p;
  p.origin = origin;
  p.eu = eu;
  p.ev = ev;
  p.normal = eu.cross(ev).normalized();
  // faces are one-sided only in the normal's meaning; flip toward the
  // viewer side so LiDAR/camera-facing checks stay simple
  if (p.normal.dot(inside - origin) < 0) p.normal = -p.normal;
  p.tex = tex;
  return p;
}

FaceTexture uniform(double gray) {
  FaceTexture t;
  t.color0 = Vec3::Constant(gray);
  return t;
}

FaceTexture checker(const Vec3& a, const Vec3& b, double period) {
  FaceTexture t;
  t.color0 = a;
  t.color1 = b;
  t.period = period;
  return t;
}

FaceTexture checker_gray(double a, double b, double period) {
  return checker(Vec3::Constant(a), Vec3::Constant(b), period);
}

// camera-from-world pose looking from eye toward target, world up +z,
// image y pointing down
CameraModel look_at_camera(const PipelineConfig& cfg, const Vec3& eye,
                           const Vec3& target) {
  CameraModel cam;
  cam.width = cfg.image_width;
  cam.height = cfg.image_height;
  cam.fx = cam.fy = cfg.focal_px;
  cam.cx = (cfg.image_width - 1) / 2.0;
  cam.cy = (cfg.image_height - 1) / 2.0;

  Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(Vec3::UnitZ());
  if (x.norm() < 1e-9) x = Vec3::UnitX();  // looking straight up/down
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 Rwc;  // world-from-camera columns
  Rwc.col(0) = x;
  Rwc.col(1) = y;
  Rwc.col(2) = z;
  cam.R = Rwc.transpose();
  cam.t = -cam.R * eye;
  return cam;
}

}  // namespace

Vec3 ScenePlane::color_at(double s, double t) const {
  if (tex.period <= 0.0) return tex.color0;
  const double su = s * eu.norm();
  const double tv = t * ev.norm();
  const int cs = static_cast<int>(std::floor(su / tex.period));
  const int ct = static_cast<int>(std::floor(tv / tex.period));
  return ((cs + ct) & 1) == 0 ? tex.color0 : tex.color1;
}

RayHit ray_cast(const std::vector<ScenePlane>& planes, const Vec3& origin,
                const Vec3& dir) {
  RayHit best;
  constexpr double kEps = 1e-9;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    const ScenePlane& pl = planes[i];
    const double denom = dir.dot(pl.normal);
    if (std::abs(denom) < 1e-12) continue;  // parallel
    const double t = (pl.origin - origin).dot(pl.normal) / denom;
    if (t <= kEps) continue;
    if (best.hit && t >= best.t) continue;
    const Vec3 hit = origin + t * dir;
    const Vec3 rel = hit - pl.origin;
    const double lu2 = pl.eu.squaredNorm(), lv2 = pl.ev.squaredNorm();
    const double s = rel.dot(pl.eu) / lu2;
    const double u = rel.dot(pl.ev) / lv2;
    if (s < 0.0 || s > 1.0 || u < 0.0 || u > 1.0) continue;
    best = {true, t, static_cast<int>(i), s, u};
  }
  return best;
}

std::vector<ScenePlane> make_preset_planes(const PipelineConfig& cfg) {
  const double E = cfg.scene_extent;
  const double H = cfg.scene_wall_height;
  std::vector<ScenePlane> planes;

  if (cfg.scene_preset == "corner_room") {
    // Two walls and a floor meeting at the origin, open on the far sides so
    // cameras see sky past the face edges. Gray-dominant checkers plus one
    // wall with clearly colored cells.
    const Vec3 inside(E * 0.5, E * 0.5, H * 0.5);
    planes.push_back(make_plane({0, 0, 0}, {E, 0, 0}, {0, E, 0}, inside,
                                checker_gray(0.60, 0.40, 0.8)));  // floor
    planes.push_back(make_plane({0, 0, 0}, {0, E, 0}, {0, 0, H}, inside,
                                checker_gray(0.55, 0.45, 0.8)));  // wall x=0
    planes.push_back(make_plane({0, 0, 0}, {E, 0, 0}, {0, 0, H}, inside,
                                checker({0.62, 0.44, 0.40}, {0.40, 0.48, 0.62}, 0.8)));
  } else if (cfg.scene_preset == "box_room") {
    // Closed box interior, near-uniform distinct grays per face. Every
    // interior ray hits a face, so views contain no sky.
    const Vec3 inside(0, 0, H * 0.5);
    const double h = E * 0.5;
    planes.push_back(make_plane({-h, -h, 0}, {E, 0, 0}, {0, E, 0}, inside, uniform(0.52)));  // floor
    planes.push_back(make_plane({-h, -h, H}, {E, 0, 0}, {0, E, 0}, inside, uniform(0.58)));  // ceiling
    planes.push_back(make_plane({-h, -h, 0}, {0, E, 0}, {0, 0, H}, inside, uniform(0.55)));  // x = -h
    planes.push_back(make_plane({h, -h, 0}, {0, E, 0}, {0, 0, H}, inside, uniform(0.60)));   // x = +h
    planes.push_back(make_plane({-h, -h, 0}, {E, 0, 0}, {0, 0, H}, inside, uniform(0.54)));  // y = -h
    planes.push_back(make_plane({-h, h, 0}, {E, 0, 0}, {0, 0, H}, inside, uniform(0.61)));   // y = +h
  } else if (cfg.scene_preset == "street") {
    // Ground strip between two facades, open at both ends and above.
    const Vec3 inside(0, 0, H * 0.5);
    const double h = E * 0.5;
    planes.push_back(make_plane({-E, -h, 0}, {2 * E, 0, 0}, {0, E, 0}, inside,
                                checker_gray(0.58, 0.42, 0.8)));
    planes.push_back(make_plane({-E, -h, 0}, {2 * E, 0, 0}, {0, 0, H}, inside,
                                checker_gray(0.56, 0.46, 0.8)));
    planes.push_back(make_plane({-E, h, 0}, {2 * E, 0, 0}, {0, 0, H}, inside,
                                checker({0.60, 0.45, 0.42}, {0.42, 0.48, 0.60}, 0.8)));
  } else {
    throw ConfigError("scene_preset", "unknown preset '" + cfg.scene_preset + "'");
  }
  return planes;
}

void ray_trace_view(const std::vector<ScenePlane>& planes,
                    const CameraModel& cam, ImageD& rgb, ImageD& sky_mask) {
  rgb = ImageD(cam.width, cam.height, 3, 0.0);
  sky_mask = ImageD(cam.width, cam.height, 1, 0.0);
  const Vec3 origin = cam.world_center();
  const Mat3 Rwc = cam.R.transpose();
  parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 dir = Rwc * cam.pixel_ray(x, y);
      const RayHit h = ray_cast(planes, origin, dir);
      if (!h.hit) continue;  // sky: black, mask 0
      const Vec3 c = planes[static_cast<std::size_t>(h.plane)].color_at(h.s, h.u);
      for (int ch = 0; ch < 3; ++ch) rgb.at(x, y, ch) = c[ch];
      sky_mask.at(x, y) = 1.0;
    }
  });
}

SceneData generate_scene(const PipelineConfig& cfg) {
  SceneData scene;
  scene.planes = make_preset_planes(cfg);

  // LiDAR cloud: area-weighted uniform samples per face, optional
  // along-normal noise
  Rng rng(mix_seed(cfg.seed, 0xC10Dull));
  for (const ScenePlane& pl : scene.planes) {
    const std::size_t n = static_cast<std::size_t>(
        std::llround(pl.area() * cfg.scene_lidar_density));
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 p = pl.point_at(rng.uniform(), rng.uniform());
      if (cfg.scene_noise > 0) p += pl.normal * rng.normal(0.0, cfg.scene_noise);
      scene.cloud.push_back(p);
    }
  }

  // camera ring
  const double E = cfg.scene_extent;
  const double H = cfg.scene_wall_height;
  for (int i = 0; i < cfg.scene_camera_count; ++i) {
    Vec3 eye, target;
    if (cfg.scene_preset == "corner_room") {
      // quarter arc in the open octant; each camera aims at the mirrored
      // azimuth with alternating depth and height, so the ring pans across
      // both walls and the full floor instead of stacking views on the corner
      const double a0 = 15.0 * kPi / 180.0, a1 = 75.0 * kPi / 180.0;
      const double a = cfg.scene_camera_count == 1
                           ? 0.5 * (a0 + a1)
                           : a0 + (a1 - a0) * i / (cfg.scene_camera_count - 1);
      eye = {std::cos(a) * cfg.scene_camera_radius,
             std::sin(a) * cfg.scene_camera_radius, cfg.scene_camera_height};
      const double b = a0 + a1 - a;
      const double depth = (i % 2 == 0) ? 0.45 : 0.80;
      const double tz = (i % 3 == 0) ? 0.55 * H : 0.15 * H;
      target = {std::cos(b) * depth * E, std::sin(b) * depth * E, tz};
    } else {
      // interior ring looking outward
      const double a = 2.0 * kPi * i / cfg.scene_camera_count;
      const Vec3 out(std::cos(a), std::sin(a), 0.0);
      eye = Vec3(0, 0, H * 0.5) + out * cfg.scene_camera_radius;
      target = eye + out * 2.0 - Vec3(0, 0, 0.1 * H);
    }
    scene.cameras.push_back(look_at_camera(cfg, eye, target));
    char name[32];
    std::snprintf(name, sizeof(name), "cam_%03d.png", i);
    scene.camera_names.emplace_back(name);
  }

  // ground-truth views
  scene.images.resize(scene.cameras.size());
  scene.sky_masks.resize(scene.cameras.size());
  for (std::size_t v = 0; v < scene.cameras.size(); ++v)
    ray_trace_view(scene.planes, scene.cameras[v], scene.images[v],
                   scene.sky_masks[v]);

  // reference surface samples on a regular grid per face
  for (const ScenePlane& pl : scene.planes) {
    const double lu = pl.eu.norm(), lv = pl.ev.norm();
    const int nu = std::max(1, static_cast<int>(std::floor(lu / cfg.scene_gt_spacing)));
    const int nv = std::max(1, static_cast<int>(std::floor(lv / cfg.scene_gt_spacing)));
    for (int a = 0; a < nu; ++a)
      for (int b = 0; b < nv; ++b) {
        scene.gt_points.push_back(
            pl.point_at((a + 0.5) / nu, (b + 0.5) / nv));
        scene.gt_normals.push_back(pl.normal);
      }
  }
  return scene;
}

void save_scene(const SceneData& scene, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  fs::create_directories(dir + "/images");
  fs::create_directories(dir + "/sky_masks");

  save_xyz_ply(scene.cloud, dir + "/cloud_raw.ply", /*binary=*/true);
  save_oriented_ply(scene.gt_points, scene.gt_normals, dir + "/gt_surface.ply",
                    /*binary=*/true);

  if (!scene.cameras.empty())
    save_intrinsics(scene.cameras[0], dir + "/intrinsics.txt");
  std::vector<NamedCamera> named;
  for (std::size_t v = 0; v < scene.cameras.size(); ++v)
    named.push_back({scene.camera_names[v], scene.cameras[v]});
  save_cameras(named, dir + "/cameras.txt");

  for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
    save_png(scene.images[v], dir + "/images/" + scene.camera_names[v]);
    save_png(scene.sky_masks[v], dir + "/sky_masks/" + scene.camera_names[v]);
  }
}

}  // namespace ligs
