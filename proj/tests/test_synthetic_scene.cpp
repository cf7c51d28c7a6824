#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "ligs/camera_io.hpp"
#include "ligs/ply_io.hpp"
#include "ligs/synthetic_scene.hpp"
#include "test_util.hpp"

using namespace ligs;
using testutil::TempDir;

namespace {

// point lies on some face: in-bounds face coordinates and zero offset
bool on_any_face(const std::vector<ScenePlane>& planes, const Vec3& p,
                 double tol) {
  for (const ScenePlane& pl : planes) {
    const Vec3 rel = p - pl.origin;
    if (std::abs(rel.dot(pl.normal)) > tol) continue;
    const double s = rel.dot(pl.eu) / pl.eu.squaredNorm();
    const double t = rel.dot(pl.ev) / pl.ev.squaredNorm();
    if (s >= -1e-9 && s <= 1 + 1e-9 && t >= -1e-9 && t <= 1 + 1e-9)
      return true;
  }
  return false;
}

PipelineConfig small_cfg(const std::string& preset) {
  PipelineConfig cfg;
  cfg.scene_preset = preset;
  cfg.scene_lidar_density = 600.0;
  cfg.scene_gt_spacing = 0.1;
  cfg.image_width = 48;
  cfg.image_height = 48;
  cfg.focal_px = 40.0;
  cfg.scene_camera_count = 4;
  return cfg;
}

}  // namespace

TEST(SyntheticScene, PresetsProduceOrientedFaces) {
  for (const char* preset : {"corner_room", "box_room", "street"}) {
    PipelineConfig cfg = small_cfg(preset);
    const auto planes = make_preset_planes(cfg);
    ASSERT_GE(planes.size(), 3u) << preset;
    for (const ScenePlane& pl : planes) {
      EXPECT_NEAR(pl.normal.norm(), 1.0, 1e-12);
      EXPECT_NEAR(std::abs(pl.normal.dot(pl.eu.normalized())), 0.0, 1e-12);
      EXPECT_NEAR(std::abs(pl.normal.dot(pl.ev.normalized())), 0.0, 1e-12);
      EXPECT_GT(pl.area(), 0.0);
    }
  }
  PipelineConfig cfg = small_cfg("no_such_preset");
  EXPECT_THROW(make_preset_planes(cfg), ConfigError);
}

TEST(SyntheticScene, RayCastHitsTheNearWall) {
  PipelineConfig cfg = small_cfg("box_room");  // extent 2 -> walls at +-1
  const auto planes = make_preset_planes(cfg);
  const RayHit hit = ray_cast(planes, Vec3(0, 0, 1), Vec3(1, 0, 0));
  ASSERT_TRUE(hit.hit);
  EXPECT_NEAR(hit.t, 1.0, 1e-12);
  EXPECT_NEAR(planes[hit.plane].normal.dot(Vec3::UnitX()), -1.0, 1e-12);

  // Straight up from the floor: ceiling at z = wall height.
  const RayHit up = ray_cast(planes, Vec3(0.2, -0.3, 0.5), Vec3(0, 0, 1));
  ASSERT_TRUE(up.hit);
  EXPECT_NEAR(up.t, cfg.scene_wall_height - 0.5, 1e-12);

  // Out the open top of the corner room: no face.
  const auto corner = make_preset_planes(small_cfg("corner_room"));
  EXPECT_FALSE(ray_cast(corner, Vec3(1, 1, 1), Vec3(0.3, 0.4, 1).normalized())
                   .hit);
}

TEST(SyntheticScene, CloudLiesOnFacesAtZeroNoise) {
  PipelineConfig cfg = small_cfg("corner_room");
  SceneData scene = generate_scene(cfg);
  ASSERT_GT(scene.cloud.size(), 500u);
  for (const Vec3& p : scene.cloud)
    ASSERT_TRUE(on_any_face(scene.planes, p, 1e-9));
}

TEST(SyntheticScene, GtSamplesLieOnFacesWithFaceNormals) {
  PipelineConfig cfg = small_cfg("box_room");
  SceneData scene = generate_scene(cfg);
  ASSERT_EQ(scene.gt_points.size(), scene.gt_normals.size());
  ASSERT_GT(scene.gt_points.size(), 100u);
  for (std::size_t i = 0; i < scene.gt_points.size(); i += 7) {
    ASSERT_TRUE(on_any_face(scene.planes, scene.gt_points[i], 1e-9));
    EXPECT_NEAR(scene.gt_normals[i].norm(), 1.0, 1e-12);
  }
}

TEST(SyntheticScene, ClosedBoxHasNoSkyAndFaceExactColors) {
  PipelineConfig cfg = small_cfg("box_room");
  cfg.scene_camera_radius = 0.5;  // ring strictly inside the box
  cfg.scene_camera_height = 1.0;
  SceneData scene = generate_scene(cfg);
  ASSERT_EQ(static_cast<int>(scene.images.size()), cfg.scene_camera_count);

  // Uniform face grays of the box preset; the tracer copies them exactly.
  const std::set<double> levels = {0.52, 0.54, 0.55, 0.58, 0.60, 0.61};
  for (std::size_t v = 0; v < scene.images.size(); ++v) {
    const ImageD& img = scene.images[v];
    const ImageD& sky = scene.sky_masks[v];
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        ASSERT_EQ(sky.at(x, y), 1.0) << "sky pixel inside a closed box";
        ASSERT_TRUE(levels.count(img.at(x, y, 0)) > 0)
            << "pixel gray " << img.at(x, y, 0);
        ASSERT_EQ(img.at(x, y, 0), img.at(x, y, 1));
      }
  }
}

TEST(SyntheticScene, SkyMaskMatchesRayCast) {
  PipelineConfig cfg = small_cfg("corner_room");
  cfg.focal_px = 20.0;  // wide view so the frame reaches past the wall edges
  SceneData scene = generate_scene(cfg);
  std::size_t sky_pixels = 0;
  for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
    const CameraModel& cam = scene.cameras[v];
    const Vec3 center = cam.world_center();
    for (int y = 0; y < cam.height; y += 5)
      for (int x = 0; x < cam.width; x += 5) {
        const Vec3 dir = cam.R.transpose() * cam.pixel_ray(x, y);
        const bool hit = ray_cast(scene.planes, center, dir).hit;
        ASSERT_EQ(scene.sky_masks[v].at(x, y) > 0.5, hit);
        sky_pixels += hit ? 0 : 1;
      }
  }
  EXPECT_GT(sky_pixels, 0u) << "an open corner scene should show some sky";
}

TEST(SyntheticScene, DeterministicPerSeed) {
  PipelineConfig cfg = small_cfg("corner_room");
  SceneData a = generate_scene(cfg);
  SceneData b = generate_scene(cfg);
  ASSERT_EQ(a.cloud.size(), b.cloud.size());
  for (std::size_t i = 0; i < a.cloud.size(); ++i)
    ASSERT_EQ(a.cloud[i], b.cloud[i]);

  cfg.seed = 2;
  SceneData c = generate_scene(cfg);
  bool any_differs = c.cloud.size() != a.cloud.size();
  for (std::size_t i = 0; !any_differs && i < a.cloud.size(); ++i)
    any_differs = a.cloud[i] != c.cloud[i];
  EXPECT_TRUE(any_differs);
}

TEST(SyntheticScene, NoiseMovesPointsOffFaces) {
  PipelineConfig cfg = small_cfg("corner_room");
  cfg.scene_noise = 0.01;
  SceneData scene = generate_scene(cfg);
  std::size_t off = 0;
  for (const Vec3& p : scene.cloud)
    if (!on_any_face(scene.planes, p, 1e-6)) ++off;
  EXPECT_GT(off, scene.cloud.size() / 2);
}

TEST(SyntheticScene, SaveSceneWritesTheDocumentedLayout) {
  TempDir dir("tmp_scene_save");
  PipelineConfig cfg = small_cfg("corner_room");
  SceneData scene = generate_scene(cfg);
  save_scene(scene, dir.str());

  namespace fs = std::filesystem;
  EXPECT_TRUE(fs::exists(dir / "cloud_raw.ply"));
  EXPECT_TRUE(fs::exists(dir / "gt_surface.ply"));
  EXPECT_TRUE(fs::exists(dir / "intrinsics.txt"));
  EXPECT_TRUE(fs::exists(dir / "cameras.txt"));
  EXPECT_TRUE(fs::exists(dir / "images/cam_000.png"));
  EXPECT_TRUE(fs::exists(dir / "sky_masks/cam_000.png"));

  EXPECT_EQ(load_xyz_ply(dir / "cloud_raw.ply").size(), scene.cloud.size());
  std::vector<Vec3> gp, gn;
  load_oriented_ply(dir / "gt_surface.ply", gp, gn);
  EXPECT_EQ(gp.size(), scene.gt_points.size());

  const auto cams = load_cameras(dir / "cameras.txt", dir / "intrinsics.txt");
  ASSERT_EQ(cams.size(), scene.cameras.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    EXPECT_LT((cams[i].cam.R - scene.cameras[i].R).norm(), 1e-9);
    EXPECT_LT((cams[i].cam.t - scene.cameras[i].t).norm(), 1e-9);
  }
}
