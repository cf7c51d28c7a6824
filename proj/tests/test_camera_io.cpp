#include <gtest/gtest.h>

#include <cmath>

#include "ligs/camera_io.hpp"
#include "ligs/rng.hpp"
#include "test_util.hpp"

using namespace ligs;
using testutil::TempDir;

namespace {

CameraModel sample_camera(std::uint64_t seed) {
  Rng rng(seed);
  CameraModel cam;
  cam.fx = 160.0;
  cam.fy = 158.5;
  cam.cx = 95.5;
  cam.cy = 96.25;
  cam.width = 192;
  cam.height = 192;
  Vec4 q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  cam.R = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
  cam.t = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
  return cam;
}

}  // namespace

TEST(CameraModel, PoseHelpersAreConsistent) {
  CameraModel cam = sample_camera(1);
  const Vec3 pw(0.3, -1.2, 0.7);
  EXPECT_LT((cam.to_world(cam.to_camera(pw)) - pw).norm(), 1e-12);
  EXPECT_LT(cam.to_camera(cam.world_center()).norm(), 1e-12);
}

TEST(CameraModel, ProjectMatchesPinholeFormula) {
  CameraModel cam = sample_camera(2);
  const Vec3 pc(0.4, -0.2, 2.5);
  const Vec2 px = cam.project(pc);
  EXPECT_NEAR(px.x(), cam.fx * pc.x() / pc.z() + cam.cx, 1e-12);
  EXPECT_NEAR(px.y(), cam.fy * pc.y() / pc.z() + cam.cy, 1e-12);
  // pixel_ray inverts project at unit depth scaling
  const Vec3 ray = cam.pixel_ray(px.x(), px.y());
  EXPECT_LT((ray * pc.z() - pc).norm(), 1e-12);
}

TEST(CameraIo, IntrinsicsRoundTrip) {
  TempDir dir("tmp_cam_intr");
  CameraModel cam = sample_camera(3);
  save_intrinsics(cam, dir / "intrinsics.txt");
  CameraModel back;
  load_intrinsics(dir / "intrinsics.txt", back);
  EXPECT_EQ(back.fx, cam.fx);
  EXPECT_EQ(back.fy, cam.fy);
  EXPECT_EQ(back.cx, cam.cx);
  EXPECT_EQ(back.cy, cam.cy);
  EXPECT_EQ(back.width, cam.width);
  EXPECT_EQ(back.height, cam.height);
}

TEST(CameraIo, CameraListRoundTrip) {
  TempDir dir("tmp_cam_list");
  std::vector<NamedCamera> cams;
  for (int i = 0; i < 4; ++i)
    cams.push_back({"view_" + std::to_string(i) + ".png",
                    sample_camera(10 + static_cast<std::uint64_t>(i))});
  save_intrinsics(cams[0].cam, dir / "intrinsics.txt");
  save_cameras(cams, dir / "cameras.txt");
  std::vector<NamedCamera> back =
      load_cameras(dir / "cameras.txt", dir / "intrinsics.txt");
  ASSERT_EQ(back.size(), cams.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    EXPECT_EQ(back[i].name, cams[i].name);
    EXPECT_LT((back[i].cam.R - cams[i].cam.R).norm(), 1e-9);
    EXPECT_LT((back[i].cam.t - cams[i].cam.t).norm(), 1e-9);
    EXPECT_EQ(back[i].cam.fx, cams[0].cam.fx);
    EXPECT_EQ(back[i].cam.width, cams[0].cam.width);
  }
}

TEST(CameraIo, RotationSurvivesAsRotation) {
  TempDir dir("tmp_cam_rot");
  std::vector<NamedCamera> cams = {{"a.png", sample_camera(20)}};
  save_intrinsics(cams[0].cam, dir / "intrinsics.txt");
  save_cameras(cams, dir / "cameras.txt");
  CameraModel back =
      load_cameras(dir / "cameras.txt", dir / "intrinsics.txt")[0].cam;
  EXPECT_LT((back.R * back.R.transpose() - Mat3::Identity()).norm(), 1e-9);
  EXPECT_NEAR(back.R.determinant(), 1.0, 1e-9);
}

TEST(CameraIo, MissingFilesThrow) {
  TempDir dir("tmp_cam_missing");
  CameraModel cam;
  EXPECT_THROW(load_intrinsics(dir / "absent.txt", cam), IoError);
  EXPECT_THROW(load_cameras(dir / "absent.txt", dir / "alsoabsent.txt"),
               IoError);
}
