#include <gtest/gtest.h>

#include <cmath>

#include "ligs/ply_io.hpp"
#include "ligs/rng.hpp"
#include "test_util.hpp"

using namespace ligs;
using testutil::TempDir;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  PointCloud cloud(n);
  Rng rng(seed);
  for (auto& pt : cloud) {
    // store f32-representable values so the round trip is exact
    for (int c = 0; c < 3; ++c)
      pt.p[c] = static_cast<float>(rng.uniform(-10.0, 10.0));
    for (int c = 0; c < 3; ++c)
      pt.rgb[c] = std::round(rng.uniform() * 255.0) / 255.0;
    pt.gray = luma(pt.rgb);
  }
  return cloud;
}

}  // namespace

TEST(PlyIo, ColorizedRoundTripBinary) {
  TempDir dir("tmp_ply_colorized_bin");
  PointCloud cloud = random_cloud(137, 1);
  save_ply(cloud, dir / "c.ply", true);
  PointCloud back = load_ply(dir / "c.ply");
  ASSERT_EQ(back.size(), cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(back[i].p, cloud[i].p);
    for (int c = 0; c < 3; ++c)
      EXPECT_NEAR(back[i].rgb[c], cloud[i].rgb[c], 0.5 / 255.0);
    EXPECT_NEAR(back[i].gray, cloud[i].gray, 1e-6);
  }
}

TEST(PlyIo, ColorizedRoundTripAscii) {
  TempDir dir("tmp_ply_colorized_asc");
  PointCloud cloud = random_cloud(23, 2);
  save_ply(cloud, dir / "c.ply", false);
  PointCloud back = load_ply(dir / "c.ply");
  ASSERT_EQ(back.size(), cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c)
      EXPECT_NEAR(back[i].p[c], cloud[i].p[c], 1e-5);
    for (int c = 0; c < 3; ++c)
      EXPECT_NEAR(back[i].rgb[c], cloud[i].rgb[c], 0.5 / 255.0);
  }
}

TEST(PlyIo, XyzRoundTrip) {
  TempDir dir("tmp_ply_xyz");
  std::vector<Vec3> pts;
  Rng rng(3);
  for (int i = 0; i < 64; ++i)
    pts.emplace_back(static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal()));
  save_xyz_ply(pts, dir / "p.ply", true);
  std::vector<Vec3> back = load_xyz_ply(dir / "p.ply");
  ASSERT_EQ(back.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(back[i], pts[i]);
}

TEST(PlyIo, OrientedRoundTrip) {
  TempDir dir("tmp_ply_oriented");
  std::vector<Vec3> pts, nrms;
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    pts.emplace_back(static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal()));
    Vec3 n(rng.normal(), rng.normal(), rng.normal());
    n.normalize();
    nrms.emplace_back(static_cast<float>(n.x()), static_cast<float>(n.y()),
                      static_cast<float>(n.z()));
  }
  save_oriented_ply(pts, nrms, dir / "o.ply", true);
  std::vector<Vec3> bp, bn;
  load_oriented_ply(dir / "o.ply", bp, bn);
  ASSERT_EQ(bp.size(), pts.size());
  ASSERT_EQ(bn.size(), nrms.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(bp[i], pts[i]);
    EXPECT_EQ(bn[i], nrms[i]);
  }
}

TEST(PlyIo, GenericReaderSeesProperties) {
  TempDir dir("tmp_ply_generic");
  PointCloud cloud = random_cloud(5, 5);
  save_ply(cloud, dir / "c.ply", true);
  PlyData data = read_ply(dir / "c.ply");
  EXPECT_EQ(data.count, 5u);
  EXPECT_GE(data.find("x"), 0);
  EXPECT_GE(data.find("red"), 0);
  EXPECT_GE(data.find("gray"), 0);
  EXPECT_EQ(data.find("bogus"), -1);
  const int x = data.find("x");
  EXPECT_NEAR(data.value(2, x), cloud[2].p.x(), 1e-6);
}

TEST(PlyIo, MissingFileThrows) {
  EXPECT_THROW(load_ply("nope/missing.ply"), IoError);
  EXPECT_THROW(load_xyz_ply("nope/missing.ply"), IoError);
}

TEST(PlyIo, GarbageHeaderThrows) {
  TempDir dir("tmp_ply_garbage");
  {
    std::FILE* f = std::fopen((dir / "bad.ply").c_str(), "w");
    std::fputs("not a ply header\n", f);
    std::fclose(f);
  }
  EXPECT_THROW(read_ply(dir / "bad.ply"), IoError);
}

TEST(PlyIo, EmptyCloudRoundTrips) {
  TempDir dir("tmp_ply_empty");
  save_xyz_ply({}, dir / "e.ply", true);
  EXPECT_TRUE(load_xyz_ply(dir / "e.ply").empty());
}
