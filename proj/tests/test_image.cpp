#include <gtest/gtest.h>

#include <cmath>

#include "ligs/image.hpp"
#include "ligs/rng.hpp"
#include "ligs/types.hpp"
#include "test_util.hpp"

using namespace ligs;
using testutil::TempDir;

namespace {

// Rounds through f32 for real. A plain static_cast in a tight loop gets its
// conversion pair elided by the SLP vectorizer at -O3 (seen with GCC 11);
// the volatile keeps the narrowing store honest.
double f32_trunc(double v) {
  volatile float f = static_cast<float>(v);
  return f;
}

}  // namespace

TEST(Image, IndexingIsRowMajorInterleaved) {
  ImageD img(4, 3, 2);
  img.at(2, 1, 1) = 7.5;
  EXPECT_EQ(img.data[(1 * 4 + 2) * 2 + 1], 7.5);
  EXPECT_EQ(img.pixel_count(), 12u);
}

TEST(Image, PngRoundTripRgb) {
  TempDir dir("tmp_image_png");
  ImageD img(17, 9, 3);
  Rng rng(3);
  for (double& v : img.data) v = rng.uniform();
  save_png(img, dir / "x.png");
  ImageD back = load_png(dir / "x.png");
  ASSERT_EQ(back.width, img.width);
  ASSERT_EQ(back.height, img.height);
  ASSERT_EQ(back.channels, 3);
  // 8-bit quantization: half a step of 1/255 plus rounding slack
  for (std::size_t i = 0; i < img.data.size(); ++i)
    ASSERT_NEAR(back.data[i], img.data[i], 0.5 / 255.0 + 1e-9);
}

TEST(Image, PngGrayscaleStaysSingleChannel) {
  TempDir dir("tmp_image_gray");
  ImageD img(5, 4, 1);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<double>(i) / (img.data.size() - 1);
  save_png(img, dir / "g.png");
  ImageD back = load_png(dir / "g.png");
  ASSERT_EQ(back.channels, 1);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    ASSERT_NEAR(back.data[i], img.data[i], 0.5 / 255.0 + 1e-9);
}

TEST(Image, PngClampsOutOfRange) {
  TempDir dir("tmp_image_clamp");
  ImageD img(2, 1, 1);
  img.at(0, 0) = -0.25;
  img.at(1, 0) = 1.75;
  save_png(img, dir / "c.png");
  ImageD back = load_png(dir / "c.png");
  EXPECT_EQ(back.at(0, 0), 0.0);
  EXPECT_EQ(back.at(1, 0), 1.0);
}

TEST(Image, DepthRoundTripIsF32Exact) {
  TempDir dir("tmp_image_depth");
  ImageD depth(6, 5, 1);
  Rng rng(5);
  for (double& v : depth.data)
    v = f32_trunc(rng.uniform(0.0, 50.0));
  save_depth(depth, dir / "d.depth");
  ImageD back = load_depth(dir / "d.depth");
  ASSERT_EQ(back.width, 6);
  ASSERT_EQ(back.height, 5);
  ASSERT_EQ(back.channels, 1);
  for (std::size_t i = 0; i < depth.data.size(); ++i)
    ASSERT_EQ(back.data[i], depth.data[i]);
}

TEST(Image, NormalsRoundTrip) {
  TempDir dir("tmp_image_norm");
  ImageD nrm(3, 4, 3);
  Rng rng(6);
  for (int y = 0; y < nrm.height; ++y)
    for (int x = 0; x < nrm.width; ++x) {
      Vec3 n(rng.normal(), rng.normal(), rng.normal());
      n.normalize();
      for (int c = 0; c < 3; ++c)
        nrm.at(x, y, c) = f32_trunc(n[c]);
    }
  save_normals(nrm, dir / "n.norm");
  ImageD back = load_normals(dir / "n.norm");
  ASSERT_EQ(back.channels, 3);
  for (std::size_t i = 0; i < nrm.data.size(); ++i)
    ASSERT_EQ(back.data[i], nrm.data[i]);
}

TEST(Image, MissingFileThrowsIoError) {
  EXPECT_THROW(load_png("no_such_dir/x.png"), IoError);
  EXPECT_THROW(load_depth("no_such_dir/x.depth"), IoError);
  EXPECT_THROW(load_normals("no_such_dir/x.norm"), IoError);
}

TEST(Image, DepthRejectsWrongMagic) {
  TempDir dir("tmp_image_magic");
  save_png(ImageD(2, 2, 1, 0.5), dir / "img.png");
  EXPECT_THROW(load_depth(dir / "img.png"), IoError);
}
