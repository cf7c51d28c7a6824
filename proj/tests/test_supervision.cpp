#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "ligs/supervision.hpp"
#include "test_util.hpp"

using namespace ligs;

namespace {

GmmComponent4D flat_component(const Vec3& mean, double extent = 0.04) {
  GmmComponent4D c;
  c.mean << mean.x(), mean.y(), mean.z(), 0.5;
  c.cov = Vec4(extent, extent, 1e-8, 0.01).asDiagonal();  // normal along z
  return c;
}

// map of flat components in the z = 0 plane at the given xy centers
GmmMap flat_map(const std::vector<Vec2>& centers) {
  std::vector<GmmComponent4D> comps;
  for (const Vec2& c : centers)
    comps.push_back(flat_component(Vec3(c.x(), c.y(), 0.0)));
  return testutil::map_from_components(comps, 1.0);
}

double kernel(double dist, double sigma) {
  return std::exp(-dist * dist / (2.0 * sigma * sigma));
}

}  // namespace

TEST(ComponentKnn, ReturnsNearestWithKernelWeights) {
  const GmmMap map = flat_map({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  const Vec3 center(0.1, 0.0, 0.2);
  const NeighborEntry entry = knn_components(map, center, 2, 0.1);
  ASSERT_EQ(entry.comps.size(), 2u);
  EXPECT_FALSE(entry.truncated);
  EXPECT_EQ(entry.comps[0], 0);
  EXPECT_EQ(entry.comps[1], 1);
  const double d0 = (center - Vec3(0, 0, 0)).norm();
  const double d1 = (center - Vec3(1, 0, 0)).norm();
  EXPECT_NEAR(entry.omega[0], kernel(d0, 0.1), 1e-12);
  EXPECT_NEAR(entry.omega[1], kernel(d1, 0.1), 1e-12);
}

TEST(ComponentKnn, TruncatedWhenMapIsSmall) {
  const GmmMap map = flat_map({{0, 0}, {1, 0}});
  const NeighborEntry entry = knn_components(map, Vec3::Zero(), 4, 0.1);
  EXPECT_EQ(entry.comps.size(), 2u);
  EXPECT_TRUE(entry.truncated);

  const GmmMap empty = testutil::map_from_components({}, 1.0);
  const NeighborEntry none = knn_components(empty, Vec3::Zero(), 4, 0.1);
  EXPECT_TRUE(none.empty());
}

TEST(WeightedDistance, MatchesTheHandFormula) {
  const GmmMap map = flat_map({{0, 0}, {0.3, 0}});
  const Vec3 anchor(0.1, 0.0, 0.0);
  const NeighborEntry entry = knn_components(map, anchor, 2, 0.1);
  ASSERT_EQ(entry.comps.size(), 2u);

  // both planes are z = 0 with unit z normals, so the plane offset of any
  // probe is just its height; weights stay frozen at the anchor
  const Vec3 probe(0.7, -0.2, 0.25);
  const double want = (entry.omega[0] + entry.omega[1]) * 0.25;
  EXPECT_NEAR(weighted_distance(entry, map, probe), want, 1e-12);
  EXPECT_NEAR(weighted_distance(entry, map, anchor), 0.0, 1e-12);

  // below the plane counts the same as above
  EXPECT_NEAR(weighted_distance(entry, map, Vec3(0.7, -0.2, -0.25)), want,
              1e-12);
}

TEST(GmmLosses, OnPlaneAlignedSurfelIsLossFree) {
  const GmmMap map = flat_map({{0, 0}, {0.5, 0}, {0, 0.5}, {0.5, 0.5}});
  SurfelSet s;
  s.resize(1);
  s.p[0] = Vec3(0.25, 0.25, 0.0);
  s.t_u[0] = Vec3(1, 0, 0);
  s.t_v[0] = Vec3(0, 1, 0);
  s.r_u[0] = s.r_v[0] = 0.2;  // above phi: control points active, on-plane
  s.opacity[0] = 0.8;

  const GmmLossParams params;
  const std::vector<int> active = {0};
  const std::vector<NeighborEntry> queries = {
      knn_components(map, s.p[0], params.k, params.sigma)};
  const GmmLossBreakdown b = gmm_losses(s, active, queries, map, params);
  EXPECT_EQ(b.surfels_used, 1u);
  EXPECT_NEAR(b.l_dis, 0.0, 1e-12);
  EXPECT_NEAR(b.l_control, 0.0, 1e-12);
  EXPECT_NEAR(b.l_normal, 0.0, 1e-12);
  EXPECT_NEAR(b.l_gmm, 0.0, 1e-12);
}

TEST(GmmLosses, LiftedSurfelPaysTheDistanceTerm) {
  const GmmMap map = flat_map({{0, 0}});
  SurfelSet s;
  s.resize(1);
  const double h = 0.15;
  s.p[0] = Vec3(0.0, 0.0, h);
  s.t_u[0] = Vec3(1, 0, 0);
  s.t_v[0] = Vec3(0, 1, 0);
  s.r_u[0] = s.r_v[0] = 0.01;  // below phi: no control points
  s.opacity[0] = 0.8;

  const GmmLossParams params;
  const std::vector<NeighborEntry> queries = {
      knn_components(map, s.p[0], params.k, params.sigma)};
  const GmmLossBreakdown b = gmm_losses(s, {0}, queries, map, params);
  const double w = kernel(h, params.sigma);  // anchor is h above the mean
  EXPECT_NEAR(b.l_dis, w * h, 1e-12);
  EXPECT_EQ(b.l_control, 0.0);
  EXPECT_NEAR(b.l_normal, 0.0, 1e-12);  // normal still matches the plane
}

TEST(GmmLosses, NormalTermIsSignInvariantButTiltSensitive) {
  const GmmMap map = flat_map({{0, 0}});
  const GmmLossParams params;
  SurfelSet s;
  s.resize(1);
  s.p[0] = Vec3::Zero();
  s.r_u[0] = s.r_v[0] = 0.01;
  s.opacity[0] = 0.8;
  const std::vector<NeighborEntry> queries = {
      knn_components(map, s.p[0], params.k, params.sigma)};

  // flipped frame: normal -z, hemisphere alignment keeps the loss at zero
  s.t_u[0] = Vec3(0, 1, 0);
  s.t_v[0] = Vec3(1, 0, 0);
  EXPECT_NEAR(gmm_losses(s, {0}, queries, map, params).l_normal, 0.0, 1e-12);

  // tilted frame: n = (0, -sin t, cos t); single neighbor means nbar = +-z
  const double t = 0.4;
  s.t_u[0] = Vec3(1, 0, 0);
  s.t_v[0] = Vec3(0, std::cos(t), std::sin(t));
  const Vec3 n(0, -std::sin(t), std::cos(t));
  const double want = (n - Vec3::UnitZ()).cwiseAbs().sum() +
                      std::abs(1.0 - n.z());
  EXPECT_NEAR(gmm_losses(s, {0}, queries, map, params).l_normal, want, 1e-12);
}

TEST(GmmLosses, SurfelsWithEmptyNeighborhoodsAreSkipped) {
  const GmmMap map = flat_map({{0, 0}});
  SurfelSet s = testutil::random_surfels(2, 0, 3);
  const std::vector<int> active = {0, 1};
  std::vector<NeighborEntry> queries(2);  // both empty
  const GmmLossBreakdown b = gmm_losses(s, active, queries, map, GmmLossParams());
  EXPECT_EQ(b.surfels_used, 0u);
  EXPECT_EQ(b.l_gmm, 0.0);
}

TEST(GmmLossGradients, MatchesCentralFiniteDifferences) {
  // irregular map so no term is accidentally zero
  std::vector<GmmComponent4D> comps;
  Rng rng(17);
  for (int i = 0; i < 12; ++i) {
    GmmComponent4D c = flat_component(
        Vec3(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
             rng.uniform(-0.05, 0.05)));
    // tilt: rotate the covariance a little so normals vary
    const Mat3 R =
        (Eigen::AngleAxisd(rng.uniform(-0.4, 0.4), Vec3::UnitX()) *
         Eigen::AngleAxisd(rng.uniform(-0.4, 0.4), Vec3::UnitY()))
            .toRotationMatrix();
    c.cov.topLeftCorner<3, 3>() =
        R * c.cov.topLeftCorner<3, 3>() * R.transpose();
    comps.push_back(c);
  }
  const GmmMap map = testutil::map_from_components(comps, 1.0);

  SurfelSet s = testutil::random_surfels(4, 0, 18);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.p[i] = Vec3(0.3 * rng.normal(), 0.3 * rng.normal(), 0.2 * rng.normal());
    s.r_u[i] = 0.15;  // above phi so control terms are live
    s.r_v[i] = 0.12;
  }

  const GmmLossParams params;
  std::vector<int> active;
  std::vector<NeighborEntry> queries;
  for (std::size_t i = 0; i < s.size(); ++i) {
    active.push_back(static_cast<int>(i));
    queries.push_back(knn_components(map, s.p[i], params.k, params.sigma));
  }

  SurfelGrads grads;
  grads.resize_like(s);
  grads.set_zero();
  const double scale = 0.7;
  gmm_loss_gradients(s, active, queries, map, params, scale, false, grads);

  auto loss = [&](const SurfelSet& probe) {
    return scale * gmm_losses(probe, active, queries, map, params).l_gmm;
  };

  const double h = 1e-5;
  std::vector<double> analytic, fd;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto probe_axis = [&](double* slot, double g) {
      const double keep = *slot;
      *slot = keep + h;
      const double up = loss(s);
      *slot = keep - h;
      const double dn = loss(s);
      *slot = keep;
      analytic.push_back(g);
      fd.push_back((up - dn) / (2 * h));
    };
    SurfelSet& m = s;  // perturb in place, restore inside probe_axis
    for (int a = 0; a < 3; ++a) probe_axis(&m.p[i][a], grads.p[i][a]);
    for (int a = 0; a < 3; ++a) probe_axis(&m.t_u[i][a], grads.t_u[i][a]);
    for (int a = 0; a < 3; ++a) probe_axis(&m.t_v[i][a], grads.t_v[i][a]);
    probe_axis(&m.r_u[i], grads.r_u[i]);
    probe_axis(&m.r_v[i], grads.r_v[i]);
  }
  EXPECT_LT(testutil::rel_error(analytic, fd), 1e-6);
}

TEST(GmmLossGradients, ScaleIsLinear) {
  const GmmMap map = flat_map({{0, 0}, {0.4, 0.2}});
  SurfelSet s;
  s.resize(1);
  s.p[0] = Vec3(0.1, 0.1, 0.2);
  s.t_u[0] = Vec3(1, 0, 0);
  s.t_v[0] = Vec3(0, 1, 0);
  s.r_u[0] = s.r_v[0] = 0.2;
  s.opacity[0] = 0.5;
  const GmmLossParams params;
  const std::vector<NeighborEntry> queries = {
      knn_components(map, s.p[0], params.k, params.sigma)};

  SurfelGrads g1, g2;
  g1.resize_like(s);
  g2.resize_like(s);
  gmm_loss_gradients(s, {0}, queries, map, params, 1.0, false, g1);
  gmm_loss_gradients(s, {0}, queries, map, params, 2.5, false, g2);
  EXPECT_LT((g2.p[0] - 2.5 * g1.p[0]).norm(), 1e-12);
  EXPECT_NEAR(g2.r_u[0], 2.5 * g1.r_u[0], 1e-12);
}

TEST(GmmLossGradients, ProjectedFrameGradientsStayTangent) {
  const GmmMap map = flat_map({{0, 0}, {0.3, 0.1}, {0.1, 0.4}});
  SurfelSet s = testutil::random_surfels(3, 0, 21);
  for (std::size_t i = 0; i < s.size(); ++i)
    s.p[i] = Vec3(0.2 * (i + 1), 0.1, 0.15);
  const GmmLossParams params;
  std::vector<int> active;
  std::vector<NeighborEntry> queries;
  for (std::size_t i = 0; i < s.size(); ++i) {
    active.push_back(static_cast<int>(i));
    queries.push_back(knn_components(map, s.p[i], params.k, params.sigma));
  }
  SurfelGrads g;
  g.resize_like(s);
  gmm_loss_gradients(s, active, queries, map, params, 1.0, true, g);
  for (std::size_t i = 0; i < s.size(); ++i) {
    // Stiefel projection kills the symmetric part of T^T G
    const double sym01 =
        s.t_u[i].dot(g.t_v[i]) + s.t_v[i].dot(g.t_u[i]);
    EXPECT_NEAR(s.t_u[i].dot(g.t_u[i]), 0.0, 1e-9);
    EXPECT_NEAR(s.t_v[i].dot(g.t_v[i]), 0.0, 1e-9);
    EXPECT_NEAR(sym01, 0.0, 1e-9);
  }
}
