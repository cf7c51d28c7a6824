#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ligs/density_control.hpp"
#include "test_util.hpp"

using namespace ligs;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SurfelSet one_surfel(double r_u, double r_v, double opacity) {
  SurfelSet s;
  s.resize(1);
  s.p[0] = Vec3(0.2, -0.1, 1.5);
  s.t_u[0] = Vec3(1, 0, 0);
  s.t_v[0] = Vec3(0, 1, 0);
  s.r_u[0] = r_u;
  s.r_v[0] = r_v;
  s.opacity[0] = opacity;
  s.sh_at(0)[0] = 0.3;
  s.sh_at(0)[1] = -0.2;
  s.sh_at(0)[2] = 0.1;
  return s;
}

}  // namespace

TEST(DensityScores, MatchTheScalarFormulas) {
  const DensityParams p;
  // on-surface, zero gradient: only the surface-attraction term survives
  EXPECT_NEAR(growth_score(0.0, 0.0, p), 8e-5, 1e-18);
  // far from the surface the kernel vanishes and the gradient is damped
  EXPECT_NEAR(growth_score(0.01, 1.0, p), 0.6 * 0.01, 1e-15);
  EXPECT_NEAR(growth_score(0.01, kInf, p), 0.6 * 0.01, 1e-15);
  // prune score keeps full opacity on the surface, docks 3e-3 far away
  EXPECT_NEAR(prune_score(0.7, 0.0, p), 0.7, 1e-15);
  EXPECT_NEAR(prune_score(0.7, 1.0, p), 0.7 - 0.003, 1e-15);
  EXPECT_NEAR(prune_score(0.7, kInf, p), 0.7 - 0.003, 1e-15);
  // generic point of the kernel
  const double d = 0.017;
  const double k = std::exp(-d * d / (2.0 * p.tau * p.tau));
  EXPECT_NEAR(growth_score(0.002, d, p), 0.6 * 0.002 + 0.4 * 2e-4 * k, 1e-15);
  EXPECT_NEAR(prune_score(0.5, d, p), 0.5 - 3e-3 * (1.0 - k), 1e-15);
}

TEST(DensityControl, PruningWinsOverGrowth) {
  SurfelSet s = one_surfel(0.01, 0.01, 0.006);
  const std::vector<double> grad = {1.0};  // huge growth signal
  DensityParams p;
  Rng rng(5);
  // far from the surface: score 0.006 - 0.003 < threshold 0.005
  const DensityReport r = apply_density_control(
      s, grad, [](const Vec3&) { return kInf; }, p, rng);
  EXPECT_EQ(r.pruned, 1);
  EXPECT_EQ(r.cloned, 0);
  EXPECT_EQ(r.split, 0);
  EXPECT_EQ(s.size(), 0u);
}

TEST(DensityControl, QuietSurfelIsKeptVerbatim) {
  SurfelSet s = one_surfel(0.02, 0.015, 0.9);
  const SurfelSet before = s;
  const std::vector<double> grad = {0.0};
  DensityParams p;
  Rng rng(6);
  std::vector<int> source;
  std::vector<SurfelOrigin> origin;
  // on-surface: growth score is exactly 8e-5, below the 2e-4 threshold
  const DensityReport r = apply_density_control(
      s, grad, [](const Vec3&) { return 0.0; }, p, rng, &source, &origin);
  EXPECT_EQ(r.after, 1);
  ASSERT_EQ(origin.size(), 1u);
  EXPECT_EQ(origin[0], SurfelOrigin::kKept);
  EXPECT_EQ(source[0], 0);
  EXPECT_EQ(s.p[0], before.p[0]);
  EXPECT_EQ(s.r_u[0], before.r_u[0]);
  EXPECT_EQ(s.sh, before.sh);
}

TEST(DensityControl, SmallGrowingSurfelIsCloned) {
  SurfelSet s = one_surfel(0.03, 0.02, 0.8);  // max radius below 0.05
  const SurfelSet before = s;
  const std::vector<double> grad = {0.01};
  DensityParams p;
  Rng rng(7);
  std::vector<int> source;
  std::vector<SurfelOrigin> origin;
  const DensityReport r = apply_density_control(
      s, grad, [](const Vec3&) { return 0.0; }, p, rng, &source, &origin);
  EXPECT_EQ(r.cloned, 1);
  EXPECT_EQ(r.after, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(origin[0], SurfelOrigin::kKept);
  EXPECT_EQ(origin[1], SurfelOrigin::kCloneChild);
  EXPECT_EQ(source[0], 0);
  EXPECT_EQ(source[1], 0);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_EQ(s.p[j], before.p[0]);
    EXPECT_EQ(s.t_u[j], before.t_u[0]);
    EXPECT_EQ(s.t_v[j], before.t_v[0]);
    EXPECT_EQ(s.r_u[j], before.r_u[0]);
    EXPECT_EQ(s.r_v[j], before.r_v[0]);
    EXPECT_EQ(s.opacity[j], before.opacity[0]);
    for (int k = 0; k < s.sh_stride(); ++k)
      EXPECT_EQ(s.sh_at(j)[k], before.sh_at(0)[k]);
  }
}

TEST(DensityControl, LargeGrowingSurfelSplitsInItsTangentPlane) {
  SurfelSet s = one_surfel(0.08, 0.06, 0.8);
  const SurfelSet before = s;
  const std::vector<double> grad = {0.01};
  DensityParams p;
  Rng rng(8);
  std::vector<int> source;
  std::vector<SurfelOrigin> origin;
  const DensityReport r = apply_density_control(
      s, grad, [](const Vec3&) { return 0.0; }, p, rng, &source, &origin);
  EXPECT_EQ(r.split, 1);
  EXPECT_EQ(r.after, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(origin[0], SurfelOrigin::kSplitChild);
  EXPECT_EQ(origin[1], SurfelOrigin::kSplitChild);
  const Vec3 n = before.normal(0);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(s.r_u[j], before.r_u[0] / 1.6, 1e-15);
    EXPECT_NEAR(s.r_v[j], before.r_v[0] / 1.6, 1e-15);
    // jittered inside the disk plane, not along the normal
    EXPECT_NEAR((s.p[j] - before.p[0]).dot(n), 0.0, 1e-12);
    EXPECT_EQ(s.opacity[j], before.opacity[0]);
  }
  EXPECT_GT((s.p[0] - s.p[1]).norm(), 1e-6);  // the two children separate

  // radii never collapse below the floor
  SurfelSet tiny = one_surfel(0.08, kMinRadius, 0.8);
  Rng rng2(9);
  apply_density_control(tiny, {0.01}, [](const Vec3&) { return 0.0; }, p,
                        rng2);
  ASSERT_EQ(tiny.size(), 2u);
  EXPECT_EQ(tiny.r_v[0], kMinRadius);
}

TEST(DensityControl, ReportReconcilesOnAMixedPopulation) {
  SurfelSet s = testutil::random_surfels(40, 0, 33);
  std::vector<double> grad(40, 0.0);
  Rng pick(34);
  for (std::size_t i = 0; i < 40; ++i) {
    grad[i] = pick.uniform(0.0, 6e-4);  // some grow, some do not
    // every third surfel is faint enough to be pruned wherever it sits
    s.opacity[i] = i % 3 == 0 ? pick.uniform(0.001, 0.004)
                              : pick.uniform(0.3, 0.9);
  }
  // distance alternates between on-surface and far away
  auto dist_at = [](const Vec3& q) { return q.x() > 0.0 ? 0.0 : 1.0; };
  DensityParams p;
  Rng rng(35);
  std::vector<int> source;
  std::vector<SurfelOrigin> origin;
  const DensityReport r =
      apply_density_control(s, grad, dist_at, p, rng, &source, &origin);
  EXPECT_EQ(r.before, 40);
  EXPECT_EQ(r.after, r.before + r.cloned + r.split - r.pruned);
  EXPECT_EQ(static_cast<int>(s.size()), r.after);
  EXPECT_EQ(source.size(), s.size());
  EXPECT_EQ(origin.size(), s.size());
  EXPECT_EQ(r.pruned, 14);  // the faint ones, every third of forty
  for (std::size_t j = 0; j < s.size(); ++j) {
    ASSERT_GE(source[j], 0);
    ASSERT_LT(source[j], 40);
  }
}

TEST(DensityControl, SameSeedGivesTheSameSplits) {
  DensityParams p;
  auto run = [&](std::uint64_t seed) {
    SurfelSet s = one_surfel(0.1, 0.08, 0.9);
    Rng rng(seed);
    apply_density_control(s, {0.01}, [](const Vec3&) { return 0.0; }, p, rng);
    return s;
  };
  const SurfelSet a = run(42), b = run(42), c = run(43);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.p[0], b.p[0]);
  EXPECT_EQ(a.p[1], b.p[1]);
  EXPECT_NE(a.p[0], c.p[0]);
}

TEST(DensityControl, GradientCountMismatchThrows) {
  SurfelSet s = one_surfel(0.02, 0.02, 0.9);
  DensityParams p;
  Rng rng(1);
  std::vector<double> grad(3, 0.0);
  EXPECT_THROW(apply_density_control(
                   s, grad, [](const Vec3&) { return 0.0; }, p, rng),
               std::invalid_argument);
}
