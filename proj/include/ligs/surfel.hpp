#pragma once

#include "ligs/gmm.hpp"
#include "ligs/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ligs {

// Flat 2D Gaussian primitives in struct-of-arrays form. The tangent frame
// (t_u, t_v) is kept orthonormal; the normal is always derived as
// normalize(t_u x t_v) so slightly off-manifold states (mid-optimization)
// still yield a unit normal.
struct SurfelSet {
  std::vector<Vec3> p;
  std::vector<Vec3> t_u, t_v;
  std::vector<double> r_u, r_v;  // 1-sigma extents, meters, r_u >= r_v
  std::vector<double> opacity;   // [0, 1]
  int sh_degree = 0;             // 0 or 1
  // per surfel: (degree+1)^2 coefficients x 3 channels, coefficient-major
  std::vector<double> sh;

  std::size_t size() const { return p.size(); }
  int sh_coeffs() const { return (sh_degree + 1) * (sh_degree + 1); }
  int sh_stride() const { return 3 * sh_coeffs(); }

  Vec3 normal(std::size_t i) const {
    return t_u[i].cross(t_v[i]).normalized();
  }
  double* sh_at(std::size_t i) { return sh.data() + i * sh_stride(); }
  const double* sh_at(std::size_t i) const { return sh.data() + i * sh_stride(); }

  void resize(std::size_t n);
  void push_default();
  void remove_indices(const std::vector<int>& sorted_indices);
};

constexpr double kMinRadius = 1e-6;  // meters

// Real spherical harmonics, degree 0 and 1 normalization constants.
constexpr double kSh0 = 0.28209479177387814;
constexpr double kSh1 = 0.4886025119029199;

// View-dependent color for surfel i seen along unit world direction dir
// (camera toward surfel). Degree 0 ignores dir. Output is clamped at 0 but
// not at 1 (the optimizer handles overshoot through the loss).
Vec3 surfel_color(const SurfelSet& s, std::size_t i, const Vec3& dir);

// dColor/dCoeff factors for the same evaluation, one per SH coefficient.
void surfel_color_basis(int sh_degree, const Vec3& dir, double* basis);

// The flat Gaussian falloff exp(-(u^2+v^2)/2) in tangent coordinates.
inline double eval_gaussian(const Vec2& u) {
  return std::exp(-0.5 * (u.x() * u.x() + u.y() * u.y()));
}

// World point of tangent coordinates (u, v).
inline Vec3 surfel_point(const SurfelSet& s, std::size_t i, const Vec2& u) {
  return s.p[i] + s.r_u[i] * u.x() * s.t_u[i] + s.r_v[i] * u.y() * s.t_v[i];
}

struct RayIntersection {
  bool hit = false;
  Vec2 uv = Vec2::Zero();  // tangent coordinates in radius units
  double depth = 0.0;      // camera-frame z of the intersection
};

// Exact ray/plane intersection for the ray through continuous pixel
// coordinates (x, y). Miss when the ray is parallel to the surfel plane or
// the intersection is not in front of the camera.
RayIntersection ray_intersect(const SurfelSet& s, std::size_t i,
                              const CameraModel& cam, const Vec2& pixel);

// One surfel per component: center from the spatial mean, tangent frame
// from the spatial eigenvectors (t_u = major axis, normal = smallest), radii
// the square roots of the two in-plane eigenvalues, opacity 0.6 + 0.4*weight,
// DC color from the component's stored mean color.
SurfelSet init_from_gmm(const GmmMap& map, int sh_degree);

// Baseline initializer: a random subset of the colorized cloud with random
// tangent frames, isotropic radii from the 3-NN spacing, and low opacity.
SurfelSet init_random_subset(const PointCloud& cloud, std::size_t count,
                             std::uint64_t seed, int sh_degree);

// Checkpoint I/O: extended PLY with double-precision attributes so training
// state round-trips exactly. Header comments carry sh_degree and iteration.
void save_surfels(const SurfelSet& s, const std::string& path, int iteration);
SurfelSet load_surfels(const std::string& path, int* iteration = nullptr);

}  // namespace ligs
