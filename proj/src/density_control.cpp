#include "ligs/density_control.hpp"

#include <cmath>
#include <stdexcept>

namespace ligs {

namespace {

double surface_kernel(double d, double tau) {
  if (!std::isfinite(d)) return 0.0;
  return std::exp(-d * d / (2.0 * tau * tau));
}

}  // namespace

double growth_score(double grad, double d, const DensityParams& params) {
  return (1.0 - params.omega_growth) * grad +
         params.omega_growth * params.omega_scale * surface_kernel(d, params.tau);
}

double prune_score(double opacity, double d, const DensityParams& params) {
  return opacity - params.omega_pruning * (1.0 - surface_kernel(d, params.tau));
}

DensityReport apply_density_control(
    SurfelSet& s, const std::vector<double>& grad,
    const std::function<double(const Vec3&)>& dist_at,
    const DensityParams& params, Rng& rng, std::vector<int>* source,
    std::vector<SurfelOrigin>* origin) {
  if (grad.size() != s.size())
    throw std::invalid_argument("density control: gradient count mismatch");

  DensityReport report;
  report.before = static_cast<int>(s.size());

  SurfelSet out;
  out.sh_degree = s.sh_degree;
  const int stride = s.sh_stride();
  if (source) source->clear();
  if (origin) origin->clear();

  auto emit = [&](std::size_t from, SurfelOrigin o, const Vec3& p, double ru,
                  double rv) {
    std::size_t j = out.size();
    out.resize(j + 1);
    out.p[j] = p;
    out.t_u[j] = s.t_u[from];
    out.t_v[j] = s.t_v[from];
    out.r_u[j] = ru;
    out.r_v[j] = rv;
    out.opacity[j] = s.opacity[from];
    for (int k = 0; k < stride; ++k)
      out.sh[j * stride + k] = s.sh[from * stride + k];
    if (source) source->push_back(static_cast<int>(from));
    if (origin) origin->push_back(o);
  };

  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = dist_at(s.p[i]);
    if (prune_score(s.opacity[i], d, params) < params.prune_threshold) {
      ++report.pruned;
      continue;
    }
    const double eps = growth_score(grad[i], d, params);
    if (eps <= params.growth_threshold) {
      emit(i, SurfelOrigin::kKept, s.p[i], s.r_u[i], s.r_v[i]);
      continue;
    }
    if (std::max(s.r_u[i], s.r_v[i]) < params.split_size_threshold) {
      // Clone: keep the original and add an identical copy next to it.
      emit(i, SurfelOrigin::kKept, s.p[i], s.r_u[i], s.r_v[i]);
      emit(i, SurfelOrigin::kCloneChild, s.p[i], s.r_u[i], s.r_v[i]);
      ++report.cloned;
    } else {
      // Split: two children with shrunk radii, centers drawn from the
      // surfel's own tangent-plane Gaussian.
      const double ru = std::max(s.r_u[i] / 1.6, kMinRadius);
      const double rv = std::max(s.r_v[i] / 1.6, kMinRadius);
      for (int child = 0; child < 2; ++child) {
        const double du = rng.normal() * s.r_u[i];
        const double dv = rng.normal() * s.r_v[i];
        Vec3 p = s.p[i] + du * s.t_u[i] + dv * s.t_v[i];
        emit(i, SurfelOrigin::kSplitChild, p, ru, rv);
      }
      ++report.split;
    }
  }

  report.after = static_cast<int>(out.size());
  s = std::move(out);
  return report;
}

}  // namespace ligs
