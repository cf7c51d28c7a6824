#pragma once

#include <functional>
#include <vector>

#include "ligs/rng.hpp"
#include "ligs/surfel.hpp"

namespace ligs {

struct DensityParams {
  double omega_growth = 0.4;    // blend between gradient and surface pull
  double omega_scale = 2e-4;    // magnitude of the surface-attraction term
  double omega_pruning = 3e-3;  // opacity penalty far from the surface
  double tau = 0.01;            // meters; falloff of the distance kernel
  double growth_threshold = 2e-4;
  double prune_threshold = 5e-3;
  int interval = 100;
  int start_iter = 500;
  int stop_iter = 15000;
  double split_size_threshold = 0.05;  // meters; clone below, split above
};

// (1 - w_g) * grad + w_g * w_s * exp(-d^2 / (2 tau^2)). grad is the
// windowed mean of the screen-space positional gradient norm; d is the
// weighted map distance at the surfel center.
double growth_score(double grad, double d, const DensityParams& params);

// opacity - w_p * (1 - exp(-d^2 / (2 tau^2))). On-surface surfels keep
// their full opacity as the score, so they are never pruned by distance.
double prune_score(double opacity, double d, const DensityParams& params);

struct DensityReport {
  int before = 0, after = 0;
  int cloned = 0, split = 0, pruned = 0;
};

// Action taken per output surfel, for optimizer-state bookkeeping.
enum class SurfelOrigin : std::uint8_t { kKept, kCloneChild, kSplitChild };

// Grows (clone or split by size), then prunes. grad holds the averaged
// positional gradient per surfel; dist_at evaluates the weighted map
// distance at a point (infinity when the map is empty nearby). source maps
// each output surfel to the input surfel it came from; origin tells whether
// its optimizer state may be carried over (kKept) or must be reset.
DensityReport apply_density_control(
    SurfelSet& s, const std::vector<double>& grad,
    const std::function<double(const Vec3&)>& dist_at,
    const DensityParams& params, Rng& rng, std::vector<int>* source = nullptr,
    std::vector<SurfelOrigin>* origin = nullptr);

}  // namespace ligs

