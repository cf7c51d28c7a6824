#pragma once

#include "ligs/gmm.hpp"
#include "ligs/spatial_hash.hpp"
#include "ligs/surfel.hpp"

#include <vector>

namespace ligs {

// Per-surfel cached neighborhood: component indices with kernel weights
// anchored at the surfel center at refresh time. Weights and the assignment
// are treated as constants between refreshes, also inside the gradients.
struct NeighborEntry {
  std::vector<int> comps;
  std::vector<double> omega;
  bool truncated = false;  // fewer than K components existed near the center
  bool empty() const { return comps.empty(); }
};

struct GmmLossParams {
  double sigma = 0.1;   // kernel width of omega
  double alpha = 0.5;   // control-point offset in radius units
  double phi = 0.05;    // radius threshold for shape control, meters
  int k = 4;            // neighbor count
};

// Exact K-nearest-component queries over the frozen map via the hashed-grid
// ring search.
class ComponentKnn {
 public:
  explicit ComponentKnn(const GmmMap& map);
  NeighborEntry query(const Vec3& center, int k, double sigma) const;

 private:
  const GmmMap& map_;
  PointGrid grid_;
};

// Convenience single-shot form of the query.
NeighborEntry knn_components(const GmmMap& map, const Vec3& center, int k,
                             double sigma);

// Eq-style weighted point-to-plane distance: sum over the entry's components
// of omega * |(probe - mu)^T nu|. Weights stay anchored at the center the
// entry was built for.
double weighted_distance(const NeighborEntry& entry, const GmmMap& map,
                         const Vec3& probe);

struct GmmLossBreakdown {
  double l_dis = 0.0;
  double l_control = 0.0;
  double l_normal = 0.0;
  double l_gmm = 0.0;  // sum of the three
  std::size_t surfels_used = 0;
  std::size_t normal_terms = 0;  // surfels whose blended normal was valid
};

// Per-surfel parameter gradients, accumulated across loss terms. Opacity
// and appearance slots exist for the renderer's use.
struct SurfelGrads {
  std::vector<Vec3> p, t_u, t_v;
  std::vector<double> r_u, r_v, opacity;
  std::vector<double> sh;

  void resize_like(const SurfelSet& s);
  void set_zero();
};

// Losses over the active (visible) surfels. queries[i] corresponds to
// surfel active[i].
GmmLossBreakdown gmm_losses(const SurfelSet& s, const std::vector<int>& active,
                            const std::vector<NeighborEntry>& queries,
                            const GmmMap& map, const GmmLossParams& params);

// Same traversal, also accumulating scale * dL/dparam into grads. When
// project is set, tangent-frame gradients are projected onto the orthonormal
// 2-frame manifold; raw gradients (project = false) are what central finite
// differences of the loss reproduce.
GmmLossBreakdown gmm_loss_gradients(const SurfelSet& s,
                                    const std::vector<int>& active,
                                    const std::vector<NeighborEntry>& queries,
                                    const GmmMap& map,
                                    const GmmLossParams& params, double scale,
                                    bool project, SurfelGrads& grads);

}  // namespace ligs
