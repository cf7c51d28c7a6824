#include "ligs/supervision.hpp"

#include <cmath>

namespace ligs {

namespace {

double sign0(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// d(x) = sum_k omega_k |(x - mu_k) . nu_k| and its gradient in x.
double plane_distance_and_grad(const NeighborEntry& entry, const GmmMap& map,
                               const Vec3& x, Vec3* grad) {
  double d = 0.0;
  if (grad) grad->setZero();
  const auto& comps = map.components();
  for (std::size_t k = 0; k < entry.comps.size(); ++k) {
    const GmmComponent4D& c = comps[static_cast<std::size_t>(entry.comps[k])];
    const double off = (x - c.mean_p()).dot(c.nu());
    d += entry.omega[k] * std::abs(off);
    if (grad) *grad += entry.omega[k] * sign0(off) * c.nu();
  }
  return d;
}

}  // namespace

ComponentKnn::ComponentKnn(const GmmMap& map)
    : map_(map), grid_(std::max(map.voxel_size() * 0.25, 1e-3)) {
  for (const GmmComponent4D& c : map.components()) grid_.insert(c.mean_p());
}

NeighborEntry ComponentKnn::query(const Vec3& center, int k,
                                  double sigma) const {
  NeighborEntry entry;
  const auto hits = grid_.knn(center, k);
  entry.truncated = static_cast<int>(hits.size()) < k;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (const auto& h : hits) {
    entry.comps.push_back(h.index);
    entry.omega.push_back(std::exp(-h.dist * h.dist * inv));
  }
  return entry;
}

NeighborEntry knn_components(const GmmMap& map, const Vec3& center, int k,
                             double sigma) {
  return ComponentKnn(map).query(center, k, sigma);
}

double weighted_distance(const NeighborEntry& entry, const GmmMap& map,
                         const Vec3& probe) {
  return plane_distance_and_grad(entry, map, probe, nullptr);
}

void SurfelGrads::resize_like(const SurfelSet& s) {
  p.assign(s.size(), Vec3::Zero());
  t_u.assign(s.size(), Vec3::Zero());
  t_v.assign(s.size(), Vec3::Zero());
  r_u.assign(s.size(), 0.0);
  r_v.assign(s.size(), 0.0);
  opacity.assign(s.size(), 0.0);
  sh.assign(s.sh.size(), 0.0);
}

void SurfelGrads::set_zero() {
  std::fill(p.begin(), p.end(), Vec3::Zero());
  std::fill(t_u.begin(), t_u.end(), Vec3::Zero());
  std::fill(t_v.begin(), t_v.end(), Vec3::Zero());
  std::fill(r_u.begin(), r_u.end(), 0.0);
  std::fill(r_v.begin(), r_v.end(), 0.0);
  std::fill(opacity.begin(), opacity.end(), 0.0);
  std::fill(sh.begin(), sh.end(), 0.0);
}

namespace {

struct TermAccum {
  double l_dis = 0, l_control = 0, l_normal = 0;
  std::size_t used = 0, normal_terms = 0;
};

// Shared traversal for the loss value and (optionally) its gradients. The
// per-surfel raw gradients are scaled by the same 1/G means used for the
// loss before accumulation.
TermAccum run(const SurfelSet& s, const std::vector<int>& active,
              const std::vector<NeighborEntry>& queries, const GmmMap& map,
              const GmmLossParams& params, double scale, bool project,
              SurfelGrads* grads) {
  TermAccum acc;
  struct PerSurfel {
    int index;
    Vec3 d_p = Vec3::Zero(), d_tu = Vec3::Zero(), d_tv = Vec3::Zero();
    double d_ru = 0, d_rv = 0;
    // normal-term raw gradients kept separate: their mean uses its own count
    Vec3 n_tu = Vec3::Zero(), n_tv = Vec3::Zero();
  };
  std::vector<PerSurfel> per;
  if (grads) per.reserve(active.size());

  for (std::size_t ai = 0; ai < active.size(); ++ai) {
    const int i = active[ai];
    const NeighborEntry& q = queries[ai];
    if (q.empty()) continue;
    ++acc.used;
    PerSurfel ps;
    ps.index = i;
    const std::size_t si = static_cast<std::size_t>(i);

    // center distance term
    Vec3 g_center;
    acc.l_dis += plane_distance_and_grad(q, map, s.p[si],
                                         grads ? &g_center : nullptr);
    if (grads) ps.d_p += g_center;

    // shape control: supervise larger surfels through offset control points
    const bool use_u = s.r_u[si] > params.phi;
    const bool use_v = s.r_v[si] > params.phi;
    if (use_u) {
      const Vec3 cu = s.p[si] + params.alpha * s.r_u[si] * s.t_u[si];
      Vec3 g;
      acc.l_control += plane_distance_and_grad(q, map, cu, grads ? &g : nullptr);
      if (grads) {
        ps.d_p += g;
        ps.d_ru += params.alpha * g.dot(s.t_u[si]);
        ps.d_tu += params.alpha * s.r_u[si] * g;
      }
    }
    if (use_u && use_v) {
      const Vec3 cv = s.p[si] + params.alpha * s.r_v[si] * s.t_v[si];
      Vec3 g;
      acc.l_control += plane_distance_and_grad(q, map, cv, grads ? &g : nullptr);
      if (grads) {
        ps.d_p += g;
        ps.d_rv += params.alpha * g.dot(s.t_v[si]);
        ps.d_tv += params.alpha * s.r_v[si] * g;
      }
    }

    // blended-normal alignment
    const Vec3 c = s.t_u[si].cross(s.t_v[si]);
    const double clen = c.norm();
    if (clen > 1e-12) {
      const Vec3 n = c / clen;
      Vec3 blend = Vec3::Zero();
      const auto& comps = map.components();
      for (std::size_t k = 0; k < q.comps.size(); ++k) {
        Vec3 nu = comps[static_cast<std::size_t>(q.comps[k])].nu();
        if (nu.dot(n) < 0) nu = -nu;  // hemisphere of the current normal
        blend += q.omega[k] * nu;
      }
      const double blen = blend.norm();
      if (blen >= 1e-12) {
        const Vec3 nbar = blend / blen;
        const double dot = n.dot(nbar);
        acc.l_normal += (n - nbar).cwiseAbs().sum() + std::abs(1.0 - dot);
        ++acc.normal_terms;
        if (grads) {
          Vec3 g_n(sign0(n.x() - nbar.x()), sign0(n.y() - nbar.y()),
                   sign0(n.z() - nbar.z()));
          g_n -= sign0(1.0 - dot) * nbar;
          // n = c/|c| chain: dL/dc = (I - n n^T)/|c| * dL/dn
          const Vec3 g_c = (g_n - n * n.dot(g_n)) / clen;
          ps.n_tu = s.t_v[si].cross(g_c);
          ps.n_tv = g_c.cross(s.t_u[si]);
        }
      }
    }
    if (grads) per.push_back(ps);
  }

  if (grads && acc.used > 0) {
    const double wg = scale / static_cast<double>(acc.used);
    const double wn = acc.normal_terms > 0
                          ? scale / static_cast<double>(acc.normal_terms)
                          : 0.0;
    for (const PerSurfel& ps : per) {
      const std::size_t si = static_cast<std::size_t>(ps.index);
      Vec3 g_tu = wg * ps.d_tu + wn * ps.n_tu;
      Vec3 g_tv = wg * ps.d_tv + wn * ps.n_tv;
      if (project) {
        // project onto the Stiefel manifold of orthonormal 2-frames:
        // G <- G - T sym(T^T G)
        const Vec3& tu = s.t_u[si];
        const Vec3& tv = s.t_v[si];
        Eigen::Matrix2d M;
        M << tu.dot(g_tu), tu.dot(g_tv), tv.dot(g_tu), tv.dot(g_tv);
        const Eigen::Matrix2d S = 0.5 * (M + M.transpose());
        const Vec3 pu = g_tu - (tu * S(0, 0) + tv * S(1, 0));
        const Vec3 pv = g_tv - (tu * S(0, 1) + tv * S(1, 1));
        g_tu = pu;
        g_tv = pv;
      }
      grads->p[si] += wg * ps.d_p;
      grads->t_u[si] += g_tu;
      grads->t_v[si] += g_tv;
      grads->r_u[si] += wg * ps.d_ru;
      grads->r_v[si] += wg * ps.d_rv;
    }
  }
  return acc;
}

GmmLossBreakdown summarize(const TermAccum& acc) {
  GmmLossBreakdown out;
  if (acc.used > 0) {
    out.l_dis = acc.l_dis / static_cast<double>(acc.used);
    out.l_control = acc.l_control / static_cast<double>(acc.used);
  }
  if (acc.normal_terms > 0)
    out.l_normal = acc.l_normal / static_cast<double>(acc.normal_terms);
  out.l_gmm = out.l_dis + out.l_control + out.l_normal;
  out.surfels_used = acc.used;
  out.normal_terms = acc.normal_terms;
  return out;
}

}  // namespace

GmmLossBreakdown gmm_losses(const SurfelSet& s, const std::vector<int>& active,
                            const std::vector<NeighborEntry>& queries,
                            const GmmMap& map, const GmmLossParams& params) {
  return summarize(run(s, active, queries, map, params, 1.0, false, nullptr));
}

GmmLossBreakdown gmm_loss_gradients(const SurfelSet& s,
                                    const std::vector<int>& active,
                                    const std::vector<NeighborEntry>& queries,
                                    const GmmMap& map,
                                    const GmmLossParams& params, double scale,
                                    bool project, SurfelGrads& grads) {
  return summarize(run(s, active, queries, map, params, scale, project, &grads));
}

}  // namespace ligs
