#include "ligs/gmm.hpp"

#include "ligs/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

namespace ligs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct LexKeyLess {
  bool operator()(const VoxelKey& a, const VoxelKey& b) const {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
  }
};

// Plane frame from the scatter of the given points (already selected).
PlaneFrame frame_from_points(const std::vector<Vec3>& points,
                             const std::vector<int>& idx) {
  PlaneFrame f;
  Vec3 c = Vec3::Zero();
  for (int i : idx) c += points[static_cast<std::size_t>(i)];
  c /= static_cast<double>(idx.size());
  Mat3 cov = Mat3::Zero();
  for (int i : idx) {
    const Vec3 d = points[static_cast<std::size_t>(i)] - c;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(idx.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  f.mean = c;
  f.eigs = eig.eigenvalues().cwiseMax(0.0);
  f.basis.col(0) = eig.eigenvectors().col(2);  // major
  f.basis.col(1) = eig.eigenvectors().col(1);
  f.basis.col(2) = eig.eigenvectors().col(0);  // normal
  if (f.basis.determinant() < 0) f.basis.col(2) = -f.basis.col(2);
  return f;
}

}  // namespace

std::vector<std::pair<VoxelKey, std::vector<int>>> voxelize(
    const PointCloud& points, double voxel_size) {
  if (voxel_size <= 0) throw std::invalid_argument("voxel_size must be > 0");
  std::map<VoxelKey, std::vector<int>, LexKeyLess> buckets;
  for (std::size_t i = 0; i < points.size(); ++i)
    buckets[voxel_key_of(points[i].p, voxel_size)].push_back(
        static_cast<int>(i));
  return {buckets.begin(), buckets.end()};
}

PlaneExtraction extract_planes(const std::vector<Vec3>& points,
                               const RansacParams& params) {
  PlaneExtraction out;
  std::vector<int> work(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) work[i] = static_cast<int>(i);

  Rng rng(params.seed);
  const double thr = params.inlier_threshold;

  while (static_cast<int>(out.planes.size()) < params.max_planes &&
         static_cast<int>(work.size()) >= params.min_inliers) {
    // consensus search on the remaining points
    int best_count = 0;
    Vec3 best_n = Vec3::Zero();
    double best_d = 0;
    for (int it = 0; it < params.iterations; ++it) {
      const int m = static_cast<int>(work.size());
      int a = static_cast<int>(rng.uniform_int(0, m - 1));
      int b = static_cast<int>(rng.uniform_int(0, m - 1));
      int c = static_cast<int>(rng.uniform_int(0, m - 1));
      if (a == b || b == c || a == c) continue;
      const Vec3& pa = points[static_cast<std::size_t>(work[a])];
      const Vec3& pb = points[static_cast<std::size_t>(work[b])];
      const Vec3& pc = points[static_cast<std::size_t>(work[c])];
      Vec3 n = (pb - pa).cross(pc - pa);
      const double len = n.norm();
      if (len < 1e-12) continue;  // degenerate sample
      n /= len;
      const double d = n.dot(pa);
      int count = 0;
      for (int w : work)
        if (std::abs(n.dot(points[static_cast<std::size_t>(w)]) - d) <= thr)
          ++count;
      if (count > best_count) {
        best_count = count;
        best_n = n;
        best_d = d;
      }
    }
    if (best_count < params.min_inliers) break;

    // eigen-refine, re-collecting the inlier set until it stabilizes
    std::vector<int> inl;
    inl.reserve(static_cast<std::size_t>(best_count));
    for (int w : work)
      if (std::abs(best_n.dot(points[static_cast<std::size_t>(w)]) - best_d) <= thr)
        inl.push_back(w);

    PlaneFrame frame;
    bool degenerate = false;
    for (int round = 0; round < 3; ++round) {
      frame = frame_from_points(points, inl);
      if (frame.eigs(1) <= 1e-12 + 1e-8 * frame.eigs(2)) {
        degenerate = true;  // collinear support, no usable plane
        break;
      }
      std::vector<int> next;
      next.reserve(inl.size());
      for (int w : work)
        if (std::abs(frame.normal().dot(points[static_cast<std::size_t>(w)] -
                                        frame.mean)) <= thr)
          next.push_back(w);
      const bool stable = next == inl;
      inl = std::move(next);
      if (stable) break;
    }
    if (degenerate || static_cast<int>(inl.size()) < params.min_inliers) break;

    out.planes.push_back(frame);
    out.inliers.push_back(inl);

    std::vector<int> rest;
    rest.reserve(work.size() - inl.size());
    std::size_t j = 0;  // inl is a subsequence of work, both ascending
    for (int w : work) {
      if (j < inl.size() && inl[j] == w)
        ++j;
      else
        rest.push_back(w);
    }
    work = std::move(rest);
  }

  out.residual = std::move(work);
  return out;
}

void GmmComponent4D::refresh_derived(const Vec3* orient_to) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov_pp());
  gamma = eig.eigenvalues().cwiseMax(0.0);
  axes = eig.eigenvectors();
  Vec3 n = axes.col(0);
  if (orient_to) {
    if (n.dot(*orient_to - mean_p()) < 0) axes.col(0) = -n;
  } else {
    int imax = 0;
    n.cwiseAbs().maxCoeff(&imax);
    if (n(imax) < 0) axes.col(0) = -n;
  }
  if (gamma(0) > 0) {
    prec_pp = axes * Vec3(1.0 / gamma(0), 1.0 / gamma(1), 1.0 / gamma(2)).asDiagonal() *
              axes.transpose();
    logdet_pp = std::log(gamma(0)) + std::log(gamma(1)) + std::log(gamma(2));
  } else {
    prec_pp.setZero();
    logdet_pp = std::numeric_limits<double>::infinity();
  }
}

double GmmComponent4D::log_density_spatial(const Vec3& p) const {
  if (!std::isfinite(logdet_pp)) return kNegInf;
  const Vec3 d = p - mean_p();
  return -0.5 * d.dot(prec_pp * d) - 0.5 * logdet_pp - 1.5 * kLog2Pi;
}

std::vector<Eigen::VectorXd> mean_shift_modes(const Eigen::MatrixXd& X,
                                              int max_iters, double tol,
                                              double merge_dist, int max_seeds) {
  const Eigen::Index n = X.rows();
  std::vector<Eigen::VectorXd> modes;
  if (n == 0) return modes;
  const int m = static_cast<int>(std::min<Eigen::Index>(n, max_seeds));

  for (int s = 0; s < m; ++s) {
    const Eigen::Index seed = static_cast<Eigen::Index>(
        static_cast<std::int64_t>(s) * n / m);
    Eigen::VectorXd x = X.row(seed).transpose();
    for (int it = 0; it < max_iters; ++it) {
      Eigen::VectorXd num = Eigen::VectorXd::Zero(X.cols());
      double den = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d2 = (X.row(i).transpose() - x).squaredNorm();
        if (d2 >= 9.0) continue;  // truncated Gaussian kernel, 3h support
        const double w = std::exp(-0.5 * d2);
        num += w * X.row(i).transpose();
        den += w;
      }
      Eigen::VectorXd next = num / den;  // den >= kernel at the seed itself
      const double move = (next - x).norm();
      x = std::move(next);
      if (move < tol) break;
    }
    bool merged = false;
    for (const auto& mode : modes)
      if ((mode - x).norm() < merge_dist) {
        merged = true;
        break;
      }
    if (!merged) modes.push_back(std::move(x));
  }
  return modes;
}

namespace {

// Generic EM in d dimensions. X holds raw samples; scales holds per-axis
// bandwidths used only to pose the mode search in an isotropic space.
struct EmResult {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  Eigen::MatrixXd resp;
  std::vector<double> loglik_trace;
};

Eigen::MatrixXd floor_cov(const Eigen::MatrixXd& cov, double floor_val) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(floor_val);
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

EmResult fit_em(const Eigen::MatrixXd& X, const Eigen::VectorXd& scales,
                const GmmFitParams& params) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (n == 0) throw std::invalid_argument("empty sample set for GMM fit");

  // mode seeking in the bandwidth-scaled space
  Eigen::MatrixXd Xs = X;
  for (Eigen::Index c = 0; c < d; ++c) Xs.col(c) /= scales(c);
  std::vector<Eigen::VectorXd> modes = mean_shift_modes(Xs);

  // hard-assign points to modes for the initial estimates
  const int k0 = static_cast<int>(modes.size());
  std::vector<std::vector<Eigen::Index>> basin(static_cast<std::size_t>(k0));
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < k0; ++k) {
      const double dist = (Xs.row(i).transpose() - modes[static_cast<std::size_t>(k)]).squaredNorm();
      if (dist < bd) {
        bd = dist;
        best = k;
      }
    }
    basin[static_cast<std::size_t>(best)].push_back(i);
  }

  EmResult em;
  for (int k = 0; k < k0; ++k) {
    const auto& members = basin[static_cast<std::size_t>(k)];
    if (members.empty()) continue;  // orphan mode, nothing to seed from
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i : members) mu += X.row(i).transpose();
    mu /= static_cast<double>(members.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i : members) {
      const Eigen::VectorXd dv = X.row(i).transpose() - mu;
      cov += dv * dv.transpose();
    }
    cov /= static_cast<double>(members.size());
    em.weights.push_back(static_cast<double>(members.size()) / static_cast<double>(n));
    em.means.push_back(std::move(mu));
    em.covs.push_back(floor_cov(cov, params.cov_floor));
  }

  auto e_step = [&](Eigen::MatrixXd& resp) -> double {
    const int K = static_cast<int>(em.weights.size());
    resp.resize(n, K);
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
    std::vector<double> logdets, logws;
    llts.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      llts.emplace_back(em.covs[static_cast<std::size_t>(k)]);
      double ld = 0;
      for (Eigen::Index c = 0; c < d; ++c)
        ld += 2.0 * std::log(llts.back().matrixL()(c, c));
      logdets.push_back(ld);
      logws.push_back(std::log(em.weights[static_cast<std::size_t>(k)]));
    }
    double total = 0;
    Eigen::VectorXd lp(K);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int k = 0; k < K; ++k) {
        const Eigen::VectorXd dv = X.row(i).transpose() - em.means[static_cast<std::size_t>(k)];
        const Eigen::VectorXd sol = llts[static_cast<std::size_t>(k)].solve(dv);
        lp(k) = logws[static_cast<std::size_t>(k)] - 0.5 * dv.dot(sol) -
                0.5 * logdets[static_cast<std::size_t>(k)] -
                0.5 * static_cast<double>(d) * kLog2Pi;
      }
      const double mx = lp.maxCoeff();
      const double lse = mx + std::log((lp.array() - mx).exp().sum());
      total += lse;
      resp.row(i) = (lp.array() - lse).exp();
    }
    return total;
  };

  bool resp_fresh = false;
  for (int it = 0; it < params.em_max_iters; ++it) {
    const double ll = e_step(em.resp);
    em.loglik_trace.push_back(ll);
    resp_fresh = true;
    if (it > 0 && ll - em.loglik_trace[static_cast<std::size_t>(it) - 1] < params.em_tol)
      break;

    // M step
    const int K = static_cast<int>(em.weights.size());
    std::vector<double> w2;
    std::vector<Eigen::VectorXd> mu2;
    std::vector<Eigen::MatrixXd> cov2;
    for (int k = 0; k < K; ++k) {
      const double nk = em.resp.col(k).sum();
      if (nk < 1e-9) continue;  // dead component
      Eigen::VectorXd mu = (em.resp.col(k).transpose() * X).transpose() / nk;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd dv = X.row(i).transpose() - mu;
        cov += em.resp(i, k) * dv * dv.transpose();
      }
      cov /= nk;
      w2.push_back(nk / static_cast<double>(n));
      mu2.push_back(std::move(mu));
      cov2.push_back(floor_cov(cov, params.cov_floor));
    }
    // renormalize in case a dead component carried mass away
    double wsum = 0;
    for (double w : w2) wsum += w;
    for (double& w : w2) w /= wsum;
    em.weights = std::move(w2);
    em.means = std::move(mu2);
    em.covs = std::move(cov2);
    resp_fresh = false;
  }
  if (!resp_fresh) {
    const double ll = e_step(em.resp);
    em.loglik_trace.push_back(ll);
  }
  return em;
}

}  // namespace

LocalGmm fit_local_gmm(const std::vector<Vec4>& points4d,
                       const GmmFitParams& params) {
  const Eigen::Index n = static_cast<Eigen::Index>(points4d.size());
  Eigen::MatrixXd X(n, 3);  // (u, v, g); the third input coordinate is 0
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec4& p = points4d[static_cast<std::size_t>(i)];
    X(i, 0) = p(0);
    X(i, 1) = p(1);
    X(i, 2) = p(3);
  }
  Eigen::Vector3d scales(params.bandwidth_spatial, params.bandwidth_spatial,
                         params.bandwidth_gray);
  EmResult em = fit_em(X, scales, params);

  LocalGmm out;
  out.resp = std::move(em.resp);
  out.loglik_trace = std::move(em.loglik_trace);
  for (std::size_t k = 0; k < em.weights.size(); ++k) {
    GmmComponent4D c;
    c.weight = em.weights[k];
    c.mean = Vec4(em.means[k](0), em.means[k](1), 0.0, em.means[k](2));
    c.cov.setZero();
    // embed (u, v, g) into (u, v, w, g) with the w row/column zero
    const int map[3] = {0, 1, 3};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) c.cov(map[a], map[b]) = em.covs[k](a, b);
    out.components.push_back(std::move(c));
  }
  return out;
}

LocalGmm fit_free_gmm(const std::vector<Vec4>& points4d,
                      const GmmFitParams& params) {
  const Eigen::Index n = static_cast<Eigen::Index>(points4d.size());
  Eigen::MatrixXd X(n, 4);
  for (Eigen::Index i = 0; i < n; ++i)
    X.row(i) = points4d[static_cast<std::size_t>(i)].transpose();
  Eigen::Vector4d scales(params.bandwidth_spatial, params.bandwidth_spatial,
                         params.bandwidth_spatial, params.bandwidth_gray);
  EmResult em = fit_em(X, scales, params);

  LocalGmm out;
  out.resp = std::move(em.resp);
  out.loglik_trace = std::move(em.loglik_trace);
  for (std::size_t k = 0; k < em.weights.size(); ++k) {
    GmmComponent4D c;
    c.weight = em.weights[k];
    c.mean = em.means[k];
    c.cov = em.covs[k];
    out.components.push_back(std::move(c));
  }
  return out;
}

GmmComponent4D to_world(const GmmComponent4D& local, const PlaneFrame& frame) {
  Mat4 H = Mat4::Identity();
  H.topLeftCorner<3, 3>() = frame.basis;
  GmmComponent4D w = local;
  w.mean = H * local.mean;
  w.mean.head<3>() += frame.mean;
  w.cov = H * local.cov * H.transpose();
  return w;
}

const std::vector<int>* GmmMap::voxel_components(const VoxelKey& key) const {
  auto it = hash_.find(key);
  return it == hash_.end() ? nullptr : &it->second;
}

double GmmMap::log_likelihood(const Vec3& p) const {
  const VoxelKey c = voxel_key_of(p, voxel_size_);
  double max_term = kNegInf;
  double weight_sum = 0.0;
  // two passes over the 27-voxel neighborhood: max for stability, then sum
  std::vector<const std::vector<int>*> lists;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        const auto* lst = voxel_components({c.x + dx, c.y + dy, c.z + dz});
        if (lst) lists.push_back(lst);
      }
  if (lists.empty()) return kNegInf;

  std::vector<double> terms;
  for (const auto* lst : lists)
    for (int idx : *lst) {
      const GmmComponent4D& comp = arena_[static_cast<std::size_t>(idx)];
      const double t = std::log(comp.weight) + comp.log_density_spatial(p);
      terms.push_back(t);
      weight_sum += comp.weight;
      max_term = std::max(max_term, t);
    }
  if (terms.empty() || !std::isfinite(max_term)) return kNegInf;

  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - max_term);
  // renormalize by the neighborhood weight mass so this is a log density
  return max_term + std::log(acc) - std::log(weight_sum);
}

void GmmMap::effective_points(const FrameCloud& frame, double rho,
                              std::vector<int>& f_new,
                              std::vector<int>& f_low) const {
  f_new.clear();
  f_low.clear();
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const Vec3& p = frame.points[i].p;
    if (!voxel_known(voxel_key_of(p, voxel_size_))) {
      f_new.push_back(static_cast<int>(i));
    } else if (log_likelihood(p) < rho) {
      f_low.push_back(static_cast<int>(i));
    }
  }
}

void GmmMap::insert_component(GmmComponent4D comp) {
  const int idx = static_cast<int>(arena_.size());
  hash_[comp.voxel].push_back(idx);
  arena_.push_back(std::move(comp));
}

IntegrationReport GmmMap::integrate_frame(const FrameCloud& frame,
                                          const IntegrateParams& params) {
  IntegrationReport report;
  report.points_total = frame.points.size();

  std::vector<int> f_new, f_low;
  effective_points(frame, params.rho, f_new, f_low);

  std::vector<char> is_eff(frame.points.size(), 0);
  for (int i : f_new) is_eff[static_cast<std::size_t>(i)] = 1;
  for (int i : f_low) is_eff[static_cast<std::size_t>(i)] = 1;
  PointCloud eff;
  eff.reserve(f_new.size() + f_low.size());
  for (std::size_t i = 0; i < frame.points.size(); ++i)
    if (is_eff[i]) eff.push_back(frame.points[i]);
  report.points_effective = eff.size();
  if (eff.empty()) return report;

  const Vec3 cam_center = frame.camera.world_center();
  const auto buckets = voxelize(eff, voxel_size_);

  for (const auto& [key, bucket] : buckets) {
    ++report.voxels_touched;
    if (static_cast<int>(bucket.size()) < params.ransac.min_inliers) {
      report.points_skipped += bucket.size();
      continue;
    }
    try {
      std::vector<Vec3> pos;
      pos.reserve(bucket.size());
      for (int i : bucket) pos.push_back(eff[static_cast<std::size_t>(i)].p);

      RansacParams rp = params.ransac;
      rp.seed = mix_seed(params.ransac.seed, frame.frame_id,
                         VoxelKeyHash{}(key));
      const PlaneExtraction ext = extract_planes(pos, rp);

      // local models of this voxel for this frame, inserted as one batch so
      // their weight scaling shares the same running total
      struct Pending {
        GmmComponent4D comp;
        std::size_t local_n;
      };
      std::vector<Pending> pending;
      std::size_t consumed = 0;

      auto add_models = [&](const LocalGmm& lg, const std::vector<int>& members,
                            const PlaneFrame* plane) {
        for (std::size_t k = 0; k < lg.components.size(); ++k) {
          GmmComponent4D comp = plane ? to_world(lg.components[k], *plane)
                                      : lg.components[k];
          comp.voxel = key;
          // responsibility-weighted color of the member points
          Vec3 rgb = Vec3::Zero();
          double wsum = 0;
          for (std::size_t i = 0; i < members.size(); ++i) {
            const double r = lg.resp(static_cast<Eigen::Index>(i),
                                     static_cast<Eigen::Index>(k));
            rgb += r * eff[static_cast<std::size_t>(
                             bucket[static_cast<std::size_t>(members[i])])].rgb;
            wsum += r;
          }
          if (wsum > 0) comp.mean_rgb = rgb / wsum;
          pending.push_back({std::move(comp), members.size()});
        }
      };

      for (std::size_t pi = 0; pi < ext.planes.size(); ++pi) {
        const auto& inl = ext.inliers[pi];
        std::vector<Vec4> pts4;
        pts4.reserve(inl.size());
        for (int i : inl) {
          const ColorizedPoint& cp = eff[static_cast<std::size_t>(bucket[static_cast<std::size_t>(i)])];
          const Vec3 q = ext.planes[pi].to_frame(cp.p);
          pts4.emplace_back(q.x(), q.y(), 0.0, cp.gray);
        }
        add_models(fit_local_gmm(pts4, params.fit), inl, &ext.planes[pi]);
        consumed += inl.size();
      }
      if (static_cast<int>(ext.residual.size()) >= params.ransac.min_inliers) {
        std::vector<Vec4> pts4;
        pts4.reserve(ext.residual.size());
        for (int i : ext.residual) {
          const ColorizedPoint& cp = eff[static_cast<std::size_t>(bucket[static_cast<std::size_t>(i)])];
          pts4.emplace_back(cp.p.x(), cp.p.y(), cp.p.z(), cp.gray);
        }
        add_models(fit_free_gmm(pts4, params.fit), ext.residual, nullptr);
        consumed += ext.residual.size();
      }

      std::uint64_t& total = fitted_counts_[key];
      total += consumed;
      for (Pending& pend : pending) {
        pend.comp.weight *= static_cast<double>(pend.local_n) /
                            static_cast<double>(total);
        pend.comp.cov.topLeftCorner<3, 3>() +=
            params.fit.cov_floor * Mat3::Identity();
        pend.comp.refresh_derived(&cam_center);
        insert_component(std::move(pend.comp));
        ++report.new_components;
      }
      report.points_consumed += consumed;
      report.points_skipped += bucket.size() - consumed;
    } catch (const std::exception&) {
      ++report.voxel_failures;
      report.points_skipped += bucket.size();
    }
  }
  return report;
}

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

constexpr char kGmmMagic[8] = {'L', 'I', 'G', 'S', 'G', 'M', 'M', '1'};

}  // namespace

void GmmMap::serialize(std::ostream& os) const {
  os.write(kGmmMagic, 8);
  put<double>(os, voxel_size_);
  put<std::uint64_t>(os, arena_.size());
  for (const GmmComponent4D& c : arena_) {
    put<double>(os, c.weight);
    for (int i = 0; i < 4; ++i) put<double>(os, c.mean(i));
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) put<double>(os, c.cov(i, j));
    for (int i = 0; i < 3; ++i) put<float>(os, static_cast<float>(c.mean_rgb(i)));
    put<std::int32_t>(os, c.voxel.x);
    put<std::int32_t>(os, c.voxel.y);
    put<std::int32_t>(os, c.voxel.z);
  }
}

GmmMap GmmMap::deserialize(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kGmmMagic, 8) != 0)
    throw std::runtime_error("bad GMM map magic");
  GmmMap map(get<double>(is));
  const std::uint64_t count = get<std::uint64_t>(is);
  if (!is) throw std::runtime_error("truncated GMM map header");
  for (std::uint64_t n = 0; n < count; ++n) {
    GmmComponent4D c;
    c.weight = get<double>(is);
    for (int i = 0; i < 4; ++i) c.mean(i) = get<double>(is);
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) {
        const double v = get<double>(is);
        c.cov(i, j) = v;
        c.cov(j, i) = v;
      }
    for (int i = 0; i < 3; ++i) c.mean_rgb(i) = get<float>(is);
    c.voxel.x = get<std::int32_t>(is);
    c.voxel.y = get<std::int32_t>(is);
    c.voxel.z = get<std::int32_t>(is);
    if (!is) throw std::runtime_error("truncated GMM map payload");
    c.refresh_derived(nullptr);
    map.insert_component(std::move(c));
  }
  is.peek();
  if (!is.eof()) throw std::runtime_error("trailing bytes after GMM map payload");
  return map;
}

void GmmMap::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path, "cannot open for writing");
  serialize(os);
  if (!os) throw IoError(path, "short write");
}

GmmMap GmmMap::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path, "cannot open");
  return deserialize(is);
}

}  // namespace ligs
