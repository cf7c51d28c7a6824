#pragma once

#include "ligs/types.hpp"
#include "ligs/voxel.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace ligs {

// Local plane estimated inside one voxel: mean point, eigenvalues of the
// inlier scatter (ascending), and the eigenvector basis stored column-wise
// as [v2 v1 v0] so that basis^T * (p - mean) yields (u, v, w) with w the
// out-of-plane coordinate.
struct PlaneFrame {
  Vec3 mean = Vec3::Zero();
  Mat3 basis = Mat3::Identity();  // columns: major, middle, normal
  Vec3 eigs = Vec3::Zero();       // alpha0 <= alpha1 <= alpha2

  Vec3 normal() const { return basis.col(2); }
  // (u, v, w) coordinates of a world point in this frame
  Vec3 to_frame(const Vec3& p) const { return basis.transpose() * (p - mean); }
};

struct RansacParams {
  double inlier_threshold = 0.02;  // meters
  int iterations = 200;
  int min_inliers = 30;
  int max_planes = 4;
  std::uint64_t seed = 1;
};

struct PlaneExtraction {
  std::vector<PlaneFrame> planes;
  std::vector<std::vector<int>> inliers;  // indices into the bucket argument
  std::vector<int> residual;              // bucket indices on no plane
};

// Greedy RANSAC over one voxel bucket. Each accepted plane keeps at least
// min_inliers points within inlier_threshold of the eigen-refined plane;
// rank-deficient candidates (collinear supports) are rejected. Deterministic
// for a fixed params.seed.
PlaneExtraction extract_planes(const std::vector<Vec3>& points,
                               const RansacParams& params);

// One mixture component over (x, y, z, gray). Covariance is kept as the
// full symmetric 4x4; spatial eigenpairs and the density cache are derived
// fields refreshed after any covariance change.
struct GmmComponent4D {
  double weight = 1.0;  // in (0, 1]
  Vec4 mean = Vec4::Zero();
  Mat4 cov = Mat4::Identity();
  Vec3 mean_rgb = Vec3::Constant(0.5);
  VoxelKey voxel;  // bucket that produced the component

  // derived, not serialized
  Vec3 gamma = Vec3::Ones();       // spatial eigenvalues, gamma0 <= gamma1 <= gamma2
  Mat3 axes = Mat3::Identity();    // columns w0 (normal), w1, w2
  Mat3 prec_pp = Mat3::Identity(); // inverse of the spatial block
  double logdet_pp = 0.0;

  Vec3 mean_p() const { return mean.head<3>(); }
  Mat3 cov_pp() const { return cov.topLeftCorner<3, 3>(); }
  Vec3 nu() const { return axes.col(0); }

  // Recomputes eigenpairs and the density cache from cov. orient_to, when
  // non-null, flips the normal toward that world point; otherwise the sign
  // is canonicalized (largest-magnitude coordinate positive).
  void refresh_derived(const Vec3* orient_to = nullptr);

  // ln N(p | mean_p, cov_pp), the spatial marginal density
  double log_density_spatial(const Vec3& p) const;
};

struct GmmFitParams {
  double bandwidth_spatial = 0.15;  // meters (plane u,v or world x,y,z)
  double bandwidth_gray = 0.15;
  int em_max_iters = 100;
  double em_tol = 1e-6;
  double cov_floor = 1e-8;
};

// Mode seeking with a truncated Gaussian kernel of unit bandwidth over
// pre-scaled rows of X. Returns the de-duplicated modes.
std::vector<Eigen::VectorXd> mean_shift_modes(const Eigen::MatrixXd& X,
                                              int max_iters = 60,
                                              double tol = 1e-5,
                                              double merge_dist = 0.5,
                                              int max_seeds = 96);

struct LocalGmm {
  std::vector<GmmComponent4D> components;  // plane/world frame of the input
  Eigen::MatrixXd resp;                    // n x K responsibilities
  std::vector<double> loglik_trace;        // total log-likelihood per EM pass
};

// Fits a mixture to plane-frame samples (u, v, 0, g): mean-shift mode count
// over (u, v, g), then EM to convergence in that reduced space. Components
// come back with the out-of-plane row/column of the covariance identically
// zero and weights summing to 1.
LocalGmm fit_local_gmm(const std::vector<Vec4>& points4d,
                       const GmmFitParams& params);

// Same, without the plane constraint: full 4D fit over (x, y, z, g). Used
// for the non-planar residual of a voxel.
LocalGmm fit_free_gmm(const std::vector<Vec4>& points4d,
                      const GmmFitParams& params);

// Rigid lift of a plane-frame component into world space: the spatial part
// rotates by the plane basis and translates by the plane mean, gray is
// untouched, and the full eigenvalue spectrum is preserved.
GmmComponent4D to_world(const GmmComponent4D& local, const PlaneFrame& frame);

struct IntegrateParams {
  double rho = -6.0;  // effectiveness threshold on the spatial log density
  RansacParams ransac;
  GmmFitParams fit;
};

struct IntegrationReport {
  std::size_t points_total = 0;
  std::size_t points_effective = 0;
  std::size_t points_consumed = 0;  // fitted into some local model
  std::size_t points_skipped = 0;   // effective but in a too-small bucket
  std::size_t new_components = 0;
  std::size_t voxels_touched = 0;
  std::size_t voxel_failures = 0;   // per-voxel errors survived
};

// Incremental plane-constrained multimodal map over a spatial hash. The
// component store is append-only: integration never mutates what earlier
// frames inserted, so density queries stay reproducible.
class GmmMap {
 public:
  explicit GmmMap(double voxel_size = 1.0) : voxel_size_(voxel_size) {}

  double voxel_size() const { return voxel_size_; }
  const std::vector<GmmComponent4D>& components() const { return arena_; }
  std::size_t size() const { return arena_.size(); }
  bool voxel_known(const VoxelKey& key) const { return hash_.count(key) > 0; }
  const std::vector<int>* voxel_components(const VoxelKey& key) const;

  // Spatial-marginal log likelihood over the 27-voxel neighborhood of p,
  // with weights renormalized over that neighborhood. -infinity when the
  // neighborhood holds no component.
  double log_likelihood(const Vec3& p) const;

  // Splits a frame into (F_new, F_low): point indexes whose voxel is not in
  // the hash, and points in known voxels that the mixture explains worse
  // than rho. Disjoint by construction.
  void effective_points(const FrameCloud& frame, double rho,
                        std::vector<int>& f_new, std::vector<int>& f_low) const;

  IntegrationReport integrate_frame(const FrameCloud& frame,
                                    const IntegrateParams& params);

  void serialize(std::ostream& os) const;
  static GmmMap deserialize(std::istream& is);
  void save(const std::string& path) const;
  static GmmMap load(const std::string& path);

 private:
  void insert_component(GmmComponent4D comp);

  double voxel_size_ = 1.0;
  std::vector<GmmComponent4D> arena_;
  std::unordered_map<VoxelKey, std::vector<int>, VoxelKeyHash> hash_;
  // points ever fitted per voxel; scales the stored weights of later
  // insertions (not serialized; a deserialized map is read-only in practice)
  std::unordered_map<VoxelKey, std::uint64_t, VoxelKeyHash> fitted_counts_;
};

// Bucket points by voxel key, floor-division per axis. Returned key order is
// lexicographic so iteration is deterministic.
std::vector<std::pair<VoxelKey, std::vector<int>>> voxelize(
    const PointCloud& points, double voxel_size);

}  // namespace ligs
