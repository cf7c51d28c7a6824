#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "ligs/gmm.hpp"
#include "ligs/renderer.hpp"
#include "ligs/surfel.hpp"
#include "ligs/voxel.hpp"

namespace ligs {

// Oriented surface sample for screened-Poisson style reconstruction.
struct OrientedSample {
  Vec3 p = Vec3::Zero();
  Vec3 n = Vec3::UnitZ();  // unit
  int view = -1;           // index of the camera it was unprojected from
};

struct OccupancyMap {
  double voxel_size = 0.3;
  std::unordered_set<VoxelKey, VoxelKeyHash> occupied;

  bool contains(const Vec3& p) const {
    return occupied.count(voxel_key_of(p, voxel_size)) > 0;
  }
};

// Unprojects every pixel whose rendered silhouette exceeds the threshold,
// using the rendered depth; normals come from the rendered normal buffer
// rotated back to world frame and unit-normalized.
std::vector<OrientedSample> sample_oriented_points(
    const SurfelSet& s, const std::vector<CameraModel>& cams,
    const RenderParams& rp = RenderParams(), double silhouette_threshold = 0.5);

// A voxel is occupied when it holds at least min_points cloud points; the
// occupied set is then dilated by one voxel so thin structures near voxel
// borders survive the coarse filter. dilate=false exposes the raw set.
OccupancyMap build_occupancy(const std::vector<Vec3>& points,
                             double voxel_size, int min_points,
                             bool dilate = true);

struct FilterReport {
  long input = 0, kept = 0, removed_coarse = 0, removed_fine = 0;
};

// Coarse pass drops samples in unoccupied voxels; fine pass drops the rest
// whose weighted map distance exceeds fine_threshold (k nearest components,
// weights anchored at the sample point). Samples with no components in
// reach count as infinitely distant.
std::vector<OrientedSample> filter_samples(
    const std::vector<OrientedSample>& samples, const OccupancyMap& occupancy,
    const GmmMap& map, double fine_threshold, int k, double sigma,
    FilterReport* report = nullptr);

// Binary little-endian x/y/z/nx/ny/nz PLY; refuses an empty set.
void export_poisson_input(const std::vector<OrientedSample>& samples,
                          const std::string& path);
std::vector<OrientedSample> load_poisson_input(const std::string& path);

struct MeshMetrics {
  double accuracy = 0.0;      // meters, result -> reference
  double completeness = 0.0;  // meters, reference -> result
  double chamfer_l1 = 0.0;    // meters
  double precision = 0.0;     // fraction in [0,1]
  double recall = 0.0;
  double f1 = 0.0;
};

// Nearest-neighbor distances between two point sets (mesh vertices work
// the same way). threshold in meters feeds precision/recall/F1.
MeshMetrics eval_mesh_metrics(const std::vector<Vec3>& result,
                              const std::vector<Vec3>& reference,
                              double threshold = 0.20);

}  // namespace ligs

