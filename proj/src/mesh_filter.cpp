#include "ligs/mesh_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "ligs/parallel.hpp"
#include "ligs/ply_io.hpp"
#include "ligs/spatial_hash.hpp"
#include "ligs/supervision.hpp"

namespace ligs {

std::vector<OrientedSample> sample_oriented_points(
    const SurfelSet& s, const std::vector<CameraModel>& cams,
    const RenderParams& rp, double silhouette_threshold) {
  std::vector<OrientedSample> out;
  for (std::size_t v = 0; v < cams.size(); ++v) {
    const CameraModel& cam = cams[v];
    RenderBuffers rb = render(s, cam, rp);
    for (int y = 0; y < rb.height; ++y) {
      for (int x = 0; x < rb.width; ++x) {
        if (rb.silhouette.at(x, y, 0) <= silhouette_threshold) continue;
        const double depth = rb.depth.at(x, y, 0);
        if (depth <= 0.0) continue;
        Vec3 n_cam(rb.normal.at(x, y, 0), rb.normal.at(x, y, 1),
                   rb.normal.at(x, y, 2));
        const double nn = n_cam.norm();
        if (nn < 1e-9) continue;  // fully cancelled blend, no usable normal
        OrientedSample sample;
        const Vec3 d = cam.pixel_ray(static_cast<double>(x),
                                     static_cast<double>(y));
        sample.p = cam.to_world(depth * d);
        sample.n = cam.R.transpose() * (n_cam / nn);
        sample.view = static_cast<int>(v);
        out.push_back(sample);
      }
    }
  }
  return out;
}

OccupancyMap build_occupancy(const std::vector<Vec3>& points,
                             double voxel_size, int min_points, bool dilate) {
  if (voxel_size <= 0.0)
    throw std::invalid_argument("build_occupancy: voxel size must be > 0");
  OccupancyMap map;
  map.voxel_size = voxel_size;
  std::unordered_map<VoxelKey, int, VoxelKeyHash> counts;
  for (const Vec3& p : points) ++counts[voxel_key_of(p, voxel_size)];
  std::unordered_set<VoxelKey, VoxelKeyHash> raw;
  for (const auto& [key, n] : counts)
    if (n >= min_points) raw.insert(key);
  if (!dilate) {
    map.occupied = std::move(raw);
    return map;
  }
  for (const VoxelKey& key : raw) {
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          map.occupied.insert(VoxelKey{key.x + dx, key.y + dy, key.z + dz});
  }
  return map;
}

std::vector<OrientedSample> filter_samples(
    const std::vector<OrientedSample>& samples, const OccupancyMap& occupancy,
    const GmmMap& map, double fine_threshold, int k, double sigma,
    FilterReport* report) {
  FilterReport rep;
  rep.input = static_cast<long>(samples.size());
  const ComponentKnn knn(map);

  std::vector<std::uint8_t> verdict(samples.size(), 0);  // 0 keep, 1 coarse, 2 fine
  parallel_for(samples.size(), [&](std::size_t i) {
    if (!occupancy.contains(samples[i].p)) {
      verdict[i] = 1;
      return;
    }
    NeighborEntry entry = knn.query(samples[i].p, k, sigma);
    const double d = entry.empty()
                         ? std::numeric_limits<double>::infinity()
                         : weighted_distance(entry, map, samples[i].p);
    if (d > fine_threshold) verdict[i] = 2;
  });

  std::vector<OrientedSample> kept;
  kept.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (verdict[i] == 0) {
      kept.push_back(samples[i]);
    } else if (verdict[i] == 1) {
      ++rep.removed_coarse;
    } else {
      ++rep.removed_fine;
    }
  }
  rep.kept = static_cast<long>(kept.size());
  if (report) *report = rep;
  return kept;
}

void export_poisson_input(const std::vector<OrientedSample>& samples,
                          const std::string& path) {
  if (samples.empty())
    throw std::invalid_argument("export_poisson_input: empty sample set");
  std::vector<Vec3> points(samples.size()), normals(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    points[i] = samples[i].p;
    normals[i] = samples[i].n;
  }
  save_oriented_ply(points, normals, path, /*binary=*/true);
}

std::vector<OrientedSample> load_poisson_input(const std::string& path) {
  std::vector<Vec3> points, normals;
  load_oriented_ply(path, points, normals);
  std::vector<OrientedSample> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i].p = points[i];
    out[i].n = normals[i];
  }
  return out;
}

namespace {

// Grid cell tuned to the set's density so ring expansion stays short.
double nn_cell_size(const std::vector<Vec3>& pts) {
  Vec3 lo = pts.front(), hi = pts.front();
  for (const Vec3& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 extent = (hi - lo).cwiseMax(1e-3);
  const double vol = extent.x() * extent.y() * extent.z();
  const double cell = 3.0 * std::cbrt(vol / static_cast<double>(pts.size()));
  return std::clamp(cell, 1e-3, 1.0);
}

// Mean nearest-neighbor distance a->b plus the fraction within threshold.
void directed_metrics(const std::vector<Vec3>& a, const PointGrid& b,
                      double threshold, double& mean_dist, double& fraction) {
  std::vector<double> dist(a.size());
  parallel_for(a.size(), [&](std::size_t i) {
    dist[i] = b.nearest(a[i]).dist;
  });
  double sum = 0.0;
  long inside = 0;
  for (double d : dist) {
    sum += d;
    if (d <= threshold) ++inside;
  }
  mean_dist = sum / static_cast<double>(a.size());
  fraction = static_cast<double>(inside) / static_cast<double>(a.size());
}

}  // namespace

MeshMetrics eval_mesh_metrics(const std::vector<Vec3>& result,
                              const std::vector<Vec3>& reference,
                              double threshold) {
  if (result.empty() || reference.empty())
    throw std::invalid_argument("eval_mesh_metrics: empty point set");
  PointGrid ref_grid(nn_cell_size(reference));
  for (const Vec3& p : reference) ref_grid.insert(p);
  PointGrid res_grid(nn_cell_size(result));
  for (const Vec3& p : result) res_grid.insert(p);

  MeshMetrics m;
  directed_metrics(result, ref_grid, threshold, m.accuracy, m.precision);
  directed_metrics(reference, res_grid, threshold, m.completeness, m.recall);
  m.chamfer_l1 = 0.5 * (m.accuracy + m.completeness);
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

}  // namespace ligs
