#pragma once

#include "ligs/types.hpp"
#include "ligs/voxel.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <unordered_map>
#include <vector>

namespace ligs {

// Hashed voxel grid over a point set for exact nearest-neighbor queries.
// Cells are examined in growing Chebyshev rings around the query cell; once
// k candidates are found, search stops as soon as the ring lower bound
// exceeds the current k-th distance, so results are exact.
class PointGrid {
 public:
  explicit PointGrid(double cell_size) : cell_(cell_size) {}

  void reserve(std::size_t n) { points_.reserve(n); }

  int insert(const Vec3& p) {
    const int idx = static_cast<int>(points_.size());
    points_.push_back(p);
    const VoxelKey k = voxel_key_of(p, cell_);
    cells_[k].push_back(idx);
    lo_.x = std::min(lo_.x, k.x); lo_.y = std::min(lo_.y, k.y); lo_.z = std::min(lo_.z, k.z);
    hi_.x = std::max(hi_.x, k.x); hi_.y = std::max(hi_.y, k.y); hi_.z = std::max(hi_.z, k.z);
    return idx;
  }

  template <typename Range, typename Proj>
  void build(const Range& range, Proj&& proj) {
    for (const auto& item : range) insert(proj(item));
  }

  std::size_t size() const { return points_.size(); }
  const Vec3& point(int idx) const { return points_[static_cast<std::size_t>(idx)]; }

  struct Hit {
    int index;
    double dist;
  };

  // k nearest stored points to q, ascending by (distance, index). Fewer than
  // k results only when the grid holds fewer than k points.
  std::vector<Hit> knn(const Vec3& q, int k) const {
    std::vector<Hit> out;
    if (k <= 0 || points_.empty()) return out;
    k = std::min<int>(k, static_cast<int>(points_.size()));

    // max-heap on distance keeps the current best k
    auto cmp = [](const Hit& a, const Hit& b) {
      return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
    };
    std::priority_queue<Hit, std::vector<Hit>, decltype(cmp)> best(cmp);

    const VoxelKey qk = voxel_key_of(q, cell_);
    const int max_ring = max_ring_from(qk);
    for (int ring = 0; ring <= max_ring; ++ring) {
      visit_ring(qk, ring, [&](const std::vector<int>& cell) {
        for (int idx : cell) {
          const double d = (points_[static_cast<std::size_t>(idx)] - q).norm();
          if (static_cast<int>(best.size()) < k) {
            best.push({idx, d});
          } else if (d < best.top().dist ||
                     (d == best.top().dist && idx < best.top().index)) {
            best.pop();
            best.push({idx, d});
          }
        }
      });
      // Points in rings > ring are at least ring * cell away.
      if (static_cast<int>(best.size()) == k &&
          best.top().dist <= static_cast<double>(ring) * cell_)
        break;
    }

    out.resize(best.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = best.top();
      best.pop();
    }
    return out;
  }

  // Nearest stored point, or index -1 when empty.
  Hit nearest(const Vec3& q) const {
    auto r = knn(q, 1);
    if (r.empty()) return {-1, std::numeric_limits<double>::infinity()};
    return r[0];
  }

 private:
  int max_ring_from(const VoxelKey& qk) const {
    if (points_.empty()) return -1;
    int m = 0;
    m = std::max(m, std::abs(qk.x - lo_.x)); m = std::max(m, std::abs(hi_.x - qk.x));
    m = std::max(m, std::abs(qk.y - lo_.y)); m = std::max(m, std::abs(hi_.y - qk.y));
    m = std::max(m, std::abs(qk.z - lo_.z)); m = std::max(m, std::abs(hi_.z - qk.z));
    return m;
  }

  template <typename Fn>
  void visit_cell(std::int32_t x, std::int32_t y, std::int32_t z, Fn&& fn) const {
    auto it = cells_.find(VoxelKey{x, y, z});
    if (it != cells_.end()) fn(it->second);
  }

  // Visits every cell whose Chebyshev distance from center is exactly ring.
  template <typename Fn>
  void visit_ring(const VoxelKey& c, int ring, Fn&& fn) const {
    if (ring == 0) {
      visit_cell(c.x, c.y, c.z, fn);
      return;
    }
    for (int dx = -ring; dx <= ring; ++dx)
      for (int dy = -ring; dy <= ring; ++dy)
        for (int dz = -ring; dz <= ring; ++dz) {
          const int cheb = std::max({std::abs(dx), std::abs(dy), std::abs(dz)});
          if (cheb != ring) continue;
          visit_cell(c.x + dx, c.y + dy, c.z + dz, fn);
        }
  }

  double cell_;
  std::vector<Vec3> points_;
  std::unordered_map<VoxelKey, std::vector<int>, VoxelKeyHash> cells_;
  VoxelKey lo_{std::numeric_limits<std::int32_t>::max(),
               std::numeric_limits<std::int32_t>::max(),
               std::numeric_limits<std::int32_t>::max()};
  VoxelKey hi_{std::numeric_limits<std::int32_t>::min(),
               std::numeric_limits<std::int32_t>::min(),
               std::numeric_limits<std::int32_t>::min()};
};

}  // namespace ligs
