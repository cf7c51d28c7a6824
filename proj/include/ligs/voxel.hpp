#pragma once

#include "ligs/types.hpp"

#include <cmath>
#include <cstdint>
#include <functional>

namespace ligs {

struct VoxelKey {
  std::int32_t x = 0, y = 0, z = 0;
  bool operator==(const VoxelKey&) const = default;
};

inline VoxelKey voxel_key_of(const Vec3& p, double voxel_size) {
  return {static_cast<std::int32_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.z() / voxel_size))};
}

inline Vec3 voxel_center(const VoxelKey& k, double voxel_size) {
  return {(k.x + 0.5) * voxel_size, (k.y + 0.5) * voxel_size,
          (k.z + 0.5) * voxel_size};
}

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    // Large-prime mix, same recipe most voxel maps use. Collisions are fine,
    // the containers resolve them.
    std::uint64_t h = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.x)) * 73856093ull;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y)) * 19349669ull;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.z)) * 83492791ull;
    return static_cast<std::size_t>(h);
  }
};

}  // namespace ligs
