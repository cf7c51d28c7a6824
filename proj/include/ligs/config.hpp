#pragma once

#include "ligs/types.hpp"

#include <cstdint>
#include <string>

namespace ligs {

// Flat key = value pipeline configuration. Every stage reads the same file;
// unknown keys are rejected so typos fail loudly instead of silently using a
// default.
struct PipelineConfig {
  // general
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = decide from hardware / LIGS_THREADS
  std::string scene_dir = "scene";
  std::string work_dir = "work";

  // synthetic scene
  std::string scene_preset = "corner_room";  // corner_room | box_room | street
  double scene_extent = 2.0;        // face width of the floor plan, meters
  double scene_wall_height = 2.0;
  int scene_camera_count = 8;
  double scene_camera_radius = 2.2;
  double scene_camera_height = 1.2;
  double scene_lidar_density = 4200.0;  // points per m^2 of surface
  double scene_noise = 0.0;             // stddev of surface noise, meters
  double scene_gt_spacing = 0.02;       // reference sample grid pitch, meters
  int image_width = 192;
  int image_height = 192;
  double focal_px = 160.0;

  // colorization
  double zbuffer_rel_tol = 0.01;    // relative depth slack for visibility
  int normal_knn = 16;

  // gmm map
  double voxel_size = 1.0;
  double ransac_inlier_threshold = 0.02;
  int ransac_iterations = 200;
  int ransac_min_inliers = 30;
  int ransac_max_planes = 4;
  double meanshift_bandwidth_scale = 0.15;  // fraction of voxel_size, spatial
  double meanshift_bandwidth_gray = 0.15;   // absolute, gray channel
  int em_max_iters = 100;
  double em_tol = 1e-6;
  double cov_floor = 1e-8;
  double effective_rho = -6.0;

  // losses
  double lambda_gmm = 1.0;
  double lambda_d = 0.1;
  double lambda_n = 0.1;
  int gmm_knn = 4;
  double gmm_sigma = 0.1;
  double shape_alpha = 0.5;
  double shape_phi = 0.05;
  int refresh_every = 100;

  // density control
  double omega_growth = 0.4;
  double omega_scale = 0.0002;
  double omega_pruning = 0.003;
  double tau = 0.01;
  double growth_threshold = 0.0002;
  double prune_threshold = 0.005;
  int densify_interval = 100;
  int densify_start = 500;
  int densify_stop = 15000;
  double split_size_threshold = 0.05;

  // trainer
  int iterations = 5000;
  double lr_position = 1.6e-4;
  double lr_position_final = 1.6e-6;
  double lr_opacity = 0.05;
  double lr_radii = 0.005;
  double lr_rotation = 0.001;
  double lr_appearance = 0.0025;
  int sh_degree = 0;  // 0 or 1
  int test_stride = 8;  // every test_stride-th view goes to the eval split

  // mesh extraction filtering
  double occupancy_voxel = 0.3;
  int occupancy_min_points = 3;
  double fine_threshold = 0.05;
  double silhouette_threshold = 0.5;
  double mesh_eval_threshold = 0.2;  // F-score radius, meters

  // Applies one key = value assignment. Throws ConfigError on an unknown key
  // or an unparseable value.
  void set(const std::string& key, const std::string& value);

  // Loads a flat text file: '#' comments, blank lines, `key = value`.
  void load(const std::string& path);

  // Serialized form, one sorted `key = value` per line; parseable by load().
  std::string to_text() const;
  void save(const std::string& path) const;
};

}  // namespace ligs
