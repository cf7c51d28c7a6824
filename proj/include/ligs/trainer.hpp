#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ligs/density_control.hpp"
#include "ligs/gmm.hpp"
#include "ligs/renderer.hpp"
#include "ligs/supervision.hpp"
#include "ligs/surfel.hpp"

namespace ligs {

// One training (or test) view: image, sky mask, and the sensor-derived
// depth/normal rasters with their validity mask. depth/normal/validity may
// be empty when those supervision terms are off.
struct TrainView {
  std::string name;
  CameraModel cam;
  ImageD image;     // 3 channels in [0,1]
  ImageD sky_mask;  // 1 channel, >0.5 means scene
  ImageD depth;     // 1 channel, meters
  ImageD normal;    // 3 channels, camera frame
  ImageD validity;  // 2 channels: depth valid, normal valid
};

struct TrainParams {
  int iterations = 5000;
  double lr_position = 1.6e-4;
  double lr_position_final = 1.6e-6;
  double lr_opacity = 0.05;
  double lr_radii = 0.005;
  double lr_rotation = 0.001;
  double lr_appearance = 0.0025;
  LossWeights weights;
  GmmLossParams gmm;
  DensityParams density;
  bool density_enabled = true;
  int refresh_every = 100;  // neighbor-cache refresh period, iterations
  std::uint64_t seed = 1;
  RenderParams render;
  std::vector<int> checkpoint_iters;  // surfel snapshots (and abort fallback)
  std::string work_dir;  // when set: checkpoint PLYs and the CSV log land here
};

struct TrainLogRecord {
  int iteration = 0;
  double l_photo = 0, l_sky = 0, l_depth = 0, l_normal = 0;
  double l_dis = 0, l_control = 0, l_normal_gmm = 0;
  double total = 0;
  int count = 0;
  double ms = 0;
  int cloned = 0, split = 0, pruned = 0;
};

struct TrainResult {
  SurfelSet surfels;
  std::vector<TrainLogRecord> log;
  bool aborted = false;
  int iterations_run = 0;
};

// Exponential decay from lr_position to lr_position_final across the run.
double position_lr(const TrainParams& params, int iteration);

// One Adam update on a scalar; step starts at 1. Exposed for testing; the
// trainer applies exactly this per parameter.
double adam_update(double& m, double& v, double grad, int step, double lr,
                   double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-15);

// Rotation of x by the (not necessarily unit) quaternion q = (w, x, y, z);
// q is normalized internally. The trainer parameterizes tangent frames
// this way so they stay orthonormal by construction.
Vec3 quat_rotate(const Vec4& q, const Vec3& x);

// Stochastic optimization of the surfel set against the frozen map and the
// given views. Deterministic for a fixed seed and any thread count.
TrainResult train(const SurfelSet& init, const GmmMap& map,
                  const std::vector<TrainView>& views,
                  const TrainParams& params);

struct EvalResult {
  double psnr = 0.0;  // capped at 99 for exact matches
  double ssim = 0.0;
  int views = 0;
};

// Every stride-th view (starting at 0) is the test split.
std::vector<int> view_split(int count, int stride, bool test);

// PSNR/SSIM over non-sky pixels, averaged across the listed views.
EvalResult evaluate_views(const SurfelSet& s,
                          const std::vector<TrainView>& views,
                          const std::vector<int>& indices,
                          const RenderParams& rp = RenderParams());

void write_train_log(const std::vector<TrainLogRecord>& log,
                     const std::string& path);

}  // namespace ligs

