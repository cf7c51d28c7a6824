#pragma once

#include <vector>

#include "ligs/image.hpp"
#include "ligs/supervision.hpp"
#include "ligs/surfel.hpp"
#include "ligs/types.hpp"

namespace ligs {

struct RenderParams {
  // Surfels are skipped per pixel beyond this Mahalanobis radius in the
  // tangent plane, or when their compositing weight is below alpha_cutoff.
  double mahal_cutoff = 3.0;
  double alpha_cutoff = 1.0 / 255.0;
  // Front-to-back accumulation stops once transmittance drops below this.
  double transmittance_floor = 1e-4;
  // Buffers normalized by accumulated alpha only where it exceeds this.
  double alpha_floor = 1e-4;
  int tile = 16;
};

struct RenderBuffers {
  int width = 0, height = 0;
  ImageD color;       // 3 channels, composited over black
  ImageD depth;       // camera-frame z, alpha-normalized where covered
  ImageD normal;      // camera-frame unit normals (flipped toward viewer),
                      // alpha-weighted mean, alpha-normalized where covered
  ImageD silhouette;  // accumulated alpha in [0, 1]
  // Per pixel, the surfels actually composited, front to back. Rebuilding
  // their alphas is cheap, so only indices are retained for the backward
  // pass and for sampling.
  std::vector<std::vector<int>> contributors;
};

RenderBuffers render(const SurfelSet& s, const CameraModel& cam,
                     const RenderParams& params = RenderParams());

// Weights of the full objective. lambda_gmm scales the map-attraction terms
// computed by the supervision module; the rest scale image-space terms.
struct LossWeights {
  double lambda_gmm = 1.0;
  double lambda_d = 0.1;
  double lambda_n = 0.1;
  double l1_weight = 0.8;
  double dssim_weight = 0.2;
};

struct ImageLossBreakdown {
  double l_photo = 0.0;  // l1_weight * L1 + dssim_weight * D-SSIM, non-sky
  double l1 = 0.0;
  double dssim = 0.0;
  double l_sky = 0.0;    // mean |silhouette| over sky pixels
  double l_depth = 0.0;  // L1 over pixels with valid reference depth
  double l_normal = 0.0; // mean (1 - n_rendered . n_reference), valid pixels
  long photo_pixels = 0;
  long sky_pixels = 0;
  long depth_pixels = 0;
  long normal_pixels = 0;
};

// Reference data for one view. sky_mask has 1 channel (>0.5 means scene,
// otherwise sky). depth/normal and their validity mask may be empty when a
// term is unused; validity has 2 channels (0: depth valid, 1: normal valid).
struct ViewTarget {
  const ImageD* image = nullptr;
  const ImageD* sky_mask = nullptr;
  const ImageD* depth = nullptr;
  const ImageD* normal = nullptr;
  const ImageD* validity = nullptr;
};

ImageLossBreakdown compute_image_losses(const RenderBuffers& rb,
                                        const ViewTarget& target,
                                        const LossWeights& weights);

// lambda_gmm * l_gmm + l_photo + l_sky + lambda_d * l_depth
// + lambda_n * l_normal.
double total_loss(const ImageLossBreakdown& img, double l_gmm,
                  const LossWeights& weights);

// Gradients of every buffer entering the image losses, same shapes as the
// buffers themselves. Terms over empty pixel sets contribute nothing.
struct BufferGrads {
  ImageD color, depth, normal, silhouette;
};

BufferGrads image_loss_gradients(const RenderBuffers& rb,
                                 const ViewTarget& target,
                                 const LossWeights& weights,
                                 ImageLossBreakdown* breakdown = nullptr);

// Analytic backward through compositing, the Gaussian kernel, the ray/plane
// intersection, and the SH color. Adds into grads (caller zeroes).
// screen_grad, when given, accumulates per surfel the image-plane projection
// of dL/dp for this view (see density control); contributed marks surfels
// composited into at least one pixel.
void render_gradients(const SurfelSet& s, const CameraModel& cam,
                      const RenderParams& params, const RenderBuffers& rb,
                      const BufferGrads& bg, SurfelGrads& grads,
                      std::vector<Vec2>* screen_grad = nullptr,
                      std::vector<std::uint8_t>* contributed = nullptr);

}  // namespace ligs

