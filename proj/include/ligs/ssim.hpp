#pragma once

#include "ligs/image.hpp"

namespace ligs {

// Structural similarity with the usual 11x11 Gaussian window (sigma 1.5)
// and stability constants C1 = 0.01^2, C2 = 0.03^2 for [0, 1] images.
// Borders use zero padding, so the map is defined on every pixel.
//
// The returned map has one channel: the per-pixel SSIM averaged over the
// input channels. Inputs must match in size and channel count.
ImageD ssim_map(const ImageD& x, const ImageD& y);

// Mean of ssim_map over all pixels (convenience for evaluation).
double ssim_mean(const ImageD& x, const ImageD& y);

// d(sum_p grad_map(p) * ssim_map(x, y)(p)) / dx. grad_map is single
// channel; the result has the channel count of x. y is treated as a
// constant (the ground-truth image).
ImageD ssim_backward(const ImageD& x, const ImageD& y, const ImageD& grad_map);

}  // namespace ligs

