#include "ligs/ssim.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ligs {
namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWindow>& window_weights() {
  static const std::array<double, kWindow> w = [] {
    std::array<double, kWindow> out{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      double d = i - kHalf;
      out[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
  }();
  return w;
}

// Separable Gaussian blur with zero padding, one channel.
void blur_plane(const std::vector<double>& in, int w, int h,
                std::vector<double>& tmp, std::vector<double>& out) {
  const auto& k = window_weights();
  tmp.assign(in.size(), 0.0);
  out.assign(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      int lo = std::max(0, x - kHalf);
      int hi = std::min(w - 1, x + kHalf);
      for (int xx = lo; xx <= hi; ++xx) {
        acc += k[static_cast<std::size_t>(xx - x + kHalf)] *
               in[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      int lo = std::max(0, y - kHalf);
      int hi = std::min(h - 1, y + kHalf);
      for (int yy = lo; yy <= hi; ++yy) {
        acc += k[static_cast<std::size_t>(yy - y + kHalf)] *
               tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
}

void extract_plane(const ImageD& img, int ch, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out[static_cast<std::size_t>(y) * img.width + x] = img.at(x, y, ch);
}

void check_pair(const ImageD& x, const ImageD& y) {
  if (x.width != y.width || x.height != y.height ||
      x.channels != y.channels) {
    throw std::invalid_argument("ssim: image shapes differ");
  }
  if (x.width <= 0 || x.height <= 0) {
    throw std::invalid_argument("ssim: empty image");
  }
}

struct ChannelStats {
  std::vector<double> ux, uy, vx, vy, wxy;  // blurred x, y, x^2, y^2, x*y
};

ChannelStats channel_stats(const std::vector<double>& px,
                           const std::vector<double>& py, int w, int h) {
  ChannelStats s;
  std::vector<double> tmp, prod(px.size());
  blur_plane(px, w, h, tmp, s.ux);
  blur_plane(py, w, h, tmp, s.uy);
  for (std::size_t i = 0; i < px.size(); ++i) prod[i] = px[i] * px[i];
  blur_plane(prod, w, h, tmp, s.vx);
  for (std::size_t i = 0; i < px.size(); ++i) prod[i] = py[i] * py[i];
  blur_plane(prod, w, h, tmp, s.vy);
  for (std::size_t i = 0; i < px.size(); ++i) prod[i] = px[i] * py[i];
  blur_plane(prod, w, h, tmp, s.wxy);
  return s;
}

}  // namespace

ImageD ssim_map(const ImageD& x, const ImageD& y) {
  check_pair(x, y);
  ImageD map(x.width, x.height, 1);
  std::vector<double> px, py;
  for (int c = 0; c < x.channels; ++c) {
    extract_plane(x, c, px);
    extract_plane(y, c, py);
    ChannelStats s = channel_stats(px, py, x.width, x.height);
    for (std::size_t i = 0; i < px.size(); ++i) {
      double mx = s.ux[i], my = s.uy[i];
      double sxx = s.vx[i] - mx * mx;
      double syy = s.vy[i] - my * my;
      double sxy = s.wxy[i] - mx * my;
      double a1 = 2.0 * mx * my + kC1;
      double a2 = 2.0 * sxy + kC2;
      double b1 = mx * mx + my * my + kC1;
      double b2 = sxx + syy + kC2;
      map.data[i] += (a1 * a2) / (b1 * b2) / x.channels;
    }
  }
  return map;
}

double ssim_mean(const ImageD& x, const ImageD& y) {
  ImageD map = ssim_map(x, y);
  double sum = 0.0;
  for (double v : map.data) sum += v;
  return sum / static_cast<double>(map.data.size());
}

ImageD ssim_backward(const ImageD& x, const ImageD& y,
                     const ImageD& grad_map) {
  check_pair(x, y);
  if (grad_map.width != x.width || grad_map.height != x.height ||
      grad_map.channels != 1) {
    throw std::invalid_argument("ssim_backward: grad map shape mismatch");
  }
  ImageD grad(x.width, x.height, x.channels);
  const int w = x.width, h = x.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> px, py, g_mu(n), g_v(n), g_w(n), tmp, b_mu, b_v, b_w;
  for (int c = 0; c < x.channels; ++c) {
    extract_plane(x, c, px);
    extract_plane(y, c, py);
    ChannelStats s = channel_stats(px, py, w, h);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = s.ux[i], my = s.uy[i];
      double sxx = s.vx[i] - mx * mx;
      double syy = s.vy[i] - my * my;
      double sxy = s.wxy[i] - mx * my;
      double a1 = 2.0 * mx * my + kC1;
      double a2 = 2.0 * sxy + kC2;
      double b1 = mx * mx + my * my + kC1;
      double b2 = sxx + syy + kC2;
      double ssim = (a1 * a2) / (b1 * b2);
      double g = grad_map.data[i] / x.channels;
      // Partials of SSIM in terms of the blurred moments. sxx and sxy carry
      // the mean back into the moment fields, handled here explicitly.
      double d_mu = 2.0 * my * (a2 - a1) / (b1 * b2) -
                    2.0 * mx * ssim * (1.0 / b1 - 1.0 / b2);
      double d_v = -ssim / b2;           // via sxx = vx - mx^2
      double d_w = 2.0 * a1 / (b1 * b2); // via sxy = wxy - mx*my
      g_mu[i] = g * d_mu;
      g_v[i] = g * d_v;
      g_w[i] = g * d_w;
    }
    // The window is symmetric and zero padded, so the adjoint of the blur is
    // the blur itself.
    blur_plane(g_mu, w, h, tmp, b_mu);
    blur_plane(g_v, w, h, tmp, b_v);
    blur_plane(g_w, w, h, tmp, b_w);
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        std::size_t i = static_cast<std::size_t>(yy) * w + xx;
        grad.at(xx, yy, c) = b_mu[i] + 2.0 * px[i] * b_v[i] + py[i] * b_w[i];
      }
    }
  }
  return grad;
}

}  // namespace ligs
