#include "ligs/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "ligs/parallel.hpp"
#include "ligs/ssim.hpp"

namespace ligs {
namespace {

// Per-surfel data in the camera frame, plus the view-dependent color. The
// forward and backward passes share this so both see identical arithmetic.
struct CamSurfel {
  Vec3 pc = Vec3::Zero();          // center
  Vec3 tu = Vec3::Zero();          // tangent axes
  Vec3 tv = Vec3::Zero();
  Vec3 n = Vec3::Zero();           // unit normal (unflipped)
  Vec3 cross = Vec3::Zero();       // tu x tv before normalization
  double ru = 0.0, rv = 0.0, opacity = 0.0;
  Vec3 color = Vec3::Zero();       // clamped SH color for this view
  Vec3 raw_color = Vec3::Zero();   // before the clamp (for the backward mask)
  Vec3 dir = Vec3::Zero();         // unit camera-to-center direction, world
  double dist = 0.0;               // distance camera to center
  bool visible = false;
  int tx0 = 0, tx1 = -1, ty0 = 0, ty1 = -1;  // inclusive tile range
};

struct Prepared {
  std::vector<CamSurfel> surfels;
  std::vector<std::vector<int>> tiles;  // candidate surfels per tile
  int tiles_x = 0, tiles_y = 0;
};

Prepared prepare(const SurfelSet& s, const CameraModel& cam,
                 const RenderParams& params) {
  Prepared out;
  out.tiles_x = (cam.width + params.tile - 1) / params.tile;
  out.tiles_y = (cam.height + params.tile - 1) / params.tile;
  out.tiles.resize(static_cast<std::size_t>(out.tiles_x) * out.tiles_y);
  out.surfels.resize(s.size());
  const Vec3 center = cam.world_center();

  parallel_for(s.size(), [&](std::size_t i) {
    CamSurfel& c = out.surfels[i];
    c.pc = cam.to_camera(s.p[i]);
    c.tu = cam.R * s.t_u[i];
    c.tv = cam.R * s.t_v[i];
    c.cross = c.tu.cross(c.tv);
    double cn = c.cross.norm();
    if (cn < 1e-12) return;  // degenerate frame, skip this view
    c.n = c.cross / cn;
    c.ru = s.r_u[i];
    c.rv = s.r_v[i];
    c.opacity = s.opacity[i];

    Vec3 off = s.p[i] - center;
    c.dist = off.norm();
    c.dir = c.dist > 1e-12 ? Vec3(off / c.dist) : Vec3(0, 0, 1);
    double basis[4] = {0, 0, 0, 0};
    surfel_color_basis(s.sh_degree, c.dir, basis);
    const double* sh = s.sh_at(i);
    const int coeffs = s.sh_coeffs();
    for (int ch = 0; ch < 3; ++ch) {
      double v = 0.5;
      for (int j = 0; j < coeffs; ++j) v += basis[j] * sh[j * 3 + ch];
      c.raw_color[ch] = v;
      c.color[ch] = std::max(0.0, v);
    }

    // Conservative screen box of the 3-sigma disk via its bounding sphere.
    const double radius = params.mahal_cutoff * std::max(c.ru, c.rv);
    const double zmax = c.pc.z() + radius;
    if (zmax <= 1e-6 || c.opacity <= 0.0) return;  // fully behind the camera
    double umin, umax, vmin, vmax;
    const double zmin = c.pc.z() - radius;
    if (zmin <= 1e-6) {
      // Sphere crosses the camera plane: projection unbounded, keep it all.
      umin = 0.0;
      umax = cam.width - 1.0;
      vmin = 0.0;
      vmax = cam.height - 1.0;
    } else {
      auto span = [&](double lo, double hi, double f, double cc, double& a,
                      double& b) {
        a = cc + f * std::min(lo / zmin, lo / zmax);
        b = cc + f * std::max(hi / zmin, hi / zmax);
      };
      span(c.pc.x() - radius, c.pc.x() + radius, cam.fx, cam.cx, umin, umax);
      span(c.pc.y() - radius, c.pc.y() + radius, cam.fy, cam.cy, vmin, vmax);
    }
    int px0 = std::max(0, static_cast<int>(std::ceil(umin - 1e-6)));
    int px1 = std::min(cam.width - 1, static_cast<int>(std::floor(umax + 1e-6)));
    int py0 = std::max(0, static_cast<int>(std::ceil(vmin - 1e-6)));
    int py1 = std::min(cam.height - 1, static_cast<int>(std::floor(vmax + 1e-6)));
    if (px0 > px1 || py0 > py1) return;
    c.tx0 = px0 / params.tile;
    c.tx1 = px1 / params.tile;
    c.ty0 = py0 / params.tile;
    c.ty1 = py1 / params.tile;
    c.visible = true;
  });

  for (std::size_t i = 0; i < out.surfels.size(); ++i) {
    const CamSurfel& c = out.surfels[i];
    if (!c.visible) continue;
    for (int ty = c.ty0; ty <= c.ty1; ++ty)
      for (int tx = c.tx0; tx <= c.tx1; ++tx)
        out.tiles[static_cast<std::size_t>(ty) * out.tiles_x + tx].push_back(
            static_cast<int>(i));
  }
  return out;
}

struct PixelHit {
  double t = 0.0;
  int index = 0;
  double alpha = 0.0;
  double u = 0.0, v = 0.0;  // radius units
  double flip = 1.0;        // normal orientation toward the viewer
};

// Intersect one candidate; shared by forward and backward.
bool intersect(const CamSurfel& c, const Vec3& d, const RenderParams& params,
               PixelHit& hit) {
  const double denom = c.n.dot(d);
  if (std::abs(denom) < 1e-9) return false;
  const double t = c.n.dot(c.pc) / denom;
  if (t <= 1e-9) return false;
  const Vec3 rel = t * d - c.pc;
  const double u = rel.dot(c.tu) / c.ru;
  const double v = rel.dot(c.tv) / c.rv;
  const double m2 = u * u + v * v;
  if (m2 > params.mahal_cutoff * params.mahal_cutoff) return false;
  const double alpha = c.opacity * std::exp(-0.5 * m2);
  if (alpha < params.alpha_cutoff) return false;
  hit.t = t;
  hit.u = u;
  hit.v = v;
  hit.alpha = alpha;
  hit.flip = denom > 0.0 ? -1.0 : 1.0;
  return true;
}

void gather_sorted(const Prepared& prep, const RenderParams& params,
                   const Vec3& d, int tile_id, std::vector<PixelHit>& hits) {
  hits.clear();
  for (int idx : prep.tiles[static_cast<std::size_t>(tile_id)]) {
    PixelHit h;
    if (!intersect(prep.surfels[static_cast<std::size_t>(idx)], d, params, h))
      continue;
    h.index = idx;
    hits.push_back(h);
  }
  std::sort(hits.begin(), hits.end(), [](const PixelHit& a, const PixelHit& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.index < b.index;
  });
}

}  // namespace

RenderBuffers render(const SurfelSet& s, const CameraModel& cam,
                     const RenderParams& params) {
  if (cam.width <= 0 || cam.height <= 0)
    throw std::invalid_argument("render: empty camera image plane");
  RenderBuffers rb;
  rb.width = cam.width;
  rb.height = cam.height;
  rb.color = ImageD(cam.width, cam.height, 3);
  rb.depth = ImageD(cam.width, cam.height, 1);
  rb.normal = ImageD(cam.width, cam.height, 3);
  rb.silhouette = ImageD(cam.width, cam.height, 1);
  rb.contributors.assign(static_cast<std::size_t>(cam.width) * cam.height, {});

  const Prepared prep = prepare(s, cam, params);

  parallel_chunks(static_cast<std::size_t>(cam.height), 8, [&](std::size_t y0,
                                                               std::size_t y1) {
    std::vector<PixelHit> hits;
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const Vec3 d = cam.pixel_ray(static_cast<double>(x),
                                     static_cast<double>(y));
        const int tile_id = static_cast<int>(y) / params.tile * prep.tiles_x +
                            x / params.tile;
        gather_sorted(prep, params, d, tile_id, hits);
        if (hits.empty()) continue;

        double T = 1.0, sil = 0.0, depth = 0.0;
        Vec3 color = Vec3::Zero(), normal = Vec3::Zero();
        auto& contrib = rb.contributors[y * cam.width + x];
        for (const PixelHit& h : hits) {
          const CamSurfel& c = prep.surfels[static_cast<std::size_t>(h.index)];
          const double w = h.alpha * T;
          color += w * c.color;
          depth += w * h.t;
          normal += w * (h.flip * c.n);
          sil += w;
          contrib.push_back(h.index);
          T *= 1.0 - h.alpha;
          if (T < params.transmittance_floor) break;
        }
        for (int ch = 0; ch < 3; ++ch) rb.color.at(x, static_cast<int>(y), ch) = color[ch];
        rb.silhouette.at(x, static_cast<int>(y), 0) = sil;
        if (sil > params.alpha_floor) {
          rb.depth.at(x, static_cast<int>(y), 0) = depth / sil;
          for (int ch = 0; ch < 3; ++ch)
            rb.normal.at(x, static_cast<int>(y), ch) = normal[ch] / sil;
        }
      }
    }
  });
  return rb;
}

namespace {

bool nonsky(const ViewTarget& t, int x, int y) {
  return !t.sky_mask || t.sky_mask->at(x, y, 0) > 0.5;
}

ImageD masked_reference(const RenderBuffers& rb, const ViewTarget& target) {
  ImageD gt(rb.width, rb.height, 3);
  for (int y = 0; y < rb.height; ++y)
    for (int x = 0; x < rb.width; ++x) {
      const bool keep = nonsky(target, x, y);
      for (int ch = 0; ch < 3; ++ch)
        gt.at(x, y, ch) = keep ? target.image->at(x, y, ch) : 0.0;
    }
  return gt;
}

void check_target(const RenderBuffers& rb, const ViewTarget& target) {
  auto shape = [&](const ImageD* img, int ch, const char* what) {
    if (!img || img->data.empty()) return;
    if (img->width != rb.width || img->height != rb.height ||
        img->channels != ch)
      throw std::invalid_argument(std::string("image losses: bad shape for ") +
                                  what);
  };
  shape(target.image, 3, "image");
  shape(target.sky_mask, 1, "sky mask");
  shape(target.depth, 1, "depth");
  shape(target.normal, 3, "normal");
  shape(target.validity, 2, "validity");
}

}  // namespace

ImageLossBreakdown compute_image_losses(const RenderBuffers& rb,
                                        const ViewTarget& target,
                                        const LossWeights& weights) {
  ImageLossBreakdown br;
  check_target(rb, target);
  {
    if (target.image && !target.image->data.empty()) {
      ImageD gt = masked_reference(rb, target);
      ImageD smap = ssim_map(rb.color, gt);
      double l1 = 0.0, ds = 0.0;
      for (int y = 0; y < rb.height; ++y)
        for (int x = 0; x < rb.width; ++x) {
          if (!nonsky(target, x, y)) continue;
          ++br.photo_pixels;
          for (int ch = 0; ch < 3; ++ch)
            l1 += std::abs(rb.color.at(x, y, ch) - gt.at(x, y, ch));
          ds += 0.5 * (1.0 - smap.at(x, y, 0));
        }
      if (br.photo_pixels > 0) {
        br.l1 = l1 / (3.0 * br.photo_pixels);
        br.dssim = ds / br.photo_pixels;
        br.l_photo = weights.l1_weight * br.l1 + weights.dssim_weight * br.dssim;
      }
    }
    if (target.sky_mask && !target.sky_mask->data.empty()) {
      double sky = 0.0;
      for (int y = 0; y < rb.height; ++y)
        for (int x = 0; x < rb.width; ++x) {
          if (nonsky(target, x, y)) continue;
          ++br.sky_pixels;
          sky += std::abs(rb.silhouette.at(x, y, 0));
        }
      if (br.sky_pixels > 0) br.l_sky = sky / br.sky_pixels;
    }
    if (target.depth && !target.depth->data.empty() && target.validity) {
      double acc = 0.0;
      for (int y = 0; y < rb.height; ++y)
        for (int x = 0; x < rb.width; ++x) {
          if (target.validity->at(x, y, 0) <= 0.5) continue;
          ++br.depth_pixels;
          acc += std::abs(rb.depth.at(x, y, 0) - target.depth->at(x, y, 0));
        }
      if (br.depth_pixels > 0) br.l_depth = acc / br.depth_pixels;
    }
    if (target.normal && !target.normal->data.empty() && target.validity) {
      double acc = 0.0;
      for (int y = 0; y < rb.height; ++y)
        for (int x = 0; x < rb.width; ++x) {
          if (target.validity->at(x, y, 1) <= 0.5) continue;
          ++br.normal_pixels;
          double dot = 0.0;
          for (int ch = 0; ch < 3; ++ch)
            dot += rb.normal.at(x, y, ch) * target.normal->at(x, y, ch);
          acc += 1.0 - dot;
        }
      if (br.normal_pixels > 0) br.l_normal = acc / br.normal_pixels;
    }
  }
  return br;
}

double total_loss(const ImageLossBreakdown& img, double l_gmm,
                  const LossWeights& weights) {
  return weights.lambda_gmm * l_gmm + img.l_photo + img.l_sky +
         weights.lambda_d * img.l_depth + weights.lambda_n * img.l_normal;
}

BufferGrads image_loss_gradients(const RenderBuffers& rb,
                                 const ViewTarget& target,
                                 const LossWeights& weights,
                                 ImageLossBreakdown* breakdown) {
  check_target(rb, target);
  ImageLossBreakdown br = compute_image_losses(rb, target, weights);
  if (breakdown) *breakdown = br;

  BufferGrads bg;
  bg.color = ImageD(rb.width, rb.height, 3);
  bg.depth = ImageD(rb.width, rb.height, 1);
  bg.normal = ImageD(rb.width, rb.height, 3);
  bg.silhouette = ImageD(rb.width, rb.height, 1);

  if (target.image && !target.image->data.empty() && br.photo_pixels > 0) {
    ImageD gt = masked_reference(rb, target);
    const double l1_scale = weights.l1_weight / (3.0 * br.photo_pixels);
    ImageD grad_map(rb.width, rb.height, 1);
    const double dssim_scale = -0.5 * weights.dssim_weight / br.photo_pixels;
    for (int y = 0; y < rb.height; ++y)
      for (int x = 0; x < rb.width; ++x) {
        if (!nonsky(target, x, y)) continue;
        for (int ch = 0; ch < 3; ++ch) {
          double diff = rb.color.at(x, y, ch) - gt.at(x, y, ch);
          if (diff > 0.0)
            bg.color.at(x, y, ch) += l1_scale;
          else if (diff < 0.0)
            bg.color.at(x, y, ch) -= l1_scale;
        }
        grad_map.at(x, y, 0) = dssim_scale;
      }
    ImageD sgrad = ssim_backward(rb.color, gt, grad_map);
    for (std::size_t i = 0; i < sgrad.data.size(); ++i)
      bg.color.data[i] += sgrad.data[i];
  }
  if (target.sky_mask && !target.sky_mask->data.empty() && br.sky_pixels > 0) {
    const double scale = 1.0 / br.sky_pixels;
    for (int y = 0; y < rb.height; ++y)
      for (int x = 0; x < rb.width; ++x) {
        if (nonsky(target, x, y)) continue;
        double s = rb.silhouette.at(x, y, 0);
        if (s > 0.0)
          bg.silhouette.at(x, y, 0) += scale;
        else if (s < 0.0)
          bg.silhouette.at(x, y, 0) -= scale;
      }
  }
  if (target.depth && !target.depth->data.empty() && target.validity &&
      br.depth_pixels > 0) {
    const double scale = weights.lambda_d / br.depth_pixels;
    for (int y = 0; y < rb.height; ++y)
      for (int x = 0; x < rb.width; ++x) {
        if (target.validity->at(x, y, 0) <= 0.5) continue;
        double diff = rb.depth.at(x, y, 0) - target.depth->at(x, y, 0);
        if (diff > 0.0)
          bg.depth.at(x, y, 0) += scale;
        else if (diff < 0.0)
          bg.depth.at(x, y, 0) -= scale;
      }
  }
  if (target.normal && !target.normal->data.empty() && target.validity &&
      br.normal_pixels > 0) {
    const double scale = weights.lambda_n / br.normal_pixels;
    for (int y = 0; y < rb.height; ++y)
      for (int x = 0; x < rb.width; ++x) {
        if (target.validity->at(x, y, 1) <= 0.5) continue;
        for (int ch = 0; ch < 3; ++ch)
          bg.normal.at(x, y, ch) -= scale * target.normal->at(x, y, ch);
      }
  }
  return bg;
}

namespace {

// Per-surfel gradient accumulator for one backward chunk.
struct SurfelAcc {
  Vec3 p = Vec3::Zero(), tu = Vec3::Zero(), tv = Vec3::Zero();
  double ru = 0.0, rv = 0.0, opacity = 0.0;
  Vec2 screen = Vec2::Zero();
  double sh[12] = {0};
  bool touched = false;
};

}  // namespace

void render_gradients(const SurfelSet& s, const CameraModel& cam,
                      const RenderParams& params, const RenderBuffers& rb,
                      const BufferGrads& bg, SurfelGrads& grads,
                      std::vector<Vec2>* screen_grad,
                      std::vector<std::uint8_t>* contributed) {
  if (rb.width != cam.width || rb.height != cam.height)
    throw std::invalid_argument("render_gradients: buffer/camera mismatch");
  const Prepared prep = prepare(s, cam, params);
  const int coeffs = s.sh_coeffs();
  const int stride = s.sh_stride();
  if (stride > 12)
    throw std::invalid_argument("render_gradients: SH degree above 1");

  const std::size_t chunk_rows = 8;
  const std::size_t num_chunks =
      (static_cast<std::size_t>(cam.height) + chunk_rows - 1) / chunk_rows;
  std::vector<std::map<int, SurfelAcc>> partials(num_chunks);

  parallel_chunks(static_cast<std::size_t>(cam.height), chunk_rows,
                  [&](std::size_t y0, std::size_t y1) {
    auto& local = partials[y0 / chunk_rows];
    std::vector<PixelHit> hits;
    std::vector<double> dLdw;
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        const auto& contrib = rb.contributors[y * cam.width + x];
        if (contrib.empty()) continue;
        const Vec3 d = cam.pixel_ray(static_cast<double>(x),
                                     static_cast<double>(y));
        // Rebuild the composited quantities in stored order.
        hits.clear();
        for (int idx : contrib) {
          PixelHit h;
          if (!intersect(prep.surfels[static_cast<std::size_t>(idx)], d,
                         params, h)) {
            // The forward pass composited this surfel, so the rebuild
            // must agree; bail out loudly if it ever does not.
            throw std::logic_error("render_gradients: contributor mismatch");
          }
          h.index = idx;
          hits.push_back(h);
        }

        const Vec3 gC(bg.color.at(x, static_cast<int>(y), 0),
                      bg.color.at(x, static_cast<int>(y), 1),
                      bg.color.at(x, static_cast<int>(y), 2));
        const double gD = bg.depth.at(x, static_cast<int>(y), 0);
        const Vec3 gN(bg.normal.at(x, static_cast<int>(y), 0),
                      bg.normal.at(x, static_cast<int>(y), 1),
                      bg.normal.at(x, static_cast<int>(y), 2));
        const double gA = bg.silhouette.at(x, static_cast<int>(y), 0);

        // Forward recap for the normalization terms.
        double T = 1.0, sil = 0.0, depth_pre = 0.0;
        Vec3 normal_pre = Vec3::Zero();
        for (const PixelHit& h : hits) {
          const CamSurfel& c = prep.surfels[static_cast<std::size_t>(h.index)];
          const double w = h.alpha * T;
          depth_pre += w * h.t;
          normal_pre += w * (h.flip * c.n);
          sil += w;
          T *= 1.0 - h.alpha;
        }
        const bool covered = sil > params.alpha_floor;
        const double gPD = covered ? gD / sil : 0.0;
        const Vec3 gPN = covered ? Vec3(gN / sil) : Vec3(Vec3::Zero());
        double gAll = gA;
        if (covered) {
          gAll -= gD * (depth_pre / sil) / sil;
          gAll -= gN.dot(normal_pre / sil) / sil;
        }

        // Upstream per contributor weight.
        dLdw.assign(hits.size(), 0.0);
        for (std::size_t k = 0; k < hits.size(); ++k) {
          const CamSurfel& c =
              prep.surfels[static_cast<std::size_t>(hits[k].index)];
          dLdw[k] = gC.dot(c.color) + gPD * hits[k].t +
                    gPN.dot(hits[k].flip * c.n) + gAll;
        }

        // Back-to-front: suffix sum of w_j * dL/dw_j gives the occlusion
        // term of dL/dalpha_i.
        std::vector<double> Ts(hits.size());
        double Tcur = 1.0;
        for (std::size_t k = 0; k < hits.size(); ++k) {
          Ts[k] = Tcur;
          Tcur *= 1.0 - hits[k].alpha;
        }
        double suffix = 0.0;
        for (std::size_t kk = hits.size(); kk-- > 0;) {
          const PixelHit& h = hits[kk];
          const CamSurfel& c = prep.surfels[static_cast<std::size_t>(h.index)];
          const double w = h.alpha * Ts[kk];
          const double dLda =
              dLdw[kk] * Ts[kk] - suffix / std::max(1.0 - h.alpha, 1e-4);
          suffix += dLdw[kk] * w;

          SurfelAcc& acc = local[h.index];
          acc.touched = true;

          // Color path (per-view SH basis; the clamp gates the flow).
          double basis[4] = {0, 0, 0, 0};
          surfel_color_basis(s.sh_degree, c.dir, basis);
          Vec3 dLdcol = w * gC;
          for (int ch = 0; ch < 3; ++ch) {
            if (c.raw_color[ch] <= 0.0) continue;
            for (int j = 0; j < coeffs; ++j)
              acc.sh[j * 3 + ch] += basis[j] * dLdcol[ch];
          }
          // Degree 1 basis depends on the view direction, which moves with
          // the center.
          Vec3 dLdp_world_extra = Vec3::Zero();
          if (s.sh_degree >= 1) {
            const double* shc = s.sh_at(static_cast<std::size_t>(h.index));
            Vec3 dLddir = Vec3::Zero();
            for (int ch = 0; ch < 3; ++ch) {
              if (c.raw_color[ch] <= 0.0) continue;
              const double g = dLdcol[ch];
              dLddir.x() += g * (-kSh1) * shc[3 * 3 + ch];
              dLddir.y() += g * (-kSh1) * shc[1 * 3 + ch];
              dLddir.z() += g * (kSh1)*shc[2 * 3 + ch];
            }
            if (c.dist > 1e-12) {
              dLdp_world_extra =
                  (dLddir - c.dir * c.dir.dot(dLddir)) / c.dist;
            }
          }

          // Alpha path.
          const double f = h.alpha / c.opacity;
          acc.opacity += f * dLda;
          const double dLdf = c.opacity * dLda;
          double dLdu = -dLdf * f * h.u;
          double dLdv = -dLdf * f * h.v;

          // Depth and normal buffer paths.
          double dLdt = gPD * w;
          Vec3 dLdn = h.flip * (w * gPN);

          // Ray/plane chain. rel = t*d - pc; u = rel.tu / ru.
          const Vec3 rel = h.t * d - c.pc;
          acc.ru += dLdu * (-h.u / c.ru);
          acc.rv += dLdv * (-h.v / c.rv);
          const double denom = c.n.dot(d);
          dLdt += dLdu * c.tu.dot(d) / c.ru + dLdv * c.tv.dot(d) / c.rv;
          Vec3 dLdpc = dLdt * c.n / denom -
                       (dLdu / c.ru) * c.tu - (dLdv / c.rv) * c.tv;
          Vec3 dLdtu = (dLdu / c.ru) * rel;
          Vec3 dLdtv = (dLdv / c.rv) * rel;
          dLdn += dLdt * (-rel) / denom;

          // Normal back to the tangent frame through normalize(cross).
          const double cn = c.cross.norm();
          Vec3 dLdcross = (dLdn - c.n * c.n.dot(dLdn)) / cn;
          dLdtu += c.tv.cross(dLdcross);
          dLdtv += dLdcross.cross(c.tu);

          // Camera frame back to world.
          acc.p += cam.R.transpose() * dLdpc + dLdp_world_extra;
          acc.tu += cam.R.transpose() * dLdtu;
          acc.tv += cam.R.transpose() * dLdtv;

          // Image-plane projection of the positional gradient, scaled to
          // half-image units so thresholds match across resolutions.
          acc.screen.x() += dLdpc.x() * c.pc.z() / cam.fx * 0.5 * cam.width;
          acc.screen.y() += dLdpc.y() * c.pc.z() / cam.fy * 0.5 * cam.height;
        }
      }
    }
  });

  if (screen_grad && screen_grad->size() != s.size())
    screen_grad->assign(s.size(), Vec2::Zero());
  if (contributed && contributed->size() != s.size())
    contributed->assign(s.size(), 0);
  for (const auto& local : partials) {
    for (const auto& [idx, acc] : local) {
      if (!acc.touched) continue;
      const std::size_t i = static_cast<std::size_t>(idx);
      grads.p[i] += acc.p;
      grads.t_u[i] += acc.tu;
      grads.t_v[i] += acc.tv;
      grads.r_u[i] += acc.ru;
      grads.r_v[i] += acc.rv;
      grads.opacity[i] += acc.opacity;
      for (int j = 0; j < stride; ++j) grads.sh[i * stride + j] += acc.sh[j];
      if (screen_grad) (*screen_grad)[i] += acc.screen;
      if (contributed) (*contributed)[i] = 1;
    }
  }
}

}  // namespace ligs
