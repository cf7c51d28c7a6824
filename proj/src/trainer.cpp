#include "ligs/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "ligs/parallel.hpp"
#include "ligs/rng.hpp"
#include "ligs/ssim.hpp"

namespace ligs {

double position_lr(const TrainParams& params, int iteration) {
  const double span = std::max(1, params.iterations);
  const double t = std::clamp(iteration / span, 0.0, 1.0);
  return params.lr_position *
         std::pow(params.lr_position_final / params.lr_position, t);
}

double adam_update(double& m, double& v, double grad, int step, double lr,
                   double beta1, double beta2, double eps) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad * grad;
  const double mh = m / (1.0 - std::pow(beta1, step));
  const double vh = v / (1.0 - std::pow(beta2, step));
  return -lr * mh / (std::sqrt(vh) + eps);
}

Vec3 quat_rotate(const Vec4& q, const Vec3& x) {
  const Vec4 qh = q / q.norm();
  const double w = qh[0];
  const Vec3 v(qh[1], qh[2], qh[3]);
  return x + 2.0 * w * v.cross(x) + 2.0 * v.cross(v.cross(x));
}

namespace {

constexpr double kLogitMax = 13.8;  // sigmoid within ~1e-6 of the endpoints

double to_logit(double o) {
  const double c = std::clamp(o, 1e-6, 1.0 - 1e-6);
  return std::log(c / (1.0 - c));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// dL/dq for t = R(q / |q|) * x given dL/dt, with q = (w, v).
Vec4 quat_frame_backward(const Vec4& q, const Vec3& x, const Vec3& g) {
  const double r = q.norm();
  const Vec4 qh = q / r;
  const double w = qh[0];
  const Vec3 v(qh[1], qh[2], qh[3]);
  Vec4 d_hat;
  d_hat[0] = 2.0 * v.cross(x).dot(g);
  const Vec3 dv = 2.0 * w * x.cross(g) +
                  2.0 * (v.dot(x) * g + x * v.dot(g) - 2.0 * v * x.dot(g));
  d_hat[1] = dv.x();
  d_hat[2] = dv.y();
  d_hat[3] = dv.z();
  return (d_hat - qh * qh.dot(d_hat)) / r;
}

struct OptState {
  int stride = 0;
  std::vector<Vec4> q;
  std::vector<Vec3> bu, bv;
  std::vector<double> logit;
  std::vector<double> m_pos, v_pos, m_rad, v_rad, m_opa, v_opa, m_sh, v_sh;
  std::vector<Vec4> m_rot, v_rot;

  void init_from(const SurfelSet& s) {
    stride = s.sh_stride();
    const std::size_t n = s.size();
    q.assign(n, Vec4(1, 0, 0, 0));
    bu.assign(s.t_u.begin(), s.t_u.end());
    bv.assign(s.t_v.begin(), s.t_v.end());
    logit.resize(n);
    for (std::size_t i = 0; i < n; ++i) logit[i] = to_logit(s.opacity[i]);
    m_pos.assign(3 * n, 0.0);
    v_pos.assign(3 * n, 0.0);
    m_rot.assign(n, Vec4::Zero());
    v_rot.assign(n, Vec4::Zero());
    m_rad.assign(2 * n, 0.0);
    v_rad.assign(2 * n, 0.0);
    m_opa.assign(n, 0.0);
    v_opa.assign(n, 0.0);
    m_sh.assign(static_cast<std::size_t>(stride) * n, 0.0);
    v_sh.assign(static_cast<std::size_t>(stride) * n, 0.0);
  }

  // Carry state across a density-control mutation. Kept surfels keep their
  // moments and rotation chart; children start fresh on their current frame.
  void remap(const SurfelSet& s, const std::vector<int>& source,
             const std::vector<SurfelOrigin>& origin) {
    OptState next;
    next.init_from(s);
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (origin[j] != SurfelOrigin::kKept) continue;
      const std::size_t i = static_cast<std::size_t>(source[j]);
      next.q[j] = q[i];
      next.bu[j] = bu[i];
      next.bv[j] = bv[i];
      next.logit[j] = logit[i];
      for (int k = 0; k < 3; ++k) {
        next.m_pos[3 * j + k] = m_pos[3 * i + k];
        next.v_pos[3 * j + k] = v_pos[3 * i + k];
      }
      next.m_rot[j] = m_rot[i];
      next.v_rot[j] = v_rot[i];
      for (int k = 0; k < 2; ++k) {
        next.m_rad[2 * j + k] = m_rad[2 * i + k];
        next.v_rad[2 * j + k] = v_rad[2 * i + k];
      }
      next.m_opa[j] = m_opa[i];
      next.v_opa[j] = v_opa[i];
      for (int k = 0; k < stride; ++k) {
        next.m_sh[j * stride + k] = m_sh[i * stride + k];
        next.v_sh[j * stride + k] = v_sh[i * stride + k];
      }
    }
    *this = std::move(next);
  }

  void step(SurfelSet& s, const SurfelGrads& g, int step_idx, double lr_pos,
            const TrainParams& p) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        s.p[i][k] += adam_update(m_pos[3 * i + k], v_pos[3 * i + k],
                                 g.p[i][k], step_idx, lr_pos);
      }
      const Vec4 dq = quat_frame_backward(q[i], bu[i], g.t_u[i]) +
                      quat_frame_backward(q[i], bv[i], g.t_v[i]);
      for (int k = 0; k < 4; ++k) {
        q[i][k] += adam_update(m_rot[i][k], v_rot[i][k], dq[k], step_idx,
                               p.lr_rotation);
      }
      s.t_u[i] = quat_rotate(q[i], bu[i]);
      s.t_v[i] = quat_rotate(q[i], bv[i]);

      s.r_u[i] += adam_update(m_rad[2 * i], v_rad[2 * i], g.r_u[i], step_idx,
                              p.lr_radii);
      s.r_v[i] += adam_update(m_rad[2 * i + 1], v_rad[2 * i + 1], g.r_v[i],
                              step_idx, p.lr_radii);
      s.r_u[i] = std::max(s.r_u[i], kMinRadius);
      s.r_v[i] = std::clamp(s.r_v[i], kMinRadius, s.r_u[i]);

      const double o = s.opacity[i];
      const double dlogit = g.opacity[i] * o * (1.0 - o);
      logit[i] += adam_update(m_opa[i], v_opa[i], dlogit, step_idx,
                              p.lr_opacity);
      logit[i] = std::clamp(logit[i], -kLogitMax, kLogitMax);
      s.opacity[i] = sigmoid(logit[i]);

      for (int k = 0; k < stride; ++k) {
        s.sh[i * stride + k] +=
            adam_update(m_sh[i * stride + k], v_sh[i * stride + k],
                        g.sh[i * stride + k], step_idx, p.lr_appearance);
      }
    }
  }
};

ViewTarget make_target(const TrainView& view) {
  ViewTarget t;
  t.image = &view.image;
  t.sky_mask = view.sky_mask.data.empty() ? nullptr : &view.sky_mask;
  t.depth = view.depth.data.empty() ? nullptr : &view.depth;
  t.normal = view.normal.data.empty() ? nullptr : &view.normal;
  t.validity = view.validity.data.empty() ? nullptr : &view.validity;
  return t;
}

}  // namespace

std::vector<int> view_split(int count, int stride, bool test) {
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    const bool is_test = stride > 0 && i % stride == 0;
    if (is_test == test) out.push_back(i);
  }
  return out;
}

EvalResult evaluate_views(const SurfelSet& s,
                          const std::vector<TrainView>& views,
                          const std::vector<int>& indices,
                          const RenderParams& rp) {
  if (indices.empty())
    throw std::invalid_argument("evaluate_views: empty split");
  EvalResult out;
  for (int idx : indices) {
    const TrainView& view = views.at(static_cast<std::size_t>(idx));
    RenderBuffers rb = render(s, view.cam, rp);
    ImageD gt(rb.width, rb.height, 3);
    double mse = 0.0;
    long pixels = 0;
    for (int y = 0; y < rb.height; ++y)
      for (int x = 0; x < rb.width; ++x) {
        const bool scene =
            view.sky_mask.data.empty() || view.sky_mask.at(x, y, 0) > 0.5;
        for (int ch = 0; ch < 3; ++ch)
          gt.at(x, y, ch) = scene ? view.image.at(x, y, ch) : 0.0;
        if (!scene) continue;
        ++pixels;
        for (int ch = 0; ch < 3; ++ch) {
          const double d = rb.color.at(x, y, ch) - view.image.at(x, y, ch);
          mse += d * d;
        }
      }
    if (pixels == 0)
      throw std::invalid_argument("evaluate_views: view is all sky");
    mse /= 3.0 * pixels;
    out.psnr += mse <= 0.0 ? 99.0 : std::min(99.0, 10.0 * std::log10(1.0 / mse));
    ImageD smap = ssim_map(rb.color, gt);
    double ssim = 0.0;
    for (int y = 0; y < rb.height; ++y)
      for (int x = 0; x < rb.width; ++x) {
        const bool scene =
            view.sky_mask.data.empty() || view.sky_mask.at(x, y, 0) > 0.5;
        if (scene) ssim += smap.at(x, y, 0);
      }
    out.ssim += ssim / pixels;
    ++out.views;
  }
  out.psnr /= out.views;
  out.ssim /= out.views;
  return out;
}

void write_train_log(const std::vector<TrainLogRecord>& log,
                     const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError(path, "cannot write train log");
  std::fprintf(f,
               "iteration,l_photo,l_sky,l_depth,l_normal,l_dis,l_control,"
               "l_normal_gmm,total,count,ms,cloned,split,pruned\n");
  for (const TrainLogRecord& r : log) {
    std::fprintf(f, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%.3f,%d,%d,%d\n",
                 r.iteration, r.l_photo, r.l_sky, r.l_depth, r.l_normal,
                 r.l_dis, r.l_control, r.l_normal_gmm, r.total, r.count, r.ms,
                 r.cloned, r.split, r.pruned);
  }
  std::fclose(f);
}

TrainResult train(const SurfelSet& init, const GmmMap& map,
                  const std::vector<TrainView>& views,
                  const TrainParams& params) {
  TrainResult result;
  result.surfels = init;
  if (params.iterations <= 0) return result;
  if (views.empty()) throw std::invalid_argument("train: no views");
  if (init.size() == 0) throw std::invalid_argument("train: empty surfel set");

  SurfelSet& s = result.surfels;
  OptState opt;
  opt.init_from(s);

  const ComponentKnn knn(map);
  auto dist_at = [&](const Vec3& p) {
    NeighborEntry e = knn.query(p, params.gmm.k, params.gmm.sigma);
    if (e.empty()) return std::numeric_limits<double>::infinity();
    return weighted_distance(e, map, p);
  };

  // Neighbor entries for the map-attraction terms, refreshed on schedule
  // because the anchors (surfel centers) move during optimization.
  std::vector<NeighborEntry> entries;
  auto refresh_entries = [&] {
    entries.resize(s.size());
    parallel_for(s.size(), [&](std::size_t i) {
      entries[i] = knn.query(s.p[i], params.gmm.k, params.gmm.sigma);
    });
  };
  refresh_entries();

  Rng shuffle_rng(mix_seed(params.seed, 0x51DEull));
  std::vector<int> order(views.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  auto reshuffle = [&] {
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
  };

  Rng density_rng(mix_seed(params.seed, 0xD51Cull));

  std::vector<Vec2> screen_accum(s.size(), Vec2::Zero());
  std::vector<int> screen_count(s.size(), 0);
  std::vector<Vec2> screen_scratch;
  std::vector<std::uint8_t> contributed;
  SurfelGrads grads;

  SurfelSet last_good = s;
  if (!params.work_dir.empty())
    std::filesystem::create_directories(params.work_dir);

  for (int iter = 1; iter <= params.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    if ((iter - 1) % static_cast<int>(views.size()) == 0) reshuffle();
    const TrainView& view =
        views[static_cast<std::size_t>(order[(iter - 1) % views.size()])];

    if (params.refresh_every > 0 && iter > 1 &&
        (iter - 1) % params.refresh_every == 0) {
      refresh_entries();
    }

    RenderBuffers rb = render(s, view.cam, params.render);
    ImageLossBreakdown img;
    BufferGrads bg = image_loss_gradients(rb, make_target(view),
                                          params.weights, &img);

    grads.resize_like(s);
    grads.set_zero();
    screen_scratch.assign(s.size(), Vec2::Zero());
    contributed.assign(s.size(), 0);
    render_gradients(s, view.cam, params.render, rb, bg, grads,
                     &screen_scratch, &contributed);

    std::vector<int> active;
    active.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
      if (contributed[i]) active.push_back(static_cast<int>(i));
    std::vector<NeighborEntry> queries(active.size());
    for (std::size_t k = 0; k < active.size(); ++k)
      queries[k] = entries[static_cast<std::size_t>(active[k])];
    GmmLossBreakdown gmm_br;
    if (!active.empty()) {
      gmm_br = gmm_loss_gradients(s, active, queries, map, params.gmm,
                                  params.weights.lambda_gmm, false, grads);
    }

    TrainLogRecord rec;
    rec.iteration = iter;
    rec.l_photo = img.l_photo;
    rec.l_sky = img.l_sky;
    rec.l_depth = img.l_depth;
    rec.l_normal = img.l_normal;
    rec.l_dis = gmm_br.l_dis;
    rec.l_control = gmm_br.l_control;
    rec.l_normal_gmm = gmm_br.l_normal;
    rec.total = total_loss(img, gmm_br.l_gmm, params.weights);
    rec.count = static_cast<int>(s.size());

    if (!std::isfinite(rec.total)) {
      rec.ms = std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - t0)
                   .count();
      result.log.push_back(rec);
      result.surfels = last_good;
      result.aborted = true;
      result.iterations_run = iter - 1;
      if (!params.work_dir.empty())
        write_train_log(result.log, params.work_dir + "/train_log.csv");
      return result;
    }

    opt.step(s, grads, iter, position_lr(params, iter), params);

    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!contributed[i]) continue;
      screen_accum[i] += Vec2(screen_scratch[i]);
      ++screen_count[i];
    }

    if (params.density_enabled && iter % params.density.interval == 0 &&
        iter >= params.density.start_iter && iter <= params.density.stop_iter) {
      std::vector<double> mean_grad(s.size(), 0.0);
      for (std::size_t i = 0; i < s.size(); ++i)
        if (screen_count[i] > 0)
          mean_grad[i] = screen_accum[i].norm() / screen_count[i];
      std::vector<int> source;
      std::vector<SurfelOrigin> origin;
      DensityReport rep = apply_density_control(
          s, mean_grad, dist_at, params.density, density_rng, &source, &origin);
      opt.remap(s, source, origin);
      screen_accum.assign(s.size(), Vec2::Zero());
      screen_count.assign(s.size(), 0);
      refresh_entries();
      rec.cloned = rep.cloned;
      rec.split = rep.split;
      rec.pruned = rep.pruned;
    }

    if (std::find(params.checkpoint_iters.begin(), params.checkpoint_iters.end(),
                  iter) != params.checkpoint_iters.end()) {
      last_good = s;
      if (!params.work_dir.empty()) {
        char name[64];
        std::snprintf(name, sizeof(name), "/surfels_iter%06d.ply", iter);
        save_surfels(s, params.work_dir + name, iter);
      }
    }

    rec.count = static_cast<int>(s.size());
    rec.ms = std::chrono::duration<double, std::milli>(
                 std::chrono::steady_clock::now() - t0)
                 .count();
    result.log.push_back(rec);
    result.iterations_run = iter;
  }

  if (!params.work_dir.empty())
    write_train_log(result.log, params.work_dir + "/train_log.csv");
  return result;
}

}  // namespace ligs
