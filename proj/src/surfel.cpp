#include "ligs/surfel.hpp"

#include "ligs/ply_io.hpp"
#include "ligs/rng.hpp"
#include "ligs/spatial_hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ligs {

namespace {

// real spherical-harmonic basis constants, degree 0 and 1

}  // namespace

void SurfelSet::resize(std::size_t n) {
  p.resize(n, Vec3::Zero());
  t_u.resize(n, Vec3::UnitX());
  t_v.resize(n, Vec3::UnitY());
  r_u.resize(n, kMinRadius);
  r_v.resize(n, kMinRadius);
  opacity.resize(n, 0.5);
  sh.resize(n * static_cast<std::size_t>(sh_stride()), 0.0);
}

void SurfelSet::push_default() { resize(size() + 1); }

void SurfelSet::remove_indices(const std::vector<int>& sorted_indices) {
  if (sorted_indices.empty()) return;
  const std::size_t n = size();
  std::vector<char> drop(n, 0);
  for (int i : sorted_indices) drop[static_cast<std::size_t>(i)] = 1;
  std::size_t w = 0;
  const int stride = sh_stride();
  for (std::size_t i = 0; i < n; ++i) {
    if (drop[i]) continue;
    if (w != i) {
      p[w] = p[i];
      t_u[w] = t_u[i];
      t_v[w] = t_v[i];
      r_u[w] = r_u[i];
      r_v[w] = r_v[i];
      opacity[w] = opacity[i];
      std::copy_n(sh.begin() + static_cast<std::ptrdiff_t>(i) * stride, stride,
                  sh.begin() + static_cast<std::ptrdiff_t>(w) * stride);
    }
    ++w;
  }
  resize(w);
}

void surfel_color_basis(int sh_degree, const Vec3& dir, double* basis) {
  basis[0] = kSh0;
  if (sh_degree >= 1) {
    basis[1] = -kSh1 * dir.y();
    basis[2] = kSh1 * dir.z();
    basis[3] = -kSh1 * dir.x();
  }
}

Vec3 surfel_color(const SurfelSet& s, std::size_t i, const Vec3& dir) {
  double basis[4];
  surfel_color_basis(s.sh_degree, dir, basis);
  const double* c = s.sh_at(i);
  Vec3 rgb = Vec3::Constant(0.5);
  for (int k = 0; k < s.sh_coeffs(); ++k)
    for (int ch = 0; ch < 3; ++ch) rgb[ch] += basis[k] * c[3 * k + ch];
  return rgb.cwiseMax(0.0);
}

RayIntersection ray_intersect(const SurfelSet& s, std::size_t i,
                              const CameraModel& cam, const Vec2& pixel) {
  RayIntersection out;
  const Vec3 d = cam.pixel_ray(pixel.x(), pixel.y());  // d.z == 1
  const Vec3 pc = cam.to_camera(s.p[i]);
  const Vec3 nc = cam.R * s.normal(i);
  const double denom = nc.dot(d);
  if (std::abs(denom) < 1e-9) return out;  // ray parallel to the plane
  const double t = nc.dot(pc) / denom;
  if (t <= 1e-9) return out;  // behind (or at) the camera
  const Vec3 x = t * d;
  const Vec3 rel = x - pc;
  out.hit = true;
  out.uv = {rel.dot(cam.R * s.t_u[i]) / s.r_u[i],
            rel.dot(cam.R * s.t_v[i]) / s.r_v[i]};
  out.depth = t;  // d.z = 1 makes the parameter the camera depth
  return out;
}

SurfelSet init_from_gmm(const GmmMap& map, int sh_degree) {
  SurfelSet s;
  s.sh_degree = sh_degree;
  const auto& comps = map.components();
  s.resize(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const GmmComponent4D& c = comps[i];
    s.p[i] = c.mean_p();
    const Vec3 n = c.axes.col(0);
    const Vec3 tu = c.axes.col(2);  // major axis
    s.t_u[i] = tu;
    s.t_v[i] = n.cross(tu).normalized();  // exact right-handed frame
    s.r_u[i] = std::max(std::sqrt(std::max(c.gamma(2), 0.0)), kMinRadius);
    s.r_v[i] = std::max(std::sqrt(std::max(c.gamma(1), 0.0)), kMinRadius);
    s.opacity[i] = 0.6 + 0.4 * c.weight;
    double* sh = s.sh_at(i);
    for (int ch = 0; ch < 3; ++ch)
      sh[ch] = (c.mean_rgb(ch) - 0.5) / kSh0;  // DC term; higher orders stay 0
  }
  return s;
}

SurfelSet init_random_subset(const PointCloud& cloud, std::size_t count,
                             std::uint64_t seed, int sh_degree) {
  SurfelSet s;
  s.sh_degree = sh_degree;
  if (cloud.empty() || count == 0) return s;
  count = std::min(count, cloud.size());

  // partial Fisher-Yates for a deterministic subset without replacement
  Rng rng(mix_seed(seed, 0x5EEDull));
  std::vector<std::size_t> idx(cloud.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i),
                        static_cast<std::int64_t>(idx.size()) - 1));
    std::swap(idx[i], idx[j]);
  }

  PointGrid grid(0.1);
  for (const auto& cp : cloud) grid.insert(cp.p);

  s.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const ColorizedPoint& cp = cloud[idx[i]];
    s.p[i] = cp.p;
    // random orientation
    Vec3 a(rng.normal(), rng.normal(), rng.normal());
    while (a.norm() < 1e-6) a = {rng.normal(), rng.normal(), rng.normal()};
    a.normalize();
    Vec3 helper = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 b = a.cross(helper).normalized();
    s.t_u[i] = a;
    s.t_v[i] = b;
    // isotropic radius from the mean 3-NN spacing (skip the point itself)
    const auto nn = grid.knn(cp.p, 4);
    double r = 0.02;
    if (nn.size() >= 2) {
      double acc = 0;
      std::size_t m = 0;
      for (const auto& h : nn)
        if (h.dist > 0) {
          acc += h.dist;
          ++m;
        }
      if (m > 0) r = acc / static_cast<double>(m);
    }
    s.r_u[i] = s.r_v[i] = std::max(r, kMinRadius);
    s.opacity[i] = 0.1;
    double* sh = s.sh_at(i);
    for (int ch = 0; ch < 3; ++ch) sh[ch] = (cp.rgb(ch) - 0.5) / kSh0;
  }
  return s;
}

void save_surfels(const SurfelSet& s, const std::string& path, int iteration) {
  PlyData data;
  data.comments.push_back("sh_degree " + std::to_string(s.sh_degree));
  data.comments.push_back("iteration " + std::to_string(iteration));
  data.properties = {
      {"x", PlyProperty::F64},   {"y", PlyProperty::F64},
      {"z", PlyProperty::F64},   {"tux", PlyProperty::F64},
      {"tuy", PlyProperty::F64}, {"tuz", PlyProperty::F64},
      {"tvx", PlyProperty::F64}, {"tvy", PlyProperty::F64},
      {"tvz", PlyProperty::F64}, {"ru", PlyProperty::F64},
      {"rv", PlyProperty::F64},  {"opacity", PlyProperty::F64}};
  for (int k = 0; k < s.sh_stride(); ++k)
    data.properties.push_back({"sh_" + std::to_string(k), PlyProperty::F64});

  const std::size_t cols = data.properties.size();
  data.count = s.size();
  data.values.resize(data.count * cols);
  for (std::size_t i = 0; i < s.size(); ++i) {
    double* row = data.values.data() + i * cols;
    for (int c = 0; c < 3; ++c) {
      row[c] = s.p[i][c];
      row[3 + c] = s.t_u[i][c];
      row[6 + c] = s.t_v[i][c];
    }
    row[9] = s.r_u[i];
    row[10] = s.r_v[i];
    row[11] = s.opacity[i];
    const double* sh = s.sh_at(i);
    for (int k = 0; k < s.sh_stride(); ++k) row[12 + k] = sh[k];
  }
  write_ply(data, path, /*binary=*/true);
}

SurfelSet load_surfels(const std::string& path, int* iteration) {
  const PlyData data = read_ply(path);
  int degree = 0, iter = 0;
  for (const std::string& c : data.comments) {
    int v = 0;
    if (std::sscanf(c.c_str(), "sh_degree %d", &v) == 1) degree = v;
    if (std::sscanf(c.c_str(), "iteration %d", &v) == 1) iter = v;
  }
  if (degree != 0 && degree != 1)
    throw IoError(path, "unsupported sh_degree in checkpoint");
  if (iteration) *iteration = iter;

  SurfelSet s;
  s.sh_degree = degree;
  s.resize(data.count);
  const char* names[] = {"x",   "y",   "z",  "tux", "tuy", "tuz",
                         "tvx", "tvy", "tvz", "ru",  "rv",  "opacity"};
  int cols[12];
  for (int k = 0; k < 12; ++k) {
    cols[k] = data.find(names[k]);
    if (cols[k] < 0)
      throw IoError(path, std::string("checkpoint lacks property ") + names[k]);
  }
  std::vector<int> sh_cols(static_cast<std::size_t>(s.sh_stride()));
  for (int k = 0; k < s.sh_stride(); ++k) {
    sh_cols[static_cast<std::size_t>(k)] = data.find("sh_" + std::to_string(k));
    if (sh_cols[static_cast<std::size_t>(k)] < 0)
      throw IoError(path, "checkpoint lacks sh coefficients for its degree");
  }
  for (std::size_t i = 0; i < data.count; ++i) {
    for (int c = 0; c < 3; ++c) {
      s.p[i][c] = data.value(i, cols[c]);
      s.t_u[i][c] = data.value(i, cols[3 + c]);
      s.t_v[i][c] = data.value(i, cols[6 + c]);
    }
    s.r_u[i] = data.value(i, cols[9]);
    s.r_v[i] = data.value(i, cols[10]);
    s.opacity[i] = data.value(i, cols[11]);
    double* sh = s.sh_at(i);
    for (int k = 0; k < s.sh_stride(); ++k)
      sh[k] = data.value(i, sh_cols[static_cast<std::size_t>(k)]);
  }
  return s;
}

}  // namespace ligs
