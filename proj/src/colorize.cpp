#include "ligs/colorize.hpp"

#include "ligs/parallel.hpp"
#include "ligs/spatial_hash.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace ligs {

namespace {

struct Projected {
  int point;  // index into the global cloud
  int px, py;
  double z;
};

// Cell size that puts a few dozen points per cell for typical densities.
double knn_cell_size(const std::vector<Vec3>& pts) {
  Vec3 lo = pts[0], hi = pts[0];
  for (const Vec3& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 span = (hi - lo).cwiseMax(1e-3);
  const double vol = span.x() * span.y() * span.z();
  const double per_point = std::cbrt(vol / static_cast<double>(pts.size()));
  return std::max(1e-3, 3.0 * per_point);
}

}  // namespace

std::vector<FrameCloud> colorize_frames(const std::vector<Vec3>& global_cloud,
                                        const std::vector<CameraModel>& cameras,
                                        const std::vector<ImageD>& images,
                                        double zbuffer_rel_tol) {
  if (cameras.size() != images.size())
    throw std::runtime_error("camera/image count mismatch");
  for (std::size_t v = 0; v < cameras.size(); ++v)
    if (images[v].width != cameras[v].width || images[v].height != cameras[v].height)
      throw std::runtime_error("image size does not match camera " + std::to_string(v));

  std::vector<FrameCloud> frames(cameras.size());
  parallel_for(cameras.size(), [&](std::size_t v) {
    const CameraModel& cam = cameras[v];
    const ImageD& img = images[v];
    FrameCloud& frame = frames[v];
    frame.frame_id = v;
    frame.camera = cam;

    // pass 1: project and z-buffer the front-most depth per pixel
    std::vector<Projected> proj;
    proj.reserve(global_cloud.size() / 4);
    std::vector<double> zmin(img.pixel_count(),
                             std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < global_cloud.size(); ++i) {
      const Vec3 pc = cam.to_camera(global_cloud[i]);
      if (pc.z() <= 0) continue;
      const Vec2 uv = cam.project(pc);
      const int px = static_cast<int>(std::lround(uv.x()));
      const int py = static_cast<int>(std::lround(uv.y()));
      if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
      proj.push_back({static_cast<int>(i), px, py, pc.z()});
      double& zm = zmin[static_cast<std::size_t>(py) * cam.width + px];
      zm = std::min(zm, pc.z());
    }

    // pass 2: keep points within the relative depth band of the winner
    for (const Projected& pr : proj) {
      const double zm = zmin[static_cast<std::size_t>(pr.py) * cam.width + pr.px];
      if (pr.z > zm * (1.0 + zbuffer_rel_tol)) continue;
      ColorizedPoint cp;
      cp.p = global_cloud[static_cast<std::size_t>(pr.point)];
      for (int c = 0; c < 3; ++c)
        cp.rgb[c] = img.at(pr.px, pr.py, img.channels == 3 ? c : 0);
      cp.gray = luma(cp.rgb);
      frame.points.push_back(cp);
    }
    frame.warn_empty = frame.points.empty();
  });
  return frames;
}

LidarImages lidar_depth_normal_images(const FrameCloud& frame, int normal_knn) {
  const CameraModel& cam = frame.camera;
  LidarImages out;
  out.depth = ImageD(cam.width, cam.height, 1, 0.0);
  out.normal = ImageD(cam.width, cam.height, 3, 0.0);
  out.mask = ImageD(cam.width, cam.height, 2, 0.0);
  if (frame.points.empty()) return out;

  // front point per pixel
  std::vector<int> front(out.depth.pixel_count(), -1);
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    const Vec3 pc = cam.to_camera(frame.points[i].p);
    if (pc.z() <= 0) continue;
    const Vec2 uv = cam.project(pc);
    const int px = static_cast<int>(std::lround(uv.x()));
    const int py = static_cast<int>(std::lround(uv.y()));
    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
    const std::size_t pix = static_cast<std::size_t>(py) * cam.width + px;
    if (front[pix] < 0 || pc.z() < out.depth.at(px, py)) {
      front[pix] = static_cast<int>(i);
      out.depth.at(px, py) = pc.z();
    }
  }

  PointGrid grid(knn_cell_size([&] {
    std::vector<Vec3> ps;
    ps.reserve(frame.points.size());
    for (const auto& cp : frame.points) ps.push_back(cp.p);
    return ps;
  }()));
  for (const auto& cp : frame.points) grid.insert(cp.p);

  const Vec3 cam_center = cam.world_center();
  const bool enough_points =
      static_cast<int>(frame.points.size()) >= normal_knn;

  parallel_for(out.depth.pixel_count(), [&](std::size_t pix) {
    if (front[pix] < 0) return;
    const int px = static_cast<int>(pix % static_cast<std::size_t>(cam.width));
    const int py = static_cast<int>(pix / static_cast<std::size_t>(cam.width));
    out.mask.at(px, py, 0) = 1.0;
    if (!enough_points) return;

    const Vec3 p = frame.points[static_cast<std::size_t>(front[pix])].p;
    const auto nbrs = grid.knn(p, normal_knn);

    Vec3 centroid = Vec3::Zero();
    for (const auto& nb : nbrs) centroid += grid.point(nb.index);
    centroid /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& nb : nbrs) {
      const Vec3 d = grid.point(nb.index) - centroid;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    // rank < 2 (collinear neighborhood) leaves the normal undefined
    if (eig.eigenvalues()(1) <= 1e-12 * std::max(1.0, eig.eigenvalues()(2)))
      return;
    Vec3 n = eig.eigenvectors().col(0);
    if (n.dot(cam_center - p) < 0) n = -n;
    const Vec3 n_cam = cam.R * n;
    for (int c = 0; c < 3; ++c) out.normal.at(px, py, c) = n_cam[c];
    out.mask.at(px, py, 1) = 1.0;
  });
  return out;
}

}  // namespace ligs
