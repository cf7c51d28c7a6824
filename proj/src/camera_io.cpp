#include "ligs/camera_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ligs {

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_intrinsics(const CameraModel& cam, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError(path, "cannot open for writing");
  os << fmt(cam.fx) << ' ' << fmt(cam.fy) << ' ' << fmt(cam.cx) << ' '
     << fmt(cam.cy) << ' ' << cam.width << ' ' << cam.height << '\n';
}

void load_intrinsics(const std::string& path, CameraModel& cam) {
  std::ifstream is(path);
  if (!is) throw IoError(path, "cannot open");
  if (!(is >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height))
    throw IoError(path, "malformed intrinsics");
  if (cam.width <= 0 || cam.height <= 0 || cam.fx <= 0 || cam.fy <= 0)
    throw IoError(path, "invalid intrinsics");
}

void save_cameras(const std::vector<NamedCamera>& cams, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError(path, "cannot open for writing");
  for (const auto& nc : cams) {
    const Eigen::Quaterniond q(nc.cam.R);
    os << nc.name << ' ' << fmt(nc.cam.t.x()) << ' ' << fmt(nc.cam.t.y()) << ' '
       << fmt(nc.cam.t.z()) << ' ' << fmt(q.x()) << ' ' << fmt(q.y()) << ' '
       << fmt(q.z()) << ' ' << fmt(q.w()) << '\n';
  }
}

std::vector<NamedCamera> load_cameras(const std::string& cameras_path,
                                      const std::string& intrinsics_path) {
  CameraModel base;
  load_intrinsics(intrinsics_path, base);

  std::ifstream is(cameras_path);
  if (!is) throw IoError(cameras_path, "cannot open");
  std::vector<NamedCamera> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    NamedCamera nc;
    nc.cam = base;
    double qx, qy, qz, qw;
    if (!(ss >> nc.name >> nc.cam.t.x() >> nc.cam.t.y() >> nc.cam.t.z() >> qx >>
          qy >> qz >> qw))
      throw IoError(cameras_path,
                    "malformed camera line " + std::to_string(line_no));
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-12)
      throw IoError(cameras_path,
                    "zero quaternion on line " + std::to_string(line_no));
    nc.cam.R = q.normalized().toRotationMatrix();
    out.push_back(std::move(nc));
  }
  return out;
}

}  // namespace ligs
