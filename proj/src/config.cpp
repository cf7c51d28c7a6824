#include "ligs/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace ligs {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return d;
}

long long parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  return i;
}

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// One row per key. Using explicit getter/setter pairs keeps set() and
// to_text() in lockstep; a key can't exist in one and not the other.
struct Field {
  const char* name;
  void (*set)(PipelineConfig&, const std::string& key, const std::string& value);
  std::string (*get)(const PipelineConfig&);
};

#define LIGS_FIELD_DOUBLE(member)                                            \
  Field{#member,                                                             \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {  \
          c.member = parse_double(k, v);                                     \
        },                                                                   \
        [](const PipelineConfig& c) { return fmt_double(c.member); }}
#define LIGS_FIELD_INT(member)                                               \
  Field{#member,                                                             \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {  \
          c.member = static_cast<int>(parse_int(k, v));                      \
        },                                                                   \
        [](const PipelineConfig& c) { return std::to_string(c.member); }}
#define LIGS_FIELD_U64(member)                                               \
  Field{#member,                                                             \
        [](PipelineConfig& c, const std::string& k, const std::string& v) {  \
          c.member = static_cast<std::uint64_t>(parse_int(k, v));            \
        },                                                                   \
        [](const PipelineConfig& c) { return std::to_string(c.member); }}
#define LIGS_FIELD_STR(member)                                               \
  Field{#member,                                                             \
        [](PipelineConfig& c, const std::string&, const std::string& v) {    \
          c.member = v;                                                      \
        },                                                                   \
        [](const PipelineConfig& c) { return c.member; }}

const Field kFields[] = {
    LIGS_FIELD_U64(seed),
    LIGS_FIELD_INT(threads),
    LIGS_FIELD_STR(scene_dir),
    LIGS_FIELD_STR(work_dir),
    LIGS_FIELD_STR(scene_preset),
    LIGS_FIELD_DOUBLE(scene_extent),
    LIGS_FIELD_DOUBLE(scene_wall_height),
    LIGS_FIELD_INT(scene_camera_count),
    LIGS_FIELD_DOUBLE(scene_camera_radius),
    LIGS_FIELD_DOUBLE(scene_camera_height),
    LIGS_FIELD_DOUBLE(scene_lidar_density),
    LIGS_FIELD_DOUBLE(scene_noise),
    LIGS_FIELD_DOUBLE(scene_gt_spacing),
    LIGS_FIELD_INT(image_width),
    LIGS_FIELD_INT(image_height),
    LIGS_FIELD_DOUBLE(focal_px),
    LIGS_FIELD_DOUBLE(zbuffer_rel_tol),
    LIGS_FIELD_INT(normal_knn),
    LIGS_FIELD_DOUBLE(voxel_size),
    LIGS_FIELD_DOUBLE(ransac_inlier_threshold),
    LIGS_FIELD_INT(ransac_iterations),
    LIGS_FIELD_INT(ransac_min_inliers),
    LIGS_FIELD_INT(ransac_max_planes),
    LIGS_FIELD_DOUBLE(meanshift_bandwidth_scale),
    LIGS_FIELD_DOUBLE(meanshift_bandwidth_gray),
    LIGS_FIELD_INT(em_max_iters),
    LIGS_FIELD_DOUBLE(em_tol),
    LIGS_FIELD_DOUBLE(cov_floor),
    LIGS_FIELD_DOUBLE(effective_rho),
    LIGS_FIELD_DOUBLE(lambda_gmm),
    LIGS_FIELD_DOUBLE(lambda_d),
    LIGS_FIELD_DOUBLE(lambda_n),
    LIGS_FIELD_INT(gmm_knn),
    LIGS_FIELD_DOUBLE(gmm_sigma),
    LIGS_FIELD_DOUBLE(shape_alpha),
    LIGS_FIELD_DOUBLE(shape_phi),
    LIGS_FIELD_INT(refresh_every),
    LIGS_FIELD_DOUBLE(omega_growth),
    LIGS_FIELD_DOUBLE(omega_scale),
    LIGS_FIELD_DOUBLE(omega_pruning),
    LIGS_FIELD_DOUBLE(tau),
    LIGS_FIELD_DOUBLE(growth_threshold),
    LIGS_FIELD_DOUBLE(prune_threshold),
    LIGS_FIELD_INT(densify_interval),
    LIGS_FIELD_INT(densify_start),
    LIGS_FIELD_INT(densify_stop),
    LIGS_FIELD_DOUBLE(split_size_threshold),
    LIGS_FIELD_INT(iterations),
    LIGS_FIELD_DOUBLE(lr_position),
    LIGS_FIELD_DOUBLE(lr_position_final),
    LIGS_FIELD_DOUBLE(lr_opacity),
    LIGS_FIELD_DOUBLE(lr_radii),
    LIGS_FIELD_DOUBLE(lr_rotation),
    LIGS_FIELD_DOUBLE(lr_appearance),
    LIGS_FIELD_INT(sh_degree),
    LIGS_FIELD_INT(test_stride),
    LIGS_FIELD_DOUBLE(occupancy_voxel),
    LIGS_FIELD_INT(occupancy_min_points),
    LIGS_FIELD_DOUBLE(fine_threshold),
    LIGS_FIELD_DOUBLE(silhouette_threshold),
    LIGS_FIELD_DOUBLE(mesh_eval_threshold),
};

#undef LIGS_FIELD_DOUBLE
#undef LIGS_FIELD_INT
#undef LIGS_FIELD_U64
#undef LIGS_FIELD_STR

const Field* find_field(const std::string& key) {
  for (const Field& f : kFields)
    if (key == f.name) return &f;
  return nullptr;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError(key, "unknown config key");
  f->set(*this, key, trim(value));
}

void PipelineConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path, "cannot open");
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(stripped, "line " + std::to_string(line_no) +
                                      " is not 'key = value'");
    set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
}

std::string PipelineConfig::to_text() const {
  std::vector<std::pair<std::string, std::string>> rows;
  rows.reserve(std::size(kFields));
  for (const Field& f : kFields) rows.emplace_back(f.name, f.get(*this));
  std::sort(rows.begin(), rows.end());
  std::ostringstream os;
  for (const auto& [k, v] : rows) os << k << " = " << v << "\n";
  return os.str();
}

void PipelineConfig::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError(path, "cannot open for writing");
  os << to_text();
}

}  // namespace ligs
