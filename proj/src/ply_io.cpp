#include "ligs/ply_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ligs {

namespace {

std::size_t type_size(PlyProperty::Type t) {
  switch (t) {
    case PlyProperty::F32: return 4;
    case PlyProperty::F64: return 8;
    case PlyProperty::U8:  return 1;
    case PlyProperty::I32: return 4;
    case PlyProperty::U32: return 4;
  }
  return 0;
}

const char* type_name(PlyProperty::Type t) {
  switch (t) {
    case PlyProperty::F32: return "float";
    case PlyProperty::F64: return "double";
    case PlyProperty::U8:  return "uchar";
    case PlyProperty::I32: return "int";
    case PlyProperty::U32: return "uint";
  }
  return "?";
}

bool parse_type(const std::string& s, PlyProperty::Type& out) {
  if (s == "float" || s == "float32") out = PlyProperty::F32;
  else if (s == "double" || s == "float64") out = PlyProperty::F64;
  else if (s == "uchar" || s == "uint8") out = PlyProperty::U8;
  else if (s == "int" || s == "int32") out = PlyProperty::I32;
  else if (s == "uint" || s == "uint32") out = PlyProperty::U32;
  else return false;
  return true;
}

[[noreturn]] void header_error(const std::string& path, int line_no,
                               const std::string& line, const std::string& why) {
  throw IoError(path, "ply header line " + std::to_string(line_no) + " (" +
                          line + "): " + why);
}

double decode_value(const unsigned char* p, PlyProperty::Type t) {
  switch (t) {
    case PlyProperty::F32: {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    case PlyProperty::F64: {
      double d;
      std::memcpy(&d, p, 8);
      return d;
    }
    case PlyProperty::U8:
      return *p;
    case PlyProperty::I32: {
      std::int32_t v;
      std::memcpy(&v, p, 4);
      return v;
    }
    case PlyProperty::U32: {
      std::uint32_t v;
      std::memcpy(&v, p, 4);
      return v;
    }
  }
  return 0;
}

void encode_value(double v, PlyProperty::Type t, unsigned char* p) {
  switch (t) {
    case PlyProperty::F32: {
      float f = static_cast<float>(v);
      std::memcpy(p, &f, 4);
      break;
    }
    case PlyProperty::F64:
      std::memcpy(p, &v, 8);
      break;
    case PlyProperty::U8:
      *p = static_cast<unsigned char>(v);
      break;
    case PlyProperty::I32: {
      std::int32_t i = static_cast<std::int32_t>(v);
      std::memcpy(p, &i, 4);
      break;
    }
    case PlyProperty::U32: {
      std::uint32_t u = static_cast<std::uint32_t>(v);
      std::memcpy(p, &u, 4);
      break;
    }
  }
}

void write_ascii_value(std::ostream& os, double v, PlyProperty::Type t) {
  switch (t) {
    case PlyProperty::F32: {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(static_cast<float>(v)));
      os << buf;
      break;
    }
    case PlyProperty::F64: {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << buf;
      break;
    }
    case PlyProperty::U8:
    case PlyProperty::I32:
      os << static_cast<long long>(v);
      break;
    case PlyProperty::U32:
      os << static_cast<unsigned long long>(v);
      break;
  }
}

}  // namespace

int PlyData::find(const std::string& name) const {
  for (std::size_t i = 0; i < properties.size(); ++i)
    if (properties[i].name == name) return static_cast<int>(i);
  return -1;
}

PlyData read_ply(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path, "cannot open");

  PlyData out;
  bool binary = false;
  bool format_seen = false;
  bool in_vertex = false;
  bool vertex_seen = false;
  int line_no = 0;

  std::string line;
  if (!std::getline(is, line)) throw IoError(path, "empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") header_error(path, line_no, line, "expected 'ply'");

  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "end_header") {
      if (!format_seen) header_error(path, line_no, line, "missing format line");
      if (!vertex_seen) header_error(path, line_no, line, "missing vertex element");
      break;
    } else if (kw == "format") {
      std::string fmt, ver;
      ss >> fmt >> ver;
      if (ver != "1.0") header_error(path, line_no, line, "unsupported version");
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else header_error(path, line_no, line, "unsupported format");
      format_seen = true;
    } else if (kw == "comment" || kw == "obj_info") {
      std::string rest;
      std::getline(ss, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(rest.begin());
      out.comments.push_back(rest);
    } else if (kw == "element") {
      std::string name;
      std::size_t count = 0;
      ss >> name >> count;
      if (ss.fail()) header_error(path, line_no, line, "bad element");
      if (name == "vertex") {
        vertex_seen = true;
        in_vertex = true;
        out.count = count;
      } else {
        if (count != 0)
          header_error(path, line_no, line, "only the vertex element is supported");
        in_vertex = false;
      }
    } else if (kw == "property") {
      if (!in_vertex) continue;  // empty foreign element, properties unused
      std::string t1;
      ss >> t1;
      if (t1 == "list")
        header_error(path, line_no, line, "list properties unsupported");
      PlyProperty prop;
      if (!parse_type(t1, prop.type))
        header_error(path, line_no, line, "unknown property type");
      ss >> prop.name;
      if (prop.name.empty()) header_error(path, line_no, line, "missing name");
      out.properties.push_back(prop);
    } else if (kw.empty()) {
      continue;
    } else {
      header_error(path, line_no, line, "unknown keyword");
    }
  }
  if (!is) throw IoError(path, "unterminated ply header");
  if (out.properties.empty()) throw IoError(path, "vertex element has no properties");

  const std::size_t cols = out.properties.size();
  out.values.resize(out.count * cols);

  if (binary) {
    std::size_t record = 0;
    for (const auto& p : out.properties) record += type_size(p.type);
    std::vector<unsigned char> buf(record);
    for (std::size_t r = 0; r < out.count; ++r) {
      is.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(record));
      if (!is) throw IoError(path, "truncated vertex data");
      std::size_t off = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        out.values[r * cols + c] = decode_value(buf.data() + off, out.properties[c].type);
        off += type_size(out.properties[c].type);
      }
    }
  } else {
    for (std::size_t r = 0; r < out.count; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        double v;
        if (!(is >> v)) throw IoError(path, "truncated vertex data");
        if (out.properties[c].type == PlyProperty::F32)
          v = static_cast<double>(static_cast<float>(v));
        out.values[r * cols + c] = v;
      }
    }
  }
  return out;
}

void write_ply(const PlyData& data, const std::string& path, bool binary) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path, "cannot open for writing");
  os << "ply\n";
  os << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  for (const auto& c : data.comments) os << "comment " << c << "\n";
  os << "element vertex " << data.count << "\n";
  for (const auto& p : data.properties)
    os << "property " << type_name(p.type) << " " << p.name << "\n";
  os << "end_header\n";

  const std::size_t cols = data.properties.size();
  if (binary) {
    std::size_t record = 0;
    for (const auto& p : data.properties) record += type_size(p.type);
    std::vector<unsigned char> buf(record);
    for (std::size_t r = 0; r < data.count; ++r) {
      std::size_t off = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        encode_value(data.values[r * cols + c], data.properties[c].type,
                     buf.data() + off);
        off += type_size(data.properties[c].type);
      }
      os.write(reinterpret_cast<const char*>(buf.data()),
               static_cast<std::streamsize>(record));
    }
  } else {
    for (std::size_t r = 0; r < data.count; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (c) os << ' ';
        write_ascii_value(os, data.values[r * cols + c], data.properties[c].type);
      }
      os << '\n';
    }
  }
  if (!os) throw IoError(path, "short write");
}

PointCloud load_ply(const std::string& path) {
  const PlyData data = read_ply(path);
  const int ix = data.find("x"), iy = data.find("y"), iz = data.find("z");
  const int ir = data.find("red"), ig = data.find("green"), ib = data.find("blue");
  if (ix < 0 || iy < 0 || iz < 0)
    throw IoError(path, "vertex element lacks x/y/z");
  if (ir < 0 || ig < 0 || ib < 0)
    throw IoError(path, "vertex element lacks red/green/blue");

  PointCloud cloud(data.count);
  for (std::size_t i = 0; i < data.count; ++i) {
    ColorizedPoint& cp = cloud[i];
    cp.p = {data.value(i, ix), data.value(i, iy), data.value(i, iz)};
    cp.rgb = {data.value(i, ir) / 255.0, data.value(i, ig) / 255.0,
              data.value(i, ib) / 255.0};
    cp.gray = luma(cp.rgb);
  }
  return cloud;
}

void save_ply(const PointCloud& cloud, const std::string& path, bool binary) {
  PlyData data;
  data.properties = {{"x", PlyProperty::F32},     {"y", PlyProperty::F32},
                     {"z", PlyProperty::F32},     {"red", PlyProperty::U8},
                     {"green", PlyProperty::U8},  {"blue", PlyProperty::U8},
                     {"gray", PlyProperty::F32}};
  data.count = cloud.size();
  data.values.resize(data.count * 7);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const ColorizedPoint& cp = cloud[i];
    double* row = data.values.data() + i * 7;
    row[0] = cp.p.x();
    row[1] = cp.p.y();
    row[2] = cp.p.z();
    for (int c = 0; c < 3; ++c)
      row[3 + c] = std::lround(std::clamp(cp.rgb[c], 0.0, 1.0) * 255.0);
    row[6] = cp.gray;
  }
  write_ply(data, path, binary);
}

void save_xyz_ply(const std::vector<Vec3>& points, const std::string& path,
                  bool binary) {
  PlyData data;
  data.properties = {{"x", PlyProperty::F32},
                     {"y", PlyProperty::F32},
                     {"z", PlyProperty::F32}};
  data.count = points.size();
  data.values.resize(data.count * 3);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (int c = 0; c < 3; ++c) data.values[i * 3 + c] = points[i][c];
  write_ply(data, path, binary);
}

std::vector<Vec3> load_xyz_ply(const std::string& path) {
  const PlyData data = read_ply(path);
  const int ix = data.find("x"), iy = data.find("y"), iz = data.find("z");
  if (ix < 0 || iy < 0 || iz < 0) throw IoError(path, "vertex element lacks x/y/z");
  std::vector<Vec3> points(data.count);
  for (std::size_t i = 0; i < data.count; ++i)
    points[i] = {data.value(i, ix), data.value(i, iy), data.value(i, iz)};
  return points;
}

void save_oriented_ply(const std::vector<Vec3>& points,
                       const std::vector<Vec3>& normals,
                       const std::string& path, bool binary) {
  if (points.size() != normals.size())
    throw std::runtime_error("point/normal count mismatch");
  PlyData data;
  data.properties = {{"x", PlyProperty::F32},  {"y", PlyProperty::F32},
                     {"z", PlyProperty::F32},  {"nx", PlyProperty::F32},
                     {"ny", PlyProperty::F32}, {"nz", PlyProperty::F32}};
  data.count = points.size();
  data.values.resize(data.count * 6);
  for (std::size_t i = 0; i < points.size(); ++i) {
    double* row = data.values.data() + i * 6;
    for (int c = 0; c < 3; ++c) {
      row[c] = points[i][c];
      row[3 + c] = normals[i][c];
    }
  }
  write_ply(data, path, binary);
}

void load_oriented_ply(const std::string& path, std::vector<Vec3>& points,
                       std::vector<Vec3>& normals) {
  const PlyData data = read_ply(path);
  const int ix = data.find("x"), iy = data.find("y"), iz = data.find("z");
  const int inx = data.find("nx"), iny = data.find("ny"), inz = data.find("nz");
  if (ix < 0 || iy < 0 || iz < 0 || inx < 0 || iny < 0 || inz < 0)
    throw IoError(path, "vertex element lacks x/y/z/nx/ny/nz");
  points.resize(data.count);
  normals.resize(data.count);
  for (std::size_t i = 0; i < data.count; ++i) {
    points[i] = {data.value(i, ix), data.value(i, iy), data.value(i, iz)};
    normals[i] = {data.value(i, inx), data.value(i, iny), data.value(i, inz)};
  }
}

}  // namespace ligs
