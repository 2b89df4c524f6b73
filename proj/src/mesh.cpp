#include "toolpose/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "toolpose/error.hpp"
#include "toolpose/random.hpp"

namespace toolpose {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

const char* class_name(int class_id) {
  switch (class_id) {
    case 0: return "needle_holder";
    case 1: return "tweezers";
    default: return "unknown";
  }
}

double TriMesh::face_area(std::size_t i) const {
  const Face& f = faces[i];
  const Vec3& a = vertices[f[0]];
  return 0.5 * (vertices[f[1]] - a).cross(vertices[f[2]] - a).norm();
}

void TriMesh::validate() const {
  if (vertices.size() < 4) throw Error(ErrorKind::DegenerateMesh, "mesh needs at least 4 vertices");
  if (faces.empty()) throw Error(ErrorKind::DegenerateMesh, "mesh has no faces");
  for (const Vec3& v : vertices) {
    if (!v.allFinite()) throw Error(ErrorKind::DegenerateMesh, "non-finite vertex");
  }
  for (std::size_t i = 0; i < faces.size(); ++i) {
    for (auto idx : faces[i]) {
      if (idx >= vertices.size()) throw Error(ErrorKind::DegenerateMesh, "face index out of range");
    }
    if (!(face_area(i) > 1e-12)) {
      throw Error(ErrorKind::DegenerateMesh, "degenerate face " + std::to_string(i));
    }
  }
}

void ArticulatedModel::validate() const {
  part_fixed.validate();
  part_moving.validate();
  if (std::abs(hinge_axis.norm() - 1.0) > 1e-9) {
    throw Error(ErrorKind::ConfigError, "hinge axis must be unit length");
  }
  if (!(angle_min < angle_max)) throw Error(ErrorKind::ConfigError, "angle_min must be < angle_max");
}

double ArticulatedModel::hinge_angle(double articulation) const {
  if (!(articulation >= 0.0 && articulation <= 1.0)) {
    throw Error(ErrorKind::ConfigError, "articulation must lie in [0,1]");
  }
  return angle_min + articulation * (angle_max - angle_min);
}

TriMesh parse_obj(const std::string& text) {
  TriMesh mesh;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) {
        throw Error(ErrorKind::ParseError, "bad vertex on line " + std::to_string(lineno));
      }
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      Face face;
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        if (!(ls >> tok)) {
          throw Error(ErrorKind::ParseError, "face needs 3 indices on line " + std::to_string(lineno));
        }
        long idx = 0;
        try {
          idx = std::stol(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw Error(ErrorKind::ParseError, "bad face index on line " + std::to_string(lineno));
        }
        if (idx < 1 || static_cast<std::size_t>(idx) > mesh.vertices.size()) {
          throw Error(ErrorKind::ParseError, "face index out of range on line " + std::to_string(lineno));
        }
        face[k] = static_cast<std::uint32_t>(idx - 1);
      }
      std::string extra;
      if (ls >> extra) {
        throw Error(ErrorKind::ParseError, "only triangles are supported (line " + std::to_string(lineno) + ")");
      }
      mesh.faces.push_back(face);
    }
  }
  mesh.validate();
  return mesh;
}

TriMesh parse_binary_stl(const std::string& bytes, double weld_tol) {
  if (bytes.size() < 84) throw Error(ErrorKind::ParseError, "STL shorter than its header");
  std::uint32_t count = 0;
  std::memcpy(&count, bytes.data() + 80, 4);
  if (bytes.size() != 84 + 50ull * count) {
    throw Error(ErrorKind::ParseError, "STL size does not match its triangle count");
  }
  TriMesh mesh;
  // Weld on a grid of cell size weld_tol, checking neighbouring cells.
  struct CellHash {
    std::size_t operator()(const std::array<long long, 3>& c) const {
      return static_cast<std::size_t>(mix_seed(mix_seed(c[0], c[1]), c[2]));
    }
  };
  std::unordered_map<std::array<long long, 3>, std::vector<std::uint32_t>, CellHash> grid;
  auto weld = [&](const Vec3& p) -> std::uint32_t {
    const std::array<long long, 3> cell{std::llround(p.x() / weld_tol), std::llround(p.y() / weld_tol),
                                        std::llround(p.z() / weld_tol)};
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        for (long long dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({cell[0] + dx, cell[1] + dy, cell[2] + dz});
          if (it == grid.end()) continue;
          for (auto id : it->second) {
            if ((mesh.vertices[id] - p).norm() <= weld_tol) return id;
          }
        }
      }
    }
    const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    grid[cell].push_back(id);
    return id;
  };
  for (std::uint32_t i = 0; i < count; ++i) {
    const char* rec = bytes.data() + 84 + 50ull * i;
    Face face;
    for (int k = 0; k < 3; ++k) {
      float xyz[3];
      std::memcpy(xyz, rec + 12 + 12 * k, 12);
      face[k] = weld(Vec3(xyz[0], xyz[1], xyz[2]));
    }
    mesh.faces.push_back(face);
  }
  mesh.validate();
  return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string ext = lower_extension(path);
  if (ext == ".stl") return parse_binary_stl(bytes);
  if (ext == ".obj") return parse_obj(bytes);
  throw Error(ErrorKind::ParseError, "unsupported mesh extension: " + ext);
}

void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const Face& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

void save_binary_stl(const TriMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  char header[80] = {};
  out.write(header, 80);
  const auto count = static_cast<std::uint32_t>(mesh.faces.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const Face& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).normalized();
    float rec[12] = {static_cast<float>(n.x()), static_cast<float>(n.y()), static_cast<float>(n.z())};
    for (int k = 0; k < 3; ++k) {
      const Vec3& v = mesh.vertices[f[k]];
      rec[3 + 3 * k] = static_cast<float>(v.x());
      rec[4 + 3 * k] = static_cast<float>(v.y());
      rec[5 + 3 * k] = static_cast<float>(v.z());
    }
    out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    const std::uint16_t attr = 0;
    out.write(reinterpret_cast<const char*>(&attr), 2);
  }
}

namespace {

Vec3 json_vec3(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3) {
    throw Error(ErrorKind::ConfigError, std::string("manifest field '") + key + "' must be a 3-array");
  }
  return Vec3(j[key][0].get<double>(), j[key][1].get<double>(), j[key][2].get<double>());
}

}  // namespace

ArticulatedModel load_model_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("manifest: ") + e.what());
  }
  const auto dir = path.parent_path();
  ArticulatedModel m;
  try {
    m.part_fixed = load_mesh(dir / j.at("fixed_mesh").get<std::string>());
    m.part_moving = load_mesh(dir / j.at("moving_mesh").get<std::string>());
    m.hinge_origin = json_vec3(j, "hinge_origin");
    m.hinge_axis = json_vec3(j, "hinge_axis");
    m.angle_min = j.value("angle_min", 0.0);
    m.angle_max = j.value("angle_max", 0.6);
    m.class_id = j.at("class_id").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void save_model_manifest(const ArticulatedModel& model, const std::filesystem::path& path,
                         const std::string& fixed_name, const std::string& moving_name) {
  const auto dir = path.parent_path();
  save_obj(model.part_fixed, dir / fixed_name);
  save_obj(model.part_moving, dir / moving_name);
  const nlohmann::json j = {
      {"fixed_mesh", fixed_name},
      {"moving_mesh", moving_name},
      {"hinge_origin", {model.hinge_origin.x(), model.hinge_origin.y(), model.hinge_origin.z()}},
      {"hinge_axis", {model.hinge_axis.x(), model.hinge_axis.y(), model.hinge_axis.z()}},
      {"angle_min", model.angle_min},
      {"angle_max", model.angle_max},
      {"class_id", model.class_id},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

Mat3 hinge_rotation(const ArticulatedModel& model, double angle) {
  return Eigen::AngleAxisd(angle, model.hinge_axis).toRotationMatrix();
}

}  // namespace

TriMesh articulate(const ArticulatedModel& model, double articulation) {
  const Mat3 rot = hinge_rotation(model, model.hinge_angle(articulation));
  TriMesh out;
  out.vertices = model.part_fixed.vertices;
  out.faces = model.part_fixed.faces;
  const auto offset = static_cast<std::uint32_t>(out.vertices.size());
  for (const Vec3& v : model.part_moving.vertices) {
    out.vertices.push_back(rot * (v - model.hinge_origin) + model.hinge_origin);
  }
  for (const Face& f : model.part_moving.faces) {
    out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
  }
  return out;
}

TriMesh unarticulate(const ArticulatedModel& model, const TriMesh& posed, double articulation) {
  const Mat3 inv = hinge_rotation(model, model.hinge_angle(articulation)).transpose();
  TriMesh out = posed;
  for (std::size_t i = model.part_fixed.vertices.size(); i < out.vertices.size(); ++i) {
    out.vertices[i] = inv * (posed.vertices[i] - model.hinge_origin) + model.hinge_origin;
  }
  return out;
}

Aabb tight_bbox(const TriMesh& mesh) {
  if (mesh.vertices.empty()) throw Error(ErrorKind::DegenerateMesh, "empty mesh");
  Aabb box{mesh.vertices.front(), mesh.vertices.front()};
  for (const Vec3& v : mesh.vertices) {
    box.min = box.min.cwiseMin(v);
    box.max = box.max.cwiseMax(v);
  }
  if ((box.extent().array() < 1e-9).any()) {
    throw Error(ErrorKind::DegenerateMesh, "mesh is flat along at least one axis");
  }
  return box;
}

Vec3 normalize_point(const Vec3& p, const Aabb& box) {
  return (p - box.min).cwiseQuotient(box.extent());
}

Vec3 denormalize_point(const Vec3& q, const Aabb& box) {
  return box.min + q.cwiseProduct(box.extent());
}

std::vector<Vec3> normalize_vertices(const TriMesh& mesh, const Aabb& box) {
  std::vector<Vec3> out;
  out.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) {
    Vec3 q = normalize_point(v, box);
    if ((q.array() < -1e-9).any() || (q.array() > 1.0 + 1e-9).any()) {
      throw Error(ErrorKind::BBoxMismatch, "vertex lies outside the bounding box");
    }
    out.push_back(q.cwiseMax(0.0).cwiseMin(1.0));
  }
  return out;
}

std::vector<SurfaceSample> sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::ConfigError, "sample count must be >= 1");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    total += mesh.face_area(i);
    cdf[i] = total;
  }
  Rng rng(seed);
  std::vector<SurfaceSample> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double pick = uniform01(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    const auto face = static_cast<std::uint32_t>(
        std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    const double su = std::sqrt(uniform01(rng));
    const double v = uniform01(rng);
    const Face& f = mesh.faces[face];
    const Vec3 p = (1.0 - su) * mesh.vertices[f[0]] + su * (1.0 - v) * mesh.vertices[f[1]] +
                   su * v * mesh.vertices[f[2]];
    out.push_back({p, face});
  }
  return out;
}

std::vector<Vec3> sample_surface_points(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  std::vector<Vec3> pts;
  for (const auto& s : sample_surface(mesh, n, seed)) pts.push_back(s.point);
  return pts;
}

TriMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriMesh m;
  m.vertices = {{lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()}, {hi.x(), hi.y(), lo.z()},
                {lo.x(), hi.y(), lo.z()}, {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
                {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()}};
  m.faces = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7}, {0, 1, 5}, {0, 5, 4},
             {3, 7, 6}, {3, 6, 2}, {0, 4, 7}, {0, 7, 3}, {1, 2, 6}, {1, 6, 5}};
  return m;
}

TriMesh make_ellipsoid(const Vec3& radii, int rings, int segments) {
  TriMesh m;
  m.vertices.emplace_back(0.0, 0.0, radii.z());
  for (int i = 1; i < rings; ++i) {
    const double theta = std::numbers::pi * i / rings;
    for (int j = 0; j < segments; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / segments;
      m.vertices.emplace_back(radii.x() * std::sin(theta) * std::cos(phi),
                              radii.y() * std::sin(theta) * std::sin(phi), radii.z() * std::cos(theta));
    }
  }
  m.vertices.emplace_back(0.0, 0.0, -radii.z());
  const auto south = static_cast<std::uint32_t>(m.vertices.size() - 1);
  auto ring_vertex = [&](int ring, int seg) {
    return static_cast<std::uint32_t>(1 + (ring - 1) * segments + (seg % segments));
  };
  for (int j = 0; j < segments; ++j) m.faces.push_back({0, ring_vertex(1, j), ring_vertex(1, j + 1)});
  for (int i = 1; i + 1 < rings; ++i) {
    for (int j = 0; j < segments; ++j) {
      const auto a = ring_vertex(i, j), b = ring_vertex(i, j + 1);
      const auto c = ring_vertex(i + 1, j), d = ring_vertex(i + 1, j + 1);
      m.faces.push_back({a, c, d});
      m.faces.push_back({a, d, b});
    }
  }
  for (int j = 0; j < segments; ++j) {
    m.faces.push_back({south, ring_vertex(rings - 1, j + 1), ring_vertex(rings - 1, j)});
  }
  return m;
}

TriMesh merge_meshes(const TriMesh& a, const TriMesh& b) {
  TriMesh out = a;
  const auto offset = static_cast<std::uint32_t>(a.vertices.size());
  out.vertices.insert(out.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (const Face& f : b.faces) out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
  return out;
}

TriMesh transform_mesh(const TriMesh& mesh, const Pose& pose) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = pose.apply(v);
  return out;
}

// Scissor-like holder: jaws and handles on two stacked layers crossing at the hinge, finger
// rings raised out of plane.
ArticulatedModel make_needle_holder() {
  ArticulatedModel m;
  TriMesh lower = make_box({-0.100, -0.005, -0.006}, {0.035, 0.002, 0.0});
  lower = merge_meshes(lower, make_box({-0.125, -0.024, -0.010}, {-0.098, -0.004, 0.004}));
  lower = merge_meshes(lower, make_box({0.020, -0.004, -0.008}, {0.035, 0.002, -0.006}));
  TriMesh upper = make_box({-0.100, -0.002, 0.0}, {0.035, 0.005, 0.006});
  upper = merge_meshes(upper, make_box({-0.125, 0.004, -0.004}, {-0.098, 0.024, 0.010}));
  upper = merge_meshes(upper, make_box({0.020, -0.002, 0.006}, {0.035, 0.004, 0.008}));
  m.part_fixed = std::move(lower);
  m.part_moving = std::move(upper);
  m.hinge_origin = Vec3::Zero();
  m.hinge_axis = Vec3::UnitZ();
  m.angle_min = 0.0;
  m.angle_max = 0.6;
  m.class_id = static_cast<int>(ToolClass::NeedleHolder);
  return m;
}

// Two prongs joined at a rear block; the moving prong swings about the block.
ArticulatedModel make_tweezers() {
  ArticulatedModel m;
  TriMesh fixed = make_box({-0.015, -0.009, -0.005}, {0.0, 0.009, 0.005});
  fixed = merge_meshes(fixed, make_box({0.0, -0.009, -0.003}, {0.120, -0.002, 0.003}));
  fixed = merge_meshes(fixed, make_box({0.045, -0.011, -0.007}, {0.075, -0.005, 0.007}));
  TriMesh moving = make_box({0.0, 0.002, -0.003}, {0.120, 0.009, 0.003});
  moving = merge_meshes(moving, make_box({0.045, 0.005, -0.007}, {0.075, 0.011, 0.007}));
  m.part_fixed = std::move(fixed);
  m.part_moving = std::move(moving);
  m.hinge_origin = Vec3(0.0, 0.002, 0.0);
  m.hinge_axis = Vec3::UnitZ();
  m.angle_min = 0.0;
  m.angle_max = 0.6;
  m.class_id = static_cast<int>(ToolClass::Tweezers);
  return m;
}

ArticulatedModel make_builtin_model(int class_id) {
  switch (class_id) {
    case 0: return make_needle_holder();
    case 1: return make_tweezers();
    default: throw Error(ErrorKind::ConfigError, "unknown tool class " + std::to_string(class_id));
  }
}

}  // namespace toolpose
