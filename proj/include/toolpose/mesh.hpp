#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "toolpose/camera.hpp"

namespace toolpose {

using Face = std::array<std::uint32_t, 3>;

/// Triangle mesh in meters, faces wound counter-clockwise seen from outside.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  void validate() const;
  double face_area(std::size_t i) const;
};

/// Tool categories.
enum class ToolClass : int { NeedleHolder = 0, Tweezers = 1 };
inline constexpr int kNumClasses = 2;
const char* class_name(int class_id);

/// Two-part hinged tool.
struct ArticulatedModel {
  TriMesh part_fixed;
  TriMesh part_moving;
  Vec3 hinge_origin = Vec3::Zero();
  Vec3 hinge_axis = Vec3::UnitZ();
  double angle_min = 0.0;
  double angle_max = 0.6;
  int class_id = 0;

  void validate() const;
  double hinge_angle(double articulation) const;
};

struct Aabb {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
};

TriMesh load_mesh(const std::filesystem::path& path);
TriMesh parse_obj(const std::string& text);
TriMesh parse_binary_stl(const std::string& bytes, double weld_tol = 1e-7);
void save_obj(const TriMesh& mesh, const std::filesystem::path& path);
void save_binary_stl(const TriMesh& mesh, const std::filesystem::path& path);

/// Manifest JSON: {fixed_mesh, moving_mesh, hinge_origin, hinge_axis, angle_min, angle_max,
/// class_id}; mesh paths resolve relative to the manifest.
ArticulatedModel load_model_manifest(const std::filesystem::path& path);
void save_model_manifest(const ArticulatedModel& model, const std::filesystem::path& path,
                         const std::string& fixed_name, const std::string& moving_name);

/// Union mesh with the moving part rotated to the given normalized articulation in [0,1].
TriMesh articulate(const ArticulatedModel& model, double articulation);
/// Undo `articulate` on a posed union mesh.
TriMesh unarticulate(const ArticulatedModel& model, const TriMesh& posed, double articulation);

Aabb tight_bbox(const TriMesh& mesh);
std::vector<Vec3> normalize_vertices(const TriMesh& mesh, const Aabb& box);
Vec3 normalize_point(const Vec3& p, const Aabb& box);
Vec3 denormalize_point(const Vec3& q, const Aabb& box);

struct SurfaceSample {
  Vec3 point;
  std::uint32_t face;
};

/// Area-weighted uniform samples; deterministic in `seed`.
std::vector<SurfaceSample> sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);
std::vector<Vec3> sample_surface_points(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

// Procedural primitives and the two built-in tools.
TriMesh make_box(const Vec3& min, const Vec3& max);
TriMesh make_ellipsoid(const Vec3& radii, int rings = 8, int segments = 12);
TriMesh merge_meshes(const TriMesh& a, const TriMesh& b);
TriMesh transform_mesh(const TriMesh& mesh, const Pose& pose);
ArticulatedModel make_needle_holder();
ArticulatedModel make_tweezers();
ArticulatedModel make_builtin_model(int class_id);

}  // namespace toolpose
