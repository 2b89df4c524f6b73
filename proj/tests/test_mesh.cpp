#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "toolpose/mesh.hpp"

using namespace toolpose;
using testing::error_kind_of;

namespace {

const char* kCubeObj = R"(# unit cube
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v 0.5 0.5 0.5
v -0.5 0.5 0.5
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
)";

std::vector<std::array<double, 3>> sorted_vertices(const TriMesh& m) {
  std::vector<std::array<double, 3>> v;
  for (const auto& p : m.vertices) v.push_back({p.x(), p.y(), p.z()});
  std::sort(v.begin(), v.end());
  return v;
}

ArticulatedModel hinge_model() {
  ArticulatedModel m;
  m.part_fixed = make_box(Vec3(-1, -0.1, -0.1), Vec3(0, 0.1, 0.1));
  m.part_moving = make_box(Vec3(0.5, -0.1, -0.1), Vec3(1.5, 0.1, 0.1));
  m.part_moving.vertices.push_back(Vec3(1, 0, 0));
  m.hinge_origin = Vec3::Zero();
  m.hinge_axis = Vec3::UnitZ();
  m.angle_min = 0.0;
  m.angle_max = std::numbers::pi / 2;
  return m;
}

}  // namespace

TEST_CASE("OBJ cube loads with 8 vertices and 12 faces") {
  const TriMesh m = parse_obj(kCubeObj);
  CHECK(m.vertices.size() == 8);
  CHECK(m.faces.size() == 12);
}

TEST_CASE("STL round trip welds to the OBJ vertex set") {
  testing::TempDir dir("mesh");
  const TriMesh cube = parse_obj(kCubeObj);
  save_binary_stl(cube, dir / "cube.stl");
  const TriMesh stl = load_mesh(dir / "cube.stl");
  CHECK(stl.vertices.size() == 8);
  CHECK(stl.faces.size() == 12);
  CHECK(sorted_vertices(stl) == sorted_vertices(cube));

  save_obj(cube, dir / "cube.obj");
  const TriMesh obj = load_mesh(dir / "cube.obj");
  CHECK(obj.vertices == cube.vertices);
  CHECK(obj.faces == cube.faces);
}

TEST_CASE("truncated inputs are parse errors") {
  CHECK(error_kind_of([] { parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2"); }) == ErrorKind::ParseError);
  CHECK(error_kind_of([] { parse_obj("v 0 0"); }) == ErrorKind::ParseError);
  testing::TempDir dir("mesh");
  save_binary_stl(parse_obj(kCubeObj), dir / "cube.stl");
  std::string bytes = testing::slurp(dir / "cube.stl");
  bytes.resize(bytes.size() - 20);
  CHECK(error_kind_of([&] { parse_binary_stl(bytes); }) == ErrorKind::ParseError);
}

TEST_CASE("articulate rotates only the moving part") {
  const ArticulatedModel m = hinge_model();
  const TriMesh closed = articulate(m, 0.0);
  const std::size_t nf = m.part_fixed.vertices.size();
  CHECK(closed.vertices.size() == nf + m.part_moving.vertices.size());
  CHECK(closed.faces.size() == m.part_fixed.faces.size() + m.part_moving.faces.size());
  for (std::size_t i = 0; i < m.part_moving.vertices.size(); ++i)
    CHECK(closed.vertices[nf + i] == m.part_moving.vertices[i]);

  const TriMesh open = articulate(m, 1.0);
  const Vec3 moved = open.vertices.back();
  CHECK((moved - Vec3(0, 1, 0)).norm() < 1e-12);
  for (std::size_t i = 0; i < nf; ++i) CHECK(open.vertices[i] == m.part_fixed.vertices[i]);
}

TEST_CASE("articulation is rigid and invertible") {
  ArticulatedModel m = make_needle_holder();
  const std::size_t nf = m.part_fixed.vertices.size();
  const std::size_t nm = m.part_moving.vertices.size();
  for (double a : {0.0, 0.3, 0.77, 1.0}) {
    const TriMesh posed = articulate(m, a);
    for (std::size_t i = 0; i < nf; ++i) CHECK(posed.vertices[i] == m.part_fixed.vertices[i]);
    for (std::size_t i = 0; i < nm; i += 7)
      for (std::size_t j = i + 1; j < nm; j += 11) {
        const double d0 = (m.part_moving.vertices[i] - m.part_moving.vertices[j]).norm();
        const double d1 = (posed.vertices[nf + i] - posed.vertices[nf + j]).norm();
        CHECK(std::abs(d0 - d1) < 1e-9);
      }
    const TriMesh back = unarticulate(m, posed, a);
    const TriMesh rest = articulate(m, 0.0);
    double err = 0.0;
    for (std::size_t i = 0; i < rest.vertices.size(); ++i)
      err = std::max(err, (back.vertices[i] - rest.vertices[i]).norm());
    CHECK(err < 1e-12);
  }
}

TEST_CASE("tight_bbox") {
  const TriMesh cube = parse_obj(kCubeObj);
  const Aabb b = tight_bbox(cube);
  CHECK(b.min == Vec3(-0.5, -0.5, -0.5));
  CHECK(b.max == Vec3(0.5, 0.5, 0.5));

  Pose shift;
  shift.t = Vec3(1, 2, 3);
  const Aabb s = tight_bbox(transform_mesh(cube, shift));
  CHECK((s.min - (b.min + shift.t)).norm() < 1e-15);
  CHECK((s.max - (b.max + shift.t)).norm() < 1e-15);

  const ArticulatedModel m = make_tweezers();
  const Aabb whole = tight_bbox(articulate(m, 0.6));
  const Aabb fixed = tight_bbox(m.part_fixed);
  CHECK((whole.min.array() <= fixed.min.array()).all());
  CHECK((whole.max.array() >= fixed.max.array()).all());

  TriMesh flat;
  flat.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
  flat.faces = {{0, 1, 2}, {1, 3, 2}};
  CHECK(error_kind_of([&] { tight_bbox(flat); }) == ErrorKind::DegenerateMesh);
}

TEST_CASE("normalize and denormalize") {
  const TriMesh cube = parse_obj(kCubeObj);
  const Aabb b = tight_bbox(cube);
  CHECK(normalize_point(b.min, b) == Vec3(0, 0, 0));
  CHECK(normalize_point(b.max, b) == Vec3(1, 1, 1));
  CHECK((normalize_point(Vec3::Zero(), b) - Vec3(0.5, 0.5, 0.5)).norm() < 1e-15);

  const ArticulatedModel m = make_needle_holder();
  Rng rng(1);
  for (double a : {0.0, 0.5, 1.0}) {
    const TriMesh posed = articulate(m, a);
    const Aabb box = tight_bbox(posed);
    const auto q = normalize_vertices(posed, box);
    for (std::size_t i = 0; i < q.size(); ++i) {
      CHECK((q[i].array() >= -1e-12).all());
      CHECK((q[i].array() <= 1 + 1e-12).all());
      CHECK((denormalize_point(q[i], box) - posed.vertices[i]).norm() < 1e-12);
    }
  }
  const Aabb small{Vec3(-0.1, -0.1, -0.1), Vec3(0.1, 0.1, 0.1)};
  CHECK(error_kind_of([&] { normalize_vertices(cube, small); }) == ErrorKind::BBoxMismatch);
}

TEST_CASE("single triangle sample lies in its plane") {
  TriMesh tri;
  tri.vertices = {Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1)};
  tri.faces = {{0, 1, 2}};
  const auto p = sample_surface_points(tri, 1, 42);
  REQUIRE(p.size() == 1);
  CHECK(p[0].z() == doctest::Approx(1.0));
  CHECK(p[0].x() >= 0.0);
  CHECK(p[0].y() >= 0.0);
  CHECK(p[0].x() + p[0].y() <= 1.0 + 1e-12);
}

TEST_CASE("surface samples are area weighted (chi-square)") {
  // Faces of a 1 x 2 x 3 box have areas 2, 3 and 6 (two triangles each).
  const TriMesh box = make_box(Vec3(0, 0, 0), Vec3(1, 2, 3));
  const std::size_t n = 100000;
  const auto s = sample_surface(box, n, 7);
  std::vector<double> counts(box.faces.size(), 0.0);
  for (const auto& x : s) counts[x.face] += 1.0;
  double total_area = 0.0;
  for (std::size_t i = 0; i < box.faces.size(); ++i) total_area += box.face_area(i);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < box.faces.size(); ++i) {
    const double expected = n * box.face_area(i) / total_area;
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  // Upper 1% point of chi-square with 11 degrees of freedom.
  CHECK(chi2 < 24.725);
  CHECK(sample_surface_points(box, 100, 3) == sample_surface_points(box, 100, 3));
  CHECK(sample_surface_points(box, 100, 3) != sample_surface_points(box, 100, 4));
}

TEST_CASE("model manifest round trip") {
  testing::TempDir dir("mesh");
  const ArticulatedModel m = make_tweezers();
  save_obj(m.part_fixed, dir / "fixed.obj");
  save_obj(m.part_moving, dir / "moving.obj");
  save_model_manifest(m, dir / "tweezers.json", "fixed.obj", "moving.obj");
  const ArticulatedModel back = load_model_manifest(dir / "tweezers.json");
  CHECK(back.class_id == m.class_id);
  CHECK(back.angle_max == m.angle_max);
  CHECK(back.part_moving.faces == m.part_moving.faces);
  CHECK((back.hinge_axis - m.hinge_axis).norm() < 1e-15);
}
