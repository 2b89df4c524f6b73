#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "toolpose/camera.hpp"

using namespace toolpose;
using testing::random_rotation;
using testing::rot_y;
using testing::rot_z;

namespace {

const CameraIntrinsics kCam{500.0, 320.0, 240.0, 640, 480};

}  // namespace

TEST_CASE("rot6d canonical and scaled inputs give identity") {
  CHECK(rot6d_to_matrix({Vec3(1, 0, 0), Vec3(0, 1, 0)}).isApprox(Mat3::Identity(), 1e-15));
  CHECK(rot6d_to_matrix({Vec3(2, 0, 0), Vec3(0, 3, 0)}).isApprox(Mat3::Identity(), 1e-15));
}

TEST_CASE("matrix_to_rot6d reads off the first two columns") {
  const Rot6D id = matrix_to_rot6d(Mat3::Identity());
  CHECK(id.r1 == Vec3(1, 0, 0));
  CHECK(id.r2 == Vec3(0, 1, 0));
  const Rot6D g = matrix_to_rot6d(rot_z(std::numbers::pi / 2));
  CHECK((g.r1 - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((g.r2 - Vec3(-1, 0, 0)).norm() < 1e-15);
}

TEST_CASE("rot6d round trip and validity") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 R = random_rotation(rng);
    CHECK(testing::max_abs(rot6d_to_matrix(matrix_to_rot6d(R)), R) < 1e-12);
  }
  for (int i = 0; i < 1000; ++i) {
    Rot6D g{Vec3(normal01(rng), normal01(rng), normal01(rng)), Vec3(normal01(rng), normal01(rng), normal01(rng))};
    const Mat3 R = rot6d_to_matrix(g);
    CHECK((R.transpose() * R - Mat3::Identity()).norm() < 1e-9);
    CHECK(R.determinant() > 0.0);
    const double s = 0.1 + 5.0 * uniform01(rng);
    const double u = 0.1 + 5.0 * uniform01(rng);
    CHECK(testing::max_abs(rot6d_to_matrix({s * g.r1, u * g.r2}), R) < 1e-12);
  }
}

TEST_CASE("rot6d degenerate inputs are rejected") {
  using testing::error_kind_of;
  CHECK(error_kind_of([] { rot6d_to_matrix({Vec3::Zero(), Vec3::UnitY()}); }) ==
        ErrorKind::DegenerateRotation6D);
  CHECK(error_kind_of([] { rot6d_to_matrix({Vec3::UnitX(), 2.0 * Vec3::UnitX()}); }) ==
        ErrorKind::DegenerateRotation6D);
  Mat3 bad = Mat3::Identity();
  bad(0, 1) = 0.1;
  CHECK(error_kind_of([&] { matrix_to_rot6d(bad); }) == ErrorKind::InvalidRotation);
}

TEST_CASE("allo_to_ego at the principal point is the identity correction") {
  Rng rng(3);
  const Mat3 R = random_rotation(rng);
  CHECK(testing::max_abs(allo_to_ego(R, Vec2(kCam.px, kCam.py), kCam), R) < 1e-15);
}

TEST_CASE("allo_to_ego for an object one focal length right of center") {
  // The ray through (px + f, py) is normalize([1, 0, 1]); the minimal rotation taking z onto it
  // is +45 degrees about +y.
  const Mat3 R = allo_to_ego(Mat3::Identity(), Vec2(kCam.px + kCam.f, kCam.py), kCam);
  const Vec3 ray = Vec3(1, 0, 1).normalized();
  CHECK((R * Vec3::UnitZ() - ray).norm() < 1e-12);
  CHECK(testing::max_abs(R, rot_y(std::numbers::pi / 4)) < 1e-12);
  // Rotation about -y by 45 degrees would send z to normalize([-1, 0, 1]) instead.
  CHECK((rot_y(-std::numbers::pi / 4) * Vec3::UnitZ() - ray).norm() > 1.0);
}

TEST_CASE("allo/ego round trip over random inputs") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 R = random_rotation(rng);
    const Vec2 o(uniform(rng, 0, 640), uniform(rng, 0, 480));
    CHECK(testing::max_abs(ego_to_allo(allo_to_ego(R, o, kCam), o, kCam), R) < 1e-12);
    CHECK(testing::max_abs(allo_to_ego(ego_to_allo(R, o, kCam), o, kCam), R) < 1e-12);
  }
}

TEST_CASE("site_decode hand cases") {
  const BBox centered{kCam.px, kCam.py, 128, 64};
  const double r = 256.0 / 128.0;
  const Vec3 t = site_decode({0, 0, 0.4, 256.0}, centered, kCam);
  CHECK(t.x() == doctest::Approx(0.0));
  CHECK(t.y() == doctest::Approx(0.0));
  CHECK(t.z() == doctest::Approx(0.4 * r));

  const BBox box{300, 200, 100, 80};
  const Vec3 u = site_decode({0.5, 0, 0.25, 256.0}, box, kCam);
  const double tz = 0.25 * 256.0 / 100.0;
  CHECK(u.z() == doctest::Approx(tz));
  CHECK(u.x() == doctest::Approx((350.0 - kCam.px) * tz / kCam.f));
  CHECK(u.y() == doctest::Approx((200.0 - kCam.py) * tz / kCam.f));

  const SiteParams back = site_encode(u, box, kCam);
  CHECK(back.dx == doctest::Approx(0.5));
  CHECK(back.dy == doctest::Approx(0.0));
  CHECK(back.dz == doctest::Approx(0.25));
}

TEST_CASE("site round trips") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const BBox box{uniform(rng, 50, 600), uniform(rng, 50, 430), uniform(rng, 20, 200), uniform(rng, 20, 200)};
    const Vec3 t(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, 0.1, 2.0));
    const Vec3 t2 = site_decode(site_encode(t, box, kCam), box, kCam);
    CHECK((t2 - t).cwiseAbs().maxCoeff() < 1e-12);
    const SiteParams s{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0.1, 2.0), 256.0};
    const SiteParams s2 = site_encode(site_decode(s, box, kCam), box, kCam);
    CHECK(std::abs(s2.dx - s.dx) < 1e-12);
    CHECK(std::abs(s2.dy - s.dy) < 1e-12);
    CHECK(std::abs(s2.dz - s.dz) < 1e-12);
  }
  CHECK(testing::error_kind_of([] { site_decode({0, 0, -1.0, 256.0}, BBox{0, 0, 10, 10}, kCam); }) ==
        ErrorKind::NonPositiveDepth);
}

TEST_CASE("project_points") {
  Pose pose;
  CHECK((project_point(Vec3::Zero(), pose, kCam) - Vec2(320, 240)).norm() < 1e-12);
  CHECK((project_point(Vec3(0.1, 0, 0), pose, kCam) - Vec2(370, 240)).norm() < 1e-12);

  Rng rng(2);
  pose.R = random_rotation(rng);
  pose.t = Vec3(0.01, -0.02, 0.5);
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(Vec3(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05)));
  const auto uv = project_points(pts, pose, kCam);
  REQUIRE(uv.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 X = pose.R * pts[i] + pose.t;
    CHECK(uv[i].x() == doctest::Approx(kCam.f * X.x() / X.z() + kCam.px).epsilon(1e-14));
    CHECK(uv[i].y() == doctest::Approx(kCam.f * X.y() / X.z() + kCam.py).epsilon(1e-14));
    CHECK(uv[i] == project_point(pts[i], pose, kCam));
  }
  pose = Pose{};
  pose.t = Vec3(0, 0, -1);
  CHECK(testing::error_kind_of([&] { project_point(Vec3::Zero(), pose, kCam); }) == ErrorKind::PointBehindCamera);
}

TEST_CASE("geodesic_angle") {
  Rng rng(4);
  const Mat3 R = random_rotation(rng);
  CHECK(geodesic_angle(R, R) == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(geodesic_angle(Mat3::Identity(), rot_z(std::numbers::pi / 2)) == doctest::Approx(std::numbers::pi / 2));
  for (int i = 0; i < 1000; ++i) {
    const Mat3 a = random_rotation(rng), b = random_rotation(rng), c = random_rotation(rng);
    CHECK(geodesic_angle(a, b) == geodesic_angle(b, a));
    CHECK(geodesic_angle(a, c) <= geodesic_angle(a, b) + geodesic_angle(b, c) + 1e-9);
  }
}

TEST_CASE("bbox iou") {
  const BBox a{50, 50, 100, 100};
  CHECK(bbox_iou(a, a) == doctest::Approx(1.0));
  CHECK(bbox_iou(a, BBox{100, 50, 100, 100}) == doctest::Approx(1.0 / 3.0));
  CHECK(bbox_iou(a, BBox{150, 50, 100, 100}) == doctest::Approx(0.0));
}
