#include "toolpose/camera.hpp"

#include <algorithm>
#include <cmath>

#include "toolpose/error.hpp"

namespace toolpose {

void CameraIntrinsics::validate() const {
  if (!(f > 0.0) || width <= 0 || height <= 0 || !(px >= 0.0 && px < width) ||
      !(py >= 0.0 && py < height)) {
    throw Error(ErrorKind::ConfigError, "invalid camera intrinsics");
  }
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 K;
  K << f, 0.0, px, 0.0, f, py, 0.0, 0.0, 1.0;
  return K;
}

BBox BBox::from_corners(double x0, double y0, double x1, double y1) {
  return BBox{0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
}

void BBox::validate() const {
  if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorKind::ConfigError, "bounding box must have positive size");
  }
}

double bbox_iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Mat3::Identity()).norm();
  return ortho < tol && std::abs(R.determinant() - 1.0) <= tol;
}

void check_rotation(const Mat3& R) {
  if (!is_rotation(R)) throw Error(ErrorKind::InvalidRotation, "matrix is not in SO(3)");
}

void check_pose(const Pose& pose) {
  check_rotation(pose.R);
  if (!pose.t.allFinite()) throw Error(ErrorKind::InvalidRotation, "non-finite translation");
}

Mat3 rot6d_to_matrix(const Rot6D& g) {
  const double n1 = g.r1.norm();
  if (!(n1 > kGramSchmidtEps)) {
    throw Error(ErrorKind::DegenerateRotation6D, "first column has vanishing norm");
  }
  const Vec3 c1 = g.r1 / n1;
  const Vec3 ortho = g.r2 - g.r2.dot(c1) * c1;
  const double n2 = ortho.norm();
  if (!(n2 > kGramSchmidtEps)) {
    throw Error(ErrorKind::DegenerateRotation6D, "second column is parallel to the first");
  }
  const Vec3 c2 = ortho / n2;
  Mat3 R;
  R.col(0) = c1;
  R.col(1) = c2;
  R.col(2) = c1.cross(c2);
  return R;
}

Rot6D matrix_to_rot6d(const Mat3& R) {
  check_rotation(R);
  return Rot6D{R.col(0), R.col(1)};
}

Mat3 axis_angle_to_matrix(const Vec3& omega) {
  const double angle = omega.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

Mat3 viewing_ray_correction(const Vec2& center, const CameraIntrinsics& K) {
  const Vec3 v = Vec3((center.x() - K.px) / K.f, (center.y() - K.py) / K.f, 1.0).normalized();
  const Vec3 z = Vec3::UnitZ();
  if (!(v.dot(z) > -1.0 + 1e-6)) {
    throw Error(ErrorKind::BackfacingRay, "viewing ray is antiparallel to the optical axis");
  }
  const Vec3 axis = z.cross(v);
  const double angle = std::atan2(axis.norm(), z.dot(v));
  if (angle < 1e-9) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Mat3 allo_to_ego(const Mat3& R_allo, const Vec2& center, const CameraIntrinsics& K) {
  return viewing_ray_correction(center, K) * R_allo;
}

Mat3 ego_to_allo(const Mat3& R_ego, const Vec2& center, const CameraIntrinsics& K) {
  return viewing_ray_correction(center, K).transpose() * R_ego;
}

Vec3 site_decode(const SiteParams& s, const BBox& box, const CameraIntrinsics& K) {
  box.validate();
  const double r = s.s_zoom / std::max(box.w, box.h);
  const double tz = s.dz * r;
  if (!(tz > 0.0)) throw Error(ErrorKind::NonPositiveDepth, "decoded depth is not positive");
  const double ox = box.cx + s.dx * box.w;
  const double oy = box.cy + s.dy * box.h;
  return Vec3((ox - K.px) * tz / K.f, (oy - K.py) * tz / K.f, tz);
}

SiteParams site_encode(const Vec3& t, const BBox& box, const CameraIntrinsics& K,
                       double s_zoom) {
  box.validate();
  if (!(t.z() > 0.0)) throw Error(ErrorKind::NonPositiveDepth, "translation depth is not positive");
  if (!(s_zoom > 0.0)) throw Error(ErrorKind::ConfigError, "zoom size must be positive");
  const double ox = K.f * t.x() / t.z() + K.px;
  const double oy = K.f * t.y() / t.z() + K.py;
  const double r = s_zoom / std::max(box.w, box.h);
  return SiteParams{(ox - box.cx) / box.w, (oy - box.cy) / box.h, t.z() / r, s_zoom};
}

Vec2 project_point(const Vec3& p, const Pose& pose, const CameraIntrinsics& K) {
  const Vec3 X = pose.apply(p);
  if (!(X.z() > 1e-9)) throw Error(ErrorKind::PointBehindCamera, "point is behind the camera");
  return Vec2(K.f * X.x() / X.z() + K.px, K.f * X.y() / X.z() + K.py);
}

std::vector<Vec2> project_points(std::span<const Vec3> pts, const Pose& pose,
                                 const CameraIntrinsics& K) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const Vec3& p : pts) out.push_back(project_point(p, pose, K));
  return out;
}

double geodesic_angle(const Mat3& Ra, const Mat3& Rb) {
  check_rotation(Ra);
  check_rotation(Rb);
  const double c = ((Ra.transpose() * Rb).trace() - 1.0) / 2.0;
  if (c > 0.5) {
    // acos loses half the digits near zero; ‖Ra − Rb‖_F = 2√2·sin(θ/2) does not.
    const double chord = (Ra - Rb).norm() / (2.0 * std::sqrt(2.0));
    return 2.0 * std::asin(std::min(1.0, chord));
  }
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace toolpose
