#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace toolpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole camera with a single focal length (square pixels).
struct CameraIntrinsics {
  double f = 800.0;
  double px = 320.0;
  double py = 240.0;
  int width = 640;
  int height = 480;

  void validate() const;
  Mat3 matrix() const;
};

/// Rigid transform model -> camera. Translation in meters, +z forward.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3(0.0, 0.0, 1.0);

  Vec3 apply(const Vec3& p) const { return R * p + t; }
};

/// Two unorthogonalized columns of a rotation matrix.
struct Rot6D {
  Vec3 r1 = Vec3::UnitX();
  Vec3 r2 = Vec3::UnitY();
};

/// Axis-aligned image box given by center and size, in pixels.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;

  double x0() const { return cx - 0.5 * w; }
  double y0() const { return cy - 0.5 * h; }
  double x1() const { return cx + 0.5 * w; }
  double y1() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  static BBox from_corners(double x0, double y0, double x1, double y1);
  void validate() const;
};

double bbox_iou(const BBox& a, const BBox& b);

/// Scale-invariant translation parameters relative to a detection box.
struct SiteParams {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 1.0;
  double s_zoom = 256.0;
};

inline constexpr double kGramSchmidtEps = 1e-8;
inline constexpr double kDefaultZoom = 256.0;

bool is_rotation(const Mat3& R, double tol = 1e-9);
void check_rotation(const Mat3& R);
void check_pose(const Pose& pose);

Mat3 rot6d_to_matrix(const Rot6D& g);
Rot6D matrix_to_rot6d(const Mat3& R);

/// Minimal rotation taking the optical axis onto the viewing ray through `center`.
Mat3 viewing_ray_correction(const Vec2& center, const CameraIntrinsics& K);
Mat3 allo_to_ego(const Mat3& R_allo, const Vec2& center, const CameraIntrinsics& K);
Mat3 ego_to_allo(const Mat3& R_ego, const Vec2& center, const CameraIntrinsics& K);

Vec3 site_decode(const SiteParams& s, const BBox& box, const CameraIntrinsics& K);
SiteParams site_encode(const Vec3& t, const BBox& box, const CameraIntrinsics& K,
                       double s_zoom = kDefaultZoom);

Vec2 project_point(const Vec3& p, const Pose& pose, const CameraIntrinsics& K);
std::vector<Vec2> project_points(std::span<const Vec3> pts, const Pose& pose,
                                 const CameraIntrinsics& K);

double geodesic_angle(const Mat3& Ra, const Mat3& Rb);

/// Rodrigues exponential map.
Mat3 axis_angle_to_matrix(const Vec3& omega);

}  // namespace toolpose
