#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "toolpose/pnp.hpp"

namespace toolpose::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double point_error(const Vec3& p, const Vec2& u, const Pose& pose, const CameraIntrinsics& K) {
  const Vec3 X = pose.apply(p);
  if (!(X.z() > 1e-9)) return kInf;
  const double du = K.f * X.x() / X.z() + K.px - u.x();
  const double dv = K.f * X.y() / X.z() + K.py - u.y();
  return std::sqrt(du * du + dv * dv);
}

// Sum of squared errors truncated at inlier_px²; points behind the camera pay the cap.
inline double msac_score(const CorrSet& corr, const CameraIntrinsics& K, const Pose& pose, double inlier_px) {
  const double cap = inlier_px * inlier_px;
  double score = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double e = point_error(corr.pts3d[i], corr.pts2d[i], pose, K);
    score += std::isfinite(e) ? std::min(e * e, cap) : cap;
  }
  return score;
}

}  // namespace toolpose::detail
