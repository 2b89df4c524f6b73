#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "toolpose/camera.hpp"
#include "toolpose/image.hpp"
#include "toolpose/mesh.hpp"

namespace toolpose {

/// Model-frame points (meters) paired with full-image pixels.
struct CorrSet {
  std::vector<Vec3> pts3d;
  std::vector<Vec2> pts2d;

  std::size_t size() const { return pts3d.size(); }
  void validate(std::size_t min_size = 6) const;
  CorrSet subset(std::span<const std::uint32_t> indices) const;
};

struct PnPResult {
  Pose pose;
  int inlier_count = 0;
  int outlier_count = 0;
  double mean_reproj_err = 0.0;  // over inliers
  bool converged = false;
  std::vector<std::uint8_t> inliers;  // per correspondence
};

struct LmReport {
  int iterations = 0;  // accepted steps
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  std::vector<double> accepted_costs;
};

struct RansacOptions {
  double inlier_px = 2.0;
  int max_iters = 400;
  std::uint64_t seed = 0;
  double min_inlier_ratio = 0.2;
  int lm_max_iters = 100;
  double lm_tol = 1e-10;
  // Local optimization of the best-scoring hypotheses; lo_top_k = 0 disables it.
  int lo_top_k = 4;
  int lo_steps = 4;
  double lo_start_factor = 4.0;
  int lo_lm_iters = 20;
};

inline constexpr int kMinimalSample = 6;

/// One pair per valid map pixel: denormalized model point and the pixel center in the full image.
CorrSet pairs_from_map(const CorrespondenceMap& map, const Aabb& model_box);

/// Adds isotropic Gaussian pixel noise to every 2D point.
void perturb_pixels(CorrSet& corr, double sigma, std::uint64_t seed);

/// Linear pose from at least six correspondences, rotation projected onto SO(3).
Pose pnp_dlt(const CorrSet& corr, const CameraIntrinsics& K);

/// Homography solution on the best-fit plane of the model points; exact for coplanar points and
/// a usable initialization for thin objects. Needs at least 4 pairs.
Pose pnp_planar(const CorrSet& corr, const CameraIntrinsics& K);

/// Levenberg-Marquardt on the summed squared reprojection error with axis-angle increments.
Pose pnp_refine_lm(const CorrSet& corr, const CameraIntrinsics& K, const Pose& init,
                   int max_iters = 100, double tol = 1e-10, LmReport* report = nullptr);

/// MSAC hypothesize-and-verify over minimal DLT samples, then LM on the consensus set.
PnPResult pnp_ransac(const CorrSet& corr, const CameraIntrinsics& K, const RansacOptions& opts = {});

/// Parallel MSAC scoring of candidate poses: truncated squared reprojection error, lower is better.
std::vector<double> score_hypotheses(const CorrSet& corr, const CameraIntrinsics& K,
                                     std::span<const Pose> hypotheses, double inlier_px);

/// Per-point pixel distance; +inf for points behind the camera.
std::vector<double> reprojection_errors(const CorrSet& corr, const CameraIntrinsics& K, const Pose& pose);
double reprojection_rmse(const CorrSet& corr, const CameraIntrinsics& K, const Pose& pose);

}  // namespace toolpose
