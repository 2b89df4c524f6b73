#include "toolpose/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pnp_detail.hpp"
#include "toolpose/error.hpp"
#include "toolpose/random.hpp"

namespace toolpose {

namespace {

using Mat34 = Eigen::Matrix<double, 3, 4>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

using detail::kInf;
using detail::msac_score;
using detail::point_error;

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return S;
}

double sum_squared_error(const CorrSet& corr, const CameraIntrinsics& K, const Pose& pose) {
  double cost = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 X = pose.apply(corr.pts3d[i]);
    if (!(X.z() > 1e-9)) return kInf;
    const double du = K.f * X.x() / X.z() + K.px - corr.pts2d[i].x();
    const double dv = K.f * X.y() / X.z() + K.py - corr.pts2d[i].y();
    cost += du * du + dv * dv;
  }
  return cost;
}

}  // namespace

void CorrSet::validate(std::size_t min_size) const {
  if (pts3d.size() != pts2d.size()) {
    throw Error(ErrorKind::ShapeMismatch, "2D and 3D point counts differ");
  }
  if (pts3d.size() < min_size) {
    throw Error(ErrorKind::TooFewCorrespondences,
                std::to_string(pts3d.size()) + " correspondences, need " + std::to_string(min_size));
  }
  for (std::size_t i = 0; i < pts3d.size(); ++i) {
    if (!pts3d[i].allFinite() || !pts2d[i].allFinite()) {
      throw Error(ErrorKind::NonFiniteResidual, "non-finite correspondence");
    }
  }
}

CorrSet CorrSet::subset(std::span<const std::uint32_t> indices) const {
  CorrSet out;
  out.pts3d.reserve(indices.size());
  out.pts2d.reserve(indices.size());
  for (auto i : indices) {
    out.pts3d.push_back(pts3d[i]);
    out.pts2d.push_back(pts2d[i]);
  }
  return out;
}

CorrSet pairs_from_map(const CorrespondenceMap& map, const Aabb& model_box) {
  CorrSet corr;
  const int n = map.size();
  const double sx = map.crop.w / n, sy = map.crop.h / n;
  for (int r = 0; r < map.coords.height; ++r) {
    for (int c = 0; c < map.coords.width; ++c) {
      if (!map.valid.at(r, c)) continue;
      const Vec3 q(map.coords.at(r, c, 0), map.coords.at(r, c, 1), map.coords.at(r, c, 2));
      corr.pts3d.push_back(denormalize_point(q, model_box));
      corr.pts2d.emplace_back(map.crop.x0() + (c + 0.5) * sx, map.crop.y0() + (r + 0.5) * sy);
    }
  }
  if (corr.size() < kMinimalSample) {
    throw Error(ErrorKind::TooFewCorrespondences,
                "map has " + std::to_string(corr.size()) + " valid pixels");
  }
  return corr;
}

void perturb_pixels(CorrSet& corr, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  Rng rng(seed);
  for (Vec2& u : corr.pts2d) {
    const double nx = normal01(rng);
    const double ny = normal01(rng);
    u += sigma * Vec2(nx, ny);
  }
}

Pose pnp_dlt(const CorrSet& corr, const CameraIntrinsics& K) {
  corr.validate(kMinimalSample);
  const std::size_t n = corr.size();

  // Normalize both point sets: centroid at origin, mean distance sqrt(3) / sqrt(2).
  Vec3 c3 = Vec3::Zero();
  Vec2 c2 = Vec2::Zero();
  std::vector<Vec2> xn(n);
  for (std::size_t i = 0; i < n; ++i) {
    xn[i] = Vec2((corr.pts2d[i].x() - K.px) / K.f, (corr.pts2d[i].y() - K.py) / K.f);
    c3 += corr.pts3d[i];
    c2 += xn[i];
  }
  c3 /= static_cast<double>(n);
  c2 /= static_cast<double>(n);
  double d3 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d3 += (corr.pts3d[i] - c3).norm();
    d2 += (xn[i] - c2).norm();
  }
  d3 /= static_cast<double>(n);
  d2 /= static_cast<double>(n);
  if (!(d3 > 0.0) || !(d2 > 0.0)) {
    throw Error(ErrorKind::DegenerateConfiguration, "all points coincide");
  }
  const double s3 = std::sqrt(3.0) / d3;
  const double s2 = std::sqrt(2.0) / d2;

  Eigen::MatrixXd A(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 X = (corr.pts3d[i] - c3) * s3;
    const Vec2 x = (xn[i] - c2) * s2;
    const Eigen::Vector4d Xh(X.x(), X.y(), X.z(), 1.0);
    A.row(2 * i) << Xh.transpose(), Eigen::RowVector4d::Zero(), -x.x() * Xh.transpose();
    A.row(2 * i + 1) << Eigen::RowVector4d::Zero(), Xh.transpose(), -x.y() * Xh.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 12 || !(sv(10) > 0.0) || sv(0) / sv(10) > 1e12) {
    throw Error(ErrorKind::DegenerateConfiguration, "design matrix is rank deficient");
  }
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Mat34 Pn;
  Pn << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(), p.segment<4>(8).transpose();

  // Undo the normalizations: x_n = T2^-1 Pn T3 X.
  Eigen::Matrix4d T3 = Eigen::Matrix4d::Identity();
  T3.topLeftCorner<3, 3>() *= s3;
  T3.topRightCorner<3, 1>() = -s3 * c3;
  Mat3 T2inv = Mat3::Identity();
  T2inv(0, 0) = T2inv(1, 1) = 1.0 / s2;
  T2inv(0, 2) = c2.x();
  T2inv(1, 2) = c2.y();
  Mat34 P = T2inv * Pn * T3;

  // Sign: most points must have positive depth.
  int front = 0;
  for (std::size_t i = 0; i < n; ++i) {
    front += P.row(2).dot(corr.pts3d[i].homogeneous()) > 0.0 ? 1 : -1;
  }
  if (front < 0) P = -P;

  const Mat3 M = P.leftCols<3>();
  Eigen::JacobiSVD<Mat3> msvd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (msvd.matrixU() * msvd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const double scale = msvd.singularValues().sum() / 3.0;
  if (!(scale > 0.0)) throw Error(ErrorKind::DegenerateConfiguration, "zero projection scale");
  Pose pose;
  pose.R = msvd.matrixU() * D * msvd.matrixV().transpose();
  pose.t = P.col(3) / scale;
  if (!pose.R.allFinite() || !pose.t.allFinite()) {
    throw Error(ErrorKind::DegenerateConfiguration, "non-finite DLT solution");
  }
  return pose;
}

Pose pnp_planar(const CorrSet& corr, const CameraIntrinsics& K) {
  corr.validate(4);
  const std::size_t n = corr.size();

  // Best-fit plane of the model points; coordinates within it feed a homography.
  Vec3 c3 = Vec3::Zero();
  for (const Vec3& p : corr.pts3d) c3 += p;
  c3 /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : corr.pts3d) cov += (p - c3) * (p - c3).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev(1) > 1e-18 * ev(2))) throw Error(ErrorKind::DegenerateConfiguration, "points are collinear");
  Mat3 B;
  B.col(0) = eig.eigenvectors().col(2);
  B.col(1) = eig.eigenvectors().col(1);
  B.col(2) = B.col(0).cross(B.col(1));

  std::vector<Vec2> q(n), x(n);
  Vec2 cq = Vec2::Zero(), cx = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 local = B.transpose() * (corr.pts3d[i] - c3);
    q[i] = local.head<2>();
    x[i] = Vec2((corr.pts2d[i].x() - K.px) / K.f, (corr.pts2d[i].y() - K.py) / K.f);
    cq += q[i];
    cx += x[i];
  }
  cq /= static_cast<double>(n);
  cx /= static_cast<double>(n);
  double dq = 0.0, dx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dq += (q[i] - cq).norm();
    dx += (x[i] - cx).norm();
  }
  dq /= static_cast<double>(n);
  dx /= static_cast<double>(n);
  if (!(dq > 0.0) || !(dx > 0.0)) throw Error(ErrorKind::DegenerateConfiguration, "all points coincide");
  const double sq = std::sqrt(2.0) / dq, sx = std::sqrt(2.0) / dx;

  Eigen::MatrixXd A(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::RowVector3d Q((q[i].x() - cq.x()) * sq, (q[i].y() - cq.y()) * sq, 1.0);
    const Vec2 X = (x[i] - cx) * sx;
    A.row(2 * i) << Q, Eigen::RowVector3d::Zero(), -X.x() * Q;
    A.row(2 * i + 1) << Eigen::RowVector3d::Zero(), Q, -X.y() * Q;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() < 9 || !(sv(7) > 0.0) || sv(0) / sv(7) > 1e12) {
    throw Error(ErrorKind::DegenerateConfiguration, "homography is rank deficient");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 Hn;
  Hn << h.segment<3>(0).transpose(), h.segment<3>(3).transpose(), h.segment<3>(6).transpose();
  Mat3 Tq = Mat3::Identity(), Txinv = Mat3::Identity();
  Tq(0, 0) = Tq(1, 1) = sq;
  Tq(0, 2) = -sq * cq.x();
  Tq(1, 2) = -sq * cq.y();
  Txinv(0, 0) = Txinv(1, 1) = 1.0 / sx;
  Txinv(0, 2) = cx.x();
  Txinv(1, 2) = cx.y();
  Mat3 H = Txinv * Hn * Tq;

  // H ∝ [r1 r2 t] in plane coordinates; the plane sits in front of the camera.
  const double lambda = 0.5 * (H.col(0).norm() + H.col(1).norm());
  if (!(lambda > 0.0)) throw Error(ErrorKind::DegenerateConfiguration, "degenerate homography");
  H /= lambda;
  if (H(2, 2) < 0.0) H = -H;
  Mat3 Rp;
  Rp.col(0) = H.col(0);
  Rp.col(1) = H.col(1);
  Rp.col(2) = H.col(0).cross(H.col(1));
  Eigen::JacobiSVD<Mat3> rsvd(Rp, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (rsvd.matrixU() * rsvd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Rp = rsvd.matrixU() * D * rsvd.matrixV().transpose();

  Pose pose;
  pose.R = Rp * B.transpose();
  pose.t = H.col(2) - pose.R * c3;
  if (!pose.R.allFinite() || !pose.t.allFinite()) {
    throw Error(ErrorKind::DegenerateConfiguration, "non-finite planar solution");
  }
  return pose;
}

Pose pnp_refine_lm(const CorrSet& corr, const CameraIntrinsics& K, const Pose& init, int max_iters,
                   double tol, LmReport* report) {
  corr.validate(3);
  Pose pose = init;
  double cost = sum_squared_error(corr, K, pose);
  if (!std::isfinite(cost)) throw Error(ErrorKind::NonFiniteResidual, "initial residual is not finite");
  LmReport rep;
  rep.initial_cost = cost;
  double lambda = 1e-3;
  for (int iter = 0; iter < max_iters; ++iter) {
    Mat6 H = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const Vec3 Rp = pose.R * corr.pts3d[i];
      const Vec3 X = Rp + pose.t;
      const double iz = 1.0 / X.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << K.f * iz, 0.0, -K.f * X.x() * iz * iz, 0.0, K.f * iz, -K.f * X.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dX;
      dX.leftCols<3>() = -skew(Rp);
      dX.rightCols<3>() = Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> J = dproj * dX;
      const Vec2 r(K.f * X.x() * iz + K.px - corr.pts2d[i].x(), K.f * X.y() * iz + K.py - corr.pts2d[i].y());
      H.noalias() += J.transpose() * J;
      g.noalias() += J.transpose() * r;
    }
    bool accepted = false;
    while (!accepted) {
      Mat6 A = H;
      A.diagonal() += lambda * H.diagonal().cwiseMax(1e-12);
      const Vec6 delta = A.ldlt().solve(-g);
      if (!delta.allFinite()) throw Error(ErrorKind::NonFiniteResidual, "LM step is not finite");
      if (delta.norm() < tol) {
        rep.converged = true;
        break;
      }
      Pose cand;
      cand.R = axis_angle_to_matrix(delta.head<3>()) * pose.R;
      cand.t = pose.t + delta.tail<3>();
      const double cand_cost = sum_squared_error(corr, K, cand);
      if (cand_cost < cost) {
        pose = cand;
        cost = cand_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        ++rep.iterations;
        rep.accepted_costs.push_back(cost);
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          rep.converged = true;
          break;
        }
      }
    }
    if (rep.converged) break;
  }
  rep.final_cost = cost;
  if (report) *report = rep;
  return pose;
}

std::vector<double> score_hypotheses(const CorrSet& corr, const CameraIntrinsics& K,
                                              std::span<const Pose> hypotheses, double inlier_px) {
  std::vector<double> scores(hypotheses.size());
  const auto count = static_cast<std::ptrdiff_t>(hypotheses.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t h = 0; h < count; ++h) {
    scores[h] = msac_score(corr, K, hypotheses[h], inlier_px);
  }
  return scores;
}

std::vector<double> reprojection_errors(const CorrSet& corr, const CameraIntrinsics& K, const Pose& pose) {
  std::vector<double> errs(corr.size());
  for (std::size_t i = 0; i < corr.size(); ++i) errs[i] = point_error(corr.pts3d[i], corr.pts2d[i], pose, K);
  return errs;
}

double reprojection_rmse(const CorrSet& corr, const CameraIntrinsics& K, const Pose& pose) {
  corr.validate(1);
  double sum = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 X = pose.apply(corr.pts3d[i]);
    if (!(X.z() > 1e-9)) throw Error(ErrorKind::PointBehindCamera, "point is behind the camera");
    const double e = point_error(corr.pts3d[i], corr.pts2d[i], pose, K);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(corr.size()));
}

namespace {

std::vector<std::uint32_t> inlier_indices(const std::vector<double>& errs, double inlier_px) {
  std::vector<std::uint32_t> idx;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    if (errs[i] < inlier_px) idx.push_back(static_cast<std::uint32_t>(i));
  }
  return idx;
}

}  // namespace

PnPResult pnp_ransac(const CorrSet& corr, const CameraIntrinsics& K, const RansacOptions& opts) {
  corr.validate(kMinimalSample);
  const std::size_t n = corr.size();
  const int iters = std::max(1, opts.max_iters);

  // Samples are drawn serially so the hypothesis set depends only on the seed.
  Rng rng(opts.seed);
  std::vector<std::array<std::uint32_t, kMinimalSample>> samples(static_cast<std::size_t>(iters));
  for (auto& s : samples) {
    for (int k = 0; k < kMinimalSample; ++k) {
      std::uint32_t idx;
      do {
        idx = static_cast<std::uint32_t>(uniform_index(rng, n));
      } while (std::find(s.begin(), s.begin() + k, idx) != s.begin() + k);
      s[k] = idx;
    }
  }

  // Two hypotheses per sample: general DLT (even index) and the planar solver (odd index), which
  // stays well-conditioned when the sample lies close to a plane.
  std::vector<Pose> hypotheses(2 * samples.size());
  std::vector<std::uint8_t> ok(hypotheses.size(), 0);
  const auto count = static_cast<std::ptrdiff_t>(hypotheses.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t h = 0; h < count; ++h) {
    try {
      const CorrSet sample = corr.subset(samples[h / 2]);
      hypotheses[h] = h % 2 == 0 ? pnp_dlt(sample, K) : pnp_planar(sample, K);
      ok[h] = 1;
    } catch (const Error&) {
      ok[h] = 0;
    }
  }
  const auto scores = score_hypotheses(corr, K, hypotheses, opts.inlier_px);

  // Rank by (score, hypothesis index).
  std::vector<std::ptrdiff_t> ranked;
  for (std::ptrdiff_t h = 0; h < count; ++h) {
    if (ok[h]) ranked.push_back(h);
  }
  if (ranked.empty()) throw Error(ErrorKind::NoConsensus, "no non-degenerate minimal sample");
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::ptrdiff_t a, std::ptrdiff_t b) { return scores[a] < scores[b]; });

  // Local optimization of the leading hypotheses: six-point DLT on thin tools is noisy, so each
  // is re-fit on its consensus set under a threshold shrinking towards inlier_px.
  const auto top = static_cast<std::ptrdiff_t>(std::min<std::size_t>(ranked.size(), std::max(0, opts.lo_top_k)));
  std::vector<Pose> polished(static_cast<std::size_t>(top));
  std::vector<double> polished_score(static_cast<std::size_t>(top));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t r = 0; r < top; ++r) {
    Pose p = hypotheses[ranked[r]];
    for (int step = 0; step < opts.lo_steps; ++step) {
      const double frac = opts.lo_steps > 1 ? static_cast<double>(step) / (opts.lo_steps - 1) : 1.0;
      const double thr = opts.inlier_px * std::pow(opts.lo_start_factor, 1.0 - frac);
      const auto inl = inlier_indices(reprojection_errors(corr, K, p), thr);
      if (inl.size() < kMinimalSample) break;
      try {
        p = pnp_refine_lm(corr.subset(inl), K, p, opts.lo_lm_iters, opts.lm_tol);
      } catch (const Error&) {
        break;
      }
    }
    polished[r] = p;
    polished_score[r] = detail::msac_score(corr, K, p, opts.inlier_px);
  }

  Pose pose = hypotheses[ranked.front()];
  double best_score = scores[ranked.front()];
  for (std::ptrdiff_t r = 0; r < top; ++r) {
    if (polished_score[r] < best_score) {
      best_score = polished_score[r];
      pose = polished[r];
    }
  }
  auto inliers = inlier_indices(reprojection_errors(corr, K, pose), opts.inlier_px);
  const auto min_inliers = static_cast<std::size_t>(std::ceil(opts.min_inlier_ratio * n));
  if (inliers.size() < std::max<std::size_t>(min_inliers, kMinimalSample)) {
    throw Error(ErrorKind::NoConsensus, "best hypothesis explains too few correspondences");
  }

  PnPResult res;
  for (int round = 0; round < 3; ++round) {
    LmReport rep;
    pose = pnp_refine_lm(corr.subset(inliers), K, pose, opts.lm_max_iters, opts.lm_tol, &rep);
    res.converged = rep.converged;
    auto next = inlier_indices(reprojection_errors(corr, K, pose), opts.inlier_px);
    if (next == inliers) break;
    if (next.size() < kMinimalSample) break;
    inliers = std::move(next);
  }

  const auto errs = reprojection_errors(corr, K, pose);
  res.pose = pose;
  res.inliers.assign(n, 0);
  double err_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (errs[i] < opts.inlier_px) {
      res.inliers[i] = 1;
      ++res.inlier_count;
      err_sum += errs[i];
    }
  }
  res.outlier_count = static_cast<int>(n) - res.inlier_count;
  res.mean_reproj_err = res.inlier_count > 0 ? err_sum / res.inlier_count : 0.0;
  if (res.inlier_count < static_cast<int>(std::max<std::size_t>(min_inliers, 1))) {
    throw Error(ErrorKind::NoConsensus, "refined pose lost its consensus set");
  }
  return res;
}

}  // namespace toolpose
