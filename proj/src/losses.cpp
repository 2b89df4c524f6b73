#include "toolpose/losses.hpp"

#include <algorithm>
#include <cmath>

#include "toolpose/error.hpp"

namespace toolpose {

namespace {

// Subgradient of |x|, 0 at the kink.
double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_soft(const DoubleImage& img, const MaskImage& like, int channels) {
  if (img.width != like.width || img.height != like.height || img.channels != channels) {
    throw Error(ErrorKind::ShapeMismatch, "prediction and ground-truth shapes differ");
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(pose >= 0.0 && geom >= 0.0 && cat >= 0.0 && art >= 0.0)) {
    throw Error(ErrorKind::ConfigError, "loss weights must be nonnegative");
  }
}

LossValue loss_rotation(const Mat3& R_pred, const Mat3& R_gt, std::span<const Vec3> pts) {
  if (pts.empty()) throw Error(ErrorKind::ConfigError, "rotation loss needs at least one point");
  LossValue out{0.0, std::vector<double>(9, 0.0)};
  const double inv_n = 1.0 / static_cast<double>(pts.size());
  for (const Vec3& p : pts) {
    const Vec3 d = R_pred * p - R_gt * p;
    out.value += d.cwiseAbs().sum();
    for (int j = 0; j < 3; ++j) {
      const double s = sgn(d[j]);
      for (int k = 0; k < 3; ++k) out.grad[3 * j + k] += s * p[k] * inv_n;
    }
  }
  out.value *= inv_n;
  return out;
}

LossValue loss_center(const Vec2& pred, const Vec2& gt) {
  const Vec2 d = pred - gt;
  return {std::abs(d.x()) + std::abs(d.y()), {sgn(d.x()), sgn(d.y())}};
}

LossValue loss_depth(double pred, double gt) { return {std::abs(pred - gt), {sgn(pred - gt)}}; }

LossValue loss_articulation(double pred, double gt) { return {std::abs(pred - gt), {sgn(pred - gt)}}; }

LossValue loss_mask(const DoubleImage& vis_pred, const DoubleImage& full_pred, const MaskImage& vis_gt,
                    const MaskImage& full_gt) {
  check_soft(vis_pred, vis_gt, 1);
  check_soft(full_pred, full_gt, 1);
  check_same_shape(vis_gt, full_gt);
  const std::size_t n = vis_gt.data.size();
  if (n == 0) throw Error(ErrorKind::EmptyMask, "mask has no pixels");
  const double inv_n = 1.0 / static_cast<double>(n);
  LossValue out{0.0, std::vector<double>(2 * n, 0.0)};
  double vis = 0.0, full = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dv = vis_pred.data[i] - static_cast<double>(vis_gt.data[i]);
    const double df = full_pred.data[i] - static_cast<double>(full_gt.data[i]);
    vis += std::abs(dv);
    full += std::abs(df);
    out.grad[i] = sgn(dv) * inv_n;
    out.grad[n + i] = sgn(df) * inv_n;
  }
  out.value = vis * inv_n + full * inv_n;
  return out;
}

LossValue loss_corr(const DoubleImage& pred, const DoubleImage& gt, const MaskImage& vis_gt) {
  check_soft(pred, vis_gt, 3);
  check_soft(gt, vis_gt, 3);
  const std::size_t visible = vis_gt.count();
  if (visible == 0) throw Error(ErrorKind::EmptyMask, "no visible ground-truth pixel");
  const double inv = 1.0 / static_cast<double>(visible);
  LossValue out{0.0, std::vector<double>(pred.data.size(), 0.0)};
  for (std::size_t i = 0; i < vis_gt.data.size(); ++i) {
    if (!vis_gt.data[i]) continue;
    for (int ch = 0; ch < 3; ++ch) {
      const std::size_t k = 3 * i + ch;
      const double d = pred.data[k] - gt.data[k];
      out.value += std::abs(d);
      out.grad[k] = sgn(d) * inv;
    }
  }
  out.value *= inv;
  return out;
}

LossValue loss_category(std::span<const double> logits, int cls) {
  if (cls < 0 || static_cast<std::size_t>(cls) >= logits.size()) {
    throw Error(ErrorKind::ConfigError, "class index out of range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = m + std::log(z);
  LossValue out{log_z - logits[cls], std::vector<double>(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.grad[i] = std::exp(logits[i] - log_z) - (static_cast<int>(i) == cls ? 1.0 : 0.0);
  }
  if (logits[cls] >= m) {
    // Near-certain predictions: log_z − l_c cancels catastrophically; log1p does not.
    double rest = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (static_cast<int>(i) != cls) rest += std::exp(logits[i] - logits[cls]);
    }
    out.value = std::log1p(rest);
  }
  return out;
}

LossBreakdown loss_total(const PosePrediction& pred, const GroundTruth& gt, const LossWeights& w,
                         std::span<const Vec3> pts) {
  w.validate();
  LossBreakdown b;
  b.rotation = loss_rotation(rot6d_to_matrix(pred.rot6d), gt.R, pts).value;
  b.center = loss_center(Vec2(pred.site.dx, pred.site.dy), Vec2(gt.site.dx, gt.site.dy)).value;
  b.depth = loss_depth(pred.site.dz, gt.site.dz).value;
  b.mask = loss_mask(pred.mask_vis, pred.mask_full, gt.mask_vis, gt.mask_full).value;
  b.corr = loss_corr(pred.corr, gt.corr, gt.mask_vis).value;
  b.articulation = loss_articulation(pred.articulation, gt.articulation).value;
  b.category = loss_category(pred.class_logits, gt.class_id).value;
  b.pose_term = w.pose * (b.rotation + b.center + b.depth);
  b.geom_term = w.geom * (b.corr + b.mask);
  b.cat_term = w.cat * b.category;
  b.art_term = w.art * b.articulation;
  b.total = b.pose_term + b.geom_term + b.cat_term + b.art_term;
  return b;
}

}  // namespace toolpose
