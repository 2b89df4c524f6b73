#pragma once

#include <span>
#include <vector>

#include "toolpose/camera.hpp"
#include "toolpose/image.hpp"

namespace toolpose {

/// A loss value and its (sub)gradient with respect to the prediction's free entries.
struct LossValue {
  double value = 0.0;
  std::vector<double> grad;
};

/// Network-style outputs for one object crop. Masks are soft (1-channel, values in [0,1]).
struct PosePrediction {
  Rot6D rot6d;  // allocentric
  SiteParams site;
  double articulation = 0.0;
  std::vector<double> class_logits;
  DoubleImage corr;  // 3 channels
  DoubleImage mask_vis;
  DoubleImage mask_full;
};

struct GroundTruth {
  Mat3 R = Mat3::Identity();  // allocentric
  SiteParams site;
  double articulation = 0.0;
  int class_id = 0;
  DoubleImage corr;
  MaskImage mask_vis;
  MaskImage mask_full;
};

struct LossWeights {
  double pose = 1.0;
  double geom = 1.0;
  double cat = 1.0;
  double art = 1.0;

  void validate() const;
};

struct LossBreakdown {
  double rotation = 0.0;
  double center = 0.0;
  double depth = 0.0;
  double mask = 0.0;
  double corr = 0.0;
  double articulation = 0.0;
  double category = 0.0;
  // Weighted groups; total is their sum in this order.
  double pose_term = 0.0;
  double geom_term = 0.0;
  double cat_term = 0.0;
  double art_term = 0.0;
  double total = 0.0;
};

inline constexpr std::size_t kDefaultLossPoints = 1000;

/// Point-matching L1: mean over points of ‖R̂p − R̄p‖₁. Gradient over R̂ entries, row-major.
LossValue loss_rotation(const Mat3& R_pred, const Mat3& R_gt, std::span<const Vec3> pts);

/// L1 over the two SITE center offsets. Gradient over (dx, dy).
LossValue loss_center(const Vec2& pred, const Vec2& gt);

/// |δ̂z − δ̄z|.
LossValue loss_depth(double pred, double gt);

/// Mean-over-pixels L1 on visible plus amodal masks. Gradient: visible pixels, then amodal.
LossValue loss_mask(const DoubleImage& vis_pred, const DoubleImage& full_pred, const MaskImage& vis_gt,
                    const MaskImage& full_gt);

/// Channel-summed L1 at visible ground-truth pixels divided by the visible pixel count.
LossValue loss_corr(const DoubleImage& pred, const DoubleImage& gt, const MaskImage& vis_gt);

LossValue loss_articulation(double pred, double gt);

/// Cross-entropy −log softmax(logits)[cls]. Gradient over logits.
LossValue loss_category(std::span<const double> logits, int cls);

LossBreakdown loss_total(const PosePrediction& pred, const GroundTruth& gt, const LossWeights& w,
                         std::span<const Vec3> pts);

}  // namespace toolpose
