#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "toolpose/camera.hpp"
#include "toolpose/image.hpp"

namespace toolpose {

/// IoU thresholds averaged into the per-object AP.
inline constexpr std::array<double, 10> kIouThresholds = {0.5,  0.55, 0.6,  0.65, 0.7,
                                                          0.75, 0.8,  0.85, 0.9,  0.95};
/// Ground truth visible below this fraction of its projected area is excluded.
inline constexpr double kMinVisibility = 0.10;

/// Annotated masks for one frame, keyed by tool class.
struct FrameAnnotation {
  int frame_id = 0;
  std::map<int, MaskImage> tool_masks;
  MaskImage hand_mask;
  std::map<int, MaskImage> gt_visible_masks;
  std::map<int, MaskImage> gt_amodal_masks;

  /// Visible/amodal pixel ratio for a class; 1 when the masks needed to compute it are absent.
  double visibility(int class_id) const;
};

struct PredictionRecord {
  int frame_id = 0;
  int class_id = 0;
  double confidence = 0.0;
  std::optional<MaskImage> reproj_mask;
  std::optional<BBox> bbox;
};

struct GtBox {
  int frame_id = 0;
  int class_id = 0;
  BBox bbox;
  double visibility = 1.0;
};

struct APReport {
  std::map<int, double> per_class_ap;
  double mean_ap = 0.0;
  std::vector<double> thresholds;
};

MaskImage occlusion_subtract(const MaskImage& tool, const MaskImage& hand);

/// |a ∩ b| / |a ∪ b|, defined as 1 when both are empty.
double mask_iou(const MaskImage& a, const MaskImage& b);

/// Elementwise IoU of (a[i], b[i]) pairs, parallel over pairs.
std::vector<double> mask_iou_batch(std::span<const MaskImage* const> a, std::span<const MaskImage* const> b);

double visibility_fraction(const MaskImage& gt_visible, const MaskImage& gt_amodal);

/// Area under the 101-point interpolated precision/recall curve. `tp` holds one flag per
/// counted detection in descending confidence order.
double interpolated_ap(std::span<const std::uint8_t> tp, std::size_t num_gt);

/// Hand-occlusion-aware mask AP for one class, averaged over `thresholds`.
double ap_over_thresholds(std::span<const PredictionRecord> predictions,
                          std::span<const FrameAnnotation> annotations, int class_id,
                          std::span<const double> thresholds = kIouThresholds);

double mean_ap(std::span<const double> per_class);

/// Mask AP for every class with at least one countable annotation.
APReport pose_ap_report(std::span<const PredictionRecord> predictions,
                        std::span<const FrameAnnotation> annotations,
                        std::span<const double> thresholds = kIouThresholds);

/// Box AP with the same matching and visibility rules.
APReport detection_ap(std::span<const PredictionRecord> pred_boxes, std::span<const GtBox> gt_boxes,
                      std::span<const double> thresholds = kIouThresholds);

}  // namespace toolpose
