#include "toolpose/eval.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "toolpose/error.hpp"

namespace toolpose {

namespace {

// IoUs of one prediction against the ground truth of its frame.
struct Candidate {
  std::vector<std::pair<std::size_t, double>> valid;  // (ground-truth id, IoU), ids ascending
  std::vector<double> ignored;
};

double ap_from_candidates(const std::vector<Candidate>& cands, std::size_t num_valid,
                          std::span<const double> thresholds) {
  if (thresholds.empty()) throw Error(ErrorKind::ConfigError, "no IoU thresholds");
  double sum = 0.0;
  for (const double tau : thresholds) {
    std::vector<std::uint8_t> matched(num_valid, 0);
    std::vector<std::uint8_t> tp;
    tp.reserve(cands.size());
    for (const Candidate& c : cands) {
      std::ptrdiff_t best = -1;
      double best_iou = 0.0;
      for (const auto& [gt, iou] : c.valid) {
        if (matched[gt] || iou < tau) continue;
        if (best < 0 || iou > best_iou) {
          best = static_cast<std::ptrdiff_t>(gt);
          best_iou = iou;
        }
      }
      if (best >= 0) {
        matched[best] = 1;
        tp.push_back(1);
        continue;
      }
      const bool hits_ignored =
          std::any_of(c.ignored.begin(), c.ignored.end(), [tau](double iou) { return iou >= tau; });
      if (!hits_ignored) tp.push_back(0);
    }
    sum += interpolated_ap(tp, num_valid);
  }
  return sum / static_cast<double>(thresholds.size());
}

std::vector<std::size_t> confidence_order(std::span<const PredictionRecord> preds, int class_id) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].class_id != class_id) continue;
    if (!(preds[i].confidence >= 0.0 && preds[i].confidence <= 1.0)) {
      throw Error(ErrorKind::ConfigError, "prediction confidence outside [0,1]");
    }
    order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].confidence > preds[b].confidence; });
  return order;
}

}  // namespace

double FrameAnnotation::visibility(int class_id) const {
  auto v = gt_visible_masks.find(class_id);
  auto a = gt_amodal_masks.find(class_id);
  if (v == gt_visible_masks.end() || a == gt_amodal_masks.end()) return 1.0;
  return visibility_fraction(v->second, a->second);
}

MaskImage occlusion_subtract(const MaskImage& tool, const MaskImage& hand) {
  if (hand.data.empty()) return tool;
  return mask_and_not(tool, hand);
}

double mask_iou(const MaskImage& a, const MaskImage& b) {
  check_same_shape(a, b);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    inter += a.data[i] & b.data[i];
    uni += a.data[i] | b.data[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> mask_iou_batch(std::span<const MaskImage* const> a, std::span<const MaskImage* const> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "pair lists differ in length");
  std::vector<double> out(a.size());
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = mask_iou(*a[i], *b[i]);
  return out;
}

double visibility_fraction(const MaskImage& gt_visible, const MaskImage& gt_amodal) {
  check_same_shape(gt_visible, gt_amodal);
  const std::size_t amodal = gt_amodal.count();
  if (amodal == 0) return 0.0;
  std::size_t vis = 0;
  for (std::size_t i = 0; i < gt_visible.data.size(); ++i) vis += gt_visible.data[i] & gt_amodal.data[i];
  return static_cast<double>(vis) / static_cast<double>(amodal);
}

double interpolated_ap(std::span<const std::uint8_t> tp, std::size_t num_gt) {
  if (num_gt == 0) throw Error(ErrorKind::NoAnnotations, "no ground truth to recall");
  if (tp.empty()) return 0.0;
  std::vector<double> recall(tp.size()), precision(tp.size());
  std::size_t tps = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    tps += tp[i];
    recall[i] = static_cast<double>(tps) / static_cast<double>(num_gt);
    precision[i] = static_cast<double>(tps) / static_cast<double>(i + 1);
  }
  for (std::size_t i = tp.size() - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

double ap_over_thresholds(std::span<const PredictionRecord> predictions,
                          std::span<const FrameAnnotation> annotations, int class_id,
                          std::span<const double> thresholds) {
  struct GtEntry {
    int frame_id;
    MaskImage mask;
    bool valid;
    std::size_t id;  // index among valid entries
  };
  std::vector<GtEntry> gts;
  std::unordered_map<int, std::size_t> frame_index;
  std::size_t num_valid = 0;
  for (std::size_t f = 0; f < annotations.size(); ++f) {
    const FrameAnnotation& ann = annotations[f];
    frame_index.emplace(ann.frame_id, f);
    auto it = ann.tool_masks.find(class_id);
    if (it == ann.tool_masks.end()) continue;
    const bool valid = ann.visibility(class_id) >= kMinVisibility;
    gts.push_back({ann.frame_id, occlusion_subtract(it->second, ann.hand_mask), valid, valid ? num_valid : 0});
    if (valid) ++num_valid;
  }
  if (num_valid == 0) {
    throw Error(ErrorKind::NoAnnotations, "no countable annotation for class " + std::to_string(class_id));
  }
  std::unordered_map<int, std::vector<std::size_t>> gts_by_frame;
  for (std::size_t g = 0; g < gts.size(); ++g) gts_by_frame[gts[g].frame_id].push_back(g);

  const auto order = confidence_order(predictions, class_id);
  std::vector<MaskImage> pred_masks(order.size());
  std::vector<const MaskImage*> lhs, rhs;
  std::vector<std::pair<std::size_t, std::size_t>> pair_owner;  // (candidate, gt entry)
  for (std::size_t k = 0; k < order.size(); ++k) {
    const PredictionRecord& p = predictions[order[k]];
    if (!p.reproj_mask) throw Error(ErrorKind::ConfigError, "mask AP needs reprojected masks");
    auto fit = frame_index.find(p.frame_id);
    if (fit == frame_index.end()) continue;
    pred_masks[k] = occlusion_subtract(*p.reproj_mask, annotations[fit->second].hand_mask);
    for (std::size_t g : gts_by_frame[p.frame_id]) {
      lhs.push_back(&pred_masks[k]);
      rhs.push_back(&gts[g].mask);
      pair_owner.emplace_back(k, g);
    }
  }
  const auto ious = mask_iou_batch(lhs, rhs);
  std::vector<Candidate> cands(order.size());
  for (std::size_t i = 0; i < ious.size(); ++i) {
    const auto [k, g] = pair_owner[i];
    if (gts[g].valid) {
      cands[k].valid.emplace_back(gts[g].id, ious[i]);
    } else {
      cands[k].ignored.push_back(ious[i]);
    }
  }
  return ap_from_candidates(cands, num_valid, thresholds);
}

double mean_ap(std::span<const double> per_class) {
  if (per_class.empty()) throw Error(ErrorKind::NoAnnotations, "no per-class AP to average");
  return std::accumulate(per_class.begin(), per_class.end(), 0.0) / static_cast<double>(per_class.size());
}

namespace {

APReport finish_report(std::map<int, double> per_class, std::span<const double> thresholds) {
  APReport rep;
  rep.per_class_ap = std::move(per_class);
  rep.thresholds.assign(thresholds.begin(), thresholds.end());
  std::vector<double> values;
  for (const auto& [cls, ap] : rep.per_class_ap) values.push_back(ap);
  rep.mean_ap = mean_ap(values);
  return rep;
}

}  // namespace

APReport pose_ap_report(std::span<const PredictionRecord> predictions,
                        std::span<const FrameAnnotation> annotations, std::span<const double> thresholds) {
  std::set<int> classes;
  for (const auto& ann : annotations) {
    for (const auto& [cls, mask] : ann.tool_masks) {
      if (ann.visibility(cls) >= kMinVisibility) classes.insert(cls);
    }
  }
  std::map<int, double> per_class;
  for (int cls : classes) per_class[cls] = ap_over_thresholds(predictions, annotations, cls, thresholds);
  return finish_report(std::move(per_class), thresholds);
}

APReport detection_ap(std::span<const PredictionRecord> pred_boxes, std::span<const GtBox> gt_boxes,
                      std::span<const double> thresholds) {
  std::set<int> classes;
  for (const auto& g : gt_boxes) {
    if (g.visibility >= kMinVisibility) classes.insert(g.class_id);
  }
  std::map<int, double> per_class;
  for (int cls : classes) {
    std::unordered_map<int, std::vector<std::size_t>> gts_by_frame;
    std::vector<std::size_t> valid_id(gt_boxes.size(), 0);
    std::size_t num_valid = 0;
    for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
      if (gt_boxes[g].class_id != cls) continue;
      gts_by_frame[gt_boxes[g].frame_id].push_back(g);
      if (gt_boxes[g].visibility >= kMinVisibility) valid_id[g] = num_valid++;
    }
    const auto order = confidence_order(pred_boxes, cls);
    std::vector<Candidate> cands(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      const PredictionRecord& p = pred_boxes[order[k]];
      if (!p.bbox) throw Error(ErrorKind::ConfigError, "detection AP needs predicted boxes");
      for (std::size_t g : gts_by_frame[p.frame_id]) {
        const double iou = bbox_iou(*p.bbox, gt_boxes[g].bbox);
        if (gt_boxes[g].visibility >= kMinVisibility) {
          cands[k].valid.emplace_back(valid_id[g], iou);
        } else {
          cands[k].ignored.push_back(iou);
        }
      }
    }
    per_class[cls] = ap_from_candidates(cands, num_valid, thresholds);
  }
  return finish_report(std::move(per_class), thresholds);
}

}  // namespace toolpose
