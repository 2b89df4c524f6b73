#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include "support.hpp"
#include "toolpose/eval.hpp"
#include "toolpose/reference.hpp"

using namespace toolpose;

namespace {

MaskImage rect(int w, int h, int x0, int y0, int x1, int y1) {
  MaskImage m(w, h);
  for (int r = std::max(0, y0); r < std::min(h, y1); ++r)
    for (int c = std::max(0, x0); c < std::min(w, x1); ++c) m.at(r, c) = 1;
  return m;
}

MaskImage disc(int w, int h, double cx, double cy, double rad) {
  MaskImage m(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (std::hypot(c + 0.5 - cx, r + 0.5 - cy) <= rad) m.at(r, c) = 1;
  return m;
}

FrameAnnotation annotate(int frame, int cls, const MaskImage& tool, const MaskImage& hand) {
  FrameAnnotation a;
  a.frame_id = frame;
  a.tool_masks[cls] = tool;
  a.hand_mask = hand;
  return a;
}

PredictionRecord mask_pred(int frame, int cls, double conf, const MaskImage& m) {
  PredictionRecord p;
  p.frame_id = frame;
  p.class_id = cls;
  p.confidence = conf;
  p.reproj_mask = m;
  return p;
}

// Rounds half away from zero at three decimals, as tables are printed.
double round3(double x) { return std::floor(x * 1000.0 + 0.5) / 1000.0; }

}  // namespace

TEST_CASE("threshold list") {
  const double expected[] = {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
  REQUIRE(kIouThresholds.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(kIouThresholds[i] == expected[i]);
}

TEST_CASE("mean AP matches the published table arithmetic") {
  const double t1[] = {0.784, 0.805};
  CHECK(std::abs(mean_ap(t1) - 0.7945) < 1e-12);
  CHECK(round3(mean_ap(t1)) == doctest::Approx(0.795).epsilon(1e-12));
  const double t2[] = {0.841, 0.877};
  CHECK(round3(mean_ap(t2)) == doctest::Approx(0.859).epsilon(1e-12));
  const double one[] = {0.42};
  CHECK(mean_ap(one) == 0.42);
}

TEST_CASE("occlusion subtraction") {
  const MaskImage tool = rect(50, 50, 10, 10, 30, 30);
  const MaskImage none(50, 50);
  CHECK(occlusion_subtract(tool, none) == tool);
  CHECK(occlusion_subtract(tool, rect(50, 50, 5, 5, 35, 35)).empty());
  const MaskImage hand = rect(50, 50, 20, 0, 50, 50);
  CHECK(mask_and(occlusion_subtract(tool, hand), hand).empty());
}

TEST_CASE("mask IoU") {
  const MaskImage a = rect(300, 200, 0, 0, 100, 100);
  CHECK(mask_iou(a, a) == 1.0);
  CHECK(mask_iou(a, rect(300, 200, 150, 0, 250, 100)) == 0.0);
  CHECK(mask_iou(a, rect(300, 200, 50, 0, 150, 100)) == doctest::Approx(5000.0 / 15000.0).epsilon(1e-15));
  CHECK(mask_iou(MaskImage(10, 10), MaskImage(10, 10)) == 1.0);
  CHECK(testing::error_kind_of([&] { mask_iou(a, MaskImage(10, 10)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("visibility fraction") {
  const MaskImage sq = rect(64, 64, 0, 0, 40, 40);
  CHECK(visibility_fraction(sq, sq) == 1.0);
  CHECK(visibility_fraction(rect(64, 64, 0, 0, 20, 40), sq) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(visibility_fraction(MaskImage(64, 64), MaskImage(64, 64)) == 0.0);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    MaskImage a(16, 16), b(16, 16);
    for (auto& v : a.data) v = uniform01(rng) < 0.5;
    for (auto& v : b.data) v = uniform01(rng) < 0.5;
    const double f = visibility_fraction(a, b);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("AP edge cases") {
  const MaskImage gt = rect(200, 200, 50, 50, 150, 150);
  const std::vector<FrameAnnotation> anns = {annotate(0, 0, gt, MaskImage(200, 200))};

  const std::vector<PredictionRecord> perfect = {mask_pred(0, 0, 0.9, gt)};
  CHECK(ap_over_thresholds(perfect, anns, 0) == doctest::Approx(1.0));
  CHECK(ap_over_thresholds(std::vector<PredictionRecord>{}, anns, 0) == 0.0);

  // 72 of the 100 columns: IoU 7200/10000, above thresholds 0.5 through 0.7 only.
  const MaskImage part = rect(200, 200, 50, 50, 122, 150);
  REQUIRE(mask_iou(part, gt) == doctest::Approx(0.72).epsilon(1e-15));
  const std::vector<PredictionRecord> one = {mask_pred(0, 0, 0.8, part)};
  CHECK(ap_over_thresholds(one, anns, 0) == doctest::Approx(0.5).epsilon(1e-15));

  CHECK(testing::error_kind_of([&] { ap_over_thresholds(perfect, anns, 1); }) == ErrorKind::NoAnnotations);
}

TEST_CASE("hand masks are removed from both sides") {
  const MaskImage gt = rect(200, 200, 50, 50, 150, 150);
  const MaskImage hand = rect(200, 200, 100, 0, 200, 200);
  // Disagrees with the ground truth only under the hand.
  const MaskImage pred = rect(200, 200, 50, 50, 190, 150);
  const std::vector<PredictionRecord> preds = {mask_pred(0, 0, 0.9, pred)};
  CHECK(ap_over_thresholds(preds, std::vector{annotate(0, 0, gt, hand)}, 0) == doctest::Approx(1.0));
  CHECK(ap_over_thresholds(preds, std::vector{annotate(0, 0, gt, MaskImage(200, 200))}, 0) < 1.0);

  // Empty hand mask reproduces plain mask AP.
  const std::vector<FrameAnnotation> plain = {annotate(0, 0, gt, MaskImage(200, 200))};
  const std::vector<FrameAnnotation> no_hand = {annotate(0, 0, gt, MaskImage())};
  CHECK(ap_over_thresholds(preds, plain, 0) == ap_over_thresholds(preds, no_hand, 0));
}

TEST_CASE("barely visible ground truth is excluded and its matches ignored") {
  const MaskImage amodal = rect(100, 100, 10, 10, 60, 60);
  const MaskImage sliver = rect(100, 100, 10, 10, 60, 12);  // 4% visible
  FrameAnnotation good = annotate(0, 0, amodal, MaskImage(100, 100));
  FrameAnnotation hidden = annotate(1, 0, sliver, MaskImage(100, 100));
  hidden.gt_visible_masks[0] = sliver;
  hidden.gt_amodal_masks[0] = amodal;
  CHECK(hidden.visibility(0) == doctest::Approx(0.04));
  const std::vector<FrameAnnotation> anns = {good, hidden};
  const std::vector<PredictionRecord> preds = {mask_pred(1, 0, 0.95, sliver), mask_pred(0, 0, 0.5, amodal)};
  CHECK(ap_over_thresholds(preds, anns, 0) == doctest::Approx(1.0));

  // The same prediction against a countable ground truth elsewhere is a false positive.
  const std::vector<PredictionRecord> stray = {mask_pred(0, 0, 0.95, sliver), mask_pred(0, 0, 0.5, amodal)};
  CHECK(ap_over_thresholds(stray, anns, 0) < 1.0);

  const std::vector<FrameAnnotation> only_hidden = {hidden};
  CHECK(testing::error_kind_of([&] { ap_over_thresholds(preds, only_hidden, 0); }) == ErrorKind::NoAnnotations);
}

TEST_CASE("AP does not increase under erosion of predictions") {
  Rng rng(3);
  std::vector<FrameAnnotation> anns;
  std::vector<MaskImage> base;
  for (int f = 0; f < 12; ++f) {
    const double cx = uniform(rng, 40, 88), cy = uniform(rng, 40, 88), rad = uniform(rng, 12, 30);
    anns.push_back(annotate(f, 0, disc(128, 128, cx, cy, rad), rect(128, 128, 0, 0, static_cast<int>(uniform(rng, 0, 50)), 128)));
    base.push_back(disc(128, 128, cx + uniform(rng, -2, 2), cy + uniform(rng, -2, 2), rad + uniform(rng, -2, 2)));
  }
  double last = 2.0;
  for (int radius = 0; radius <= 3; ++radius) {
    std::vector<PredictionRecord> preds;
    for (int f = 0; f < 12; ++f) preds.push_back(mask_pred(f, 0, 0.5 + 0.04 * f, erode(base[f], radius)));
    const double ap = ap_over_thresholds(preds, anns, 0);
    CHECK(ap >= 0.0);
    CHECK(ap <= last);
    last = ap;
  }
  CHECK(last < 1.0);
}

TEST_CASE("pose AP report averages classes") {
  const MaskImage a = rect(64, 64, 0, 0, 32, 32), b = rect(64, 64, 32, 32, 64, 64);
  FrameAnnotation ann = annotate(0, 0, a, MaskImage(64, 64));
  ann.tool_masks[1] = b;
  const std::vector<FrameAnnotation> anns = {ann};
  const std::vector<PredictionRecord> preds = {mask_pred(0, 0, 0.9, a), mask_pred(0, 1, 0.9, rect(64, 64, 32, 32, 64, 55))};
  const APReport rep = pose_ap_report(preds, anns);
  REQUIRE(rep.per_class_ap.size() == 2);
  CHECK(rep.per_class_ap.at(0) == doctest::Approx(1.0));
  // IoU 23/32 = 0.71875 clears five thresholds.
  CHECK(rep.per_class_ap.at(1) == doctest::Approx(0.5));
  CHECK(rep.mean_ap == doctest::Approx(0.75));
  CHECK(rep.thresholds.size() == 10);
}

TEST_CASE("detection AP") {
  std::vector<GtBox> gts;
  std::vector<PredictionRecord> perfect, shifted, half;
  for (int f = 0; f < 5; ++f) {
    const BBox box{100.0 + 10 * f, 100, 40, 30};
    gts.push_back({f, 0, box, 1.0});
    PredictionRecord p;
    p.frame_id = f;
    p.class_id = 0;
    p.confidence = 0.9;
    p.bbox = box;
    perfect.push_back(p);
    p.bbox = BBox{box.cx + box.w, box.cy, box.w, box.h};
    shifted.push_back(p);
    p.bbox = BBox{box.cx + box.w / 2, box.cy, box.w, box.h};
    half.push_back(p);
  }
  CHECK(detection_ap(perfect, gts).mean_ap == doctest::Approx(1.0));
  CHECK(detection_ap(shifted, gts).mean_ap == 0.0);
  CHECK(bbox_iou(*half[0].bbox, gts[0].bbox) == doctest::Approx(1.0 / 3.0));
  CHECK(detection_ap(half, gts).mean_ap == 0.0);
}

TEST_CASE("interpolated AP on a known ranking") {
  // TP, FP, TP over two ground truths: precision 1 up to recall 0.5, then 2/3 up to recall 1.
  const std::uint8_t tp[] = {1, 0, 1};
  CHECK(interpolated_ap(tp, 2) == doctest::Approx((51 * 1.0 + 50 * (2.0 / 3.0)) / 101.0).epsilon(1e-15));
}

TEST_CASE("parallel mask IoU batch matches the serial reference") {
  Rng rng(9);
  std::vector<MaskImage> a, b;
  for (int i = 0; i < 64; ++i) {
    a.push_back(disc(96, 96, uniform(rng, 20, 76), uniform(rng, 20, 76), uniform(rng, 5, 30)));
    b.push_back(disc(96, 96, uniform(rng, 20, 76), uniform(rng, 20, 76), uniform(rng, 5, 30)));
  }
  std::vector<const MaskImage*> pa, pb;
  for (int i = 0; i < 64; ++i) {
    pa.push_back(&a[i]);
    pb.push_back(&b[i]);
  }
  const auto ref = reference::mask_iou_batch(pa, pb);
  for (int threads : {1, 2, 8}) {
    omp_set_num_threads(threads);
    CHECK(mask_iou_batch(pa, pb) == ref);
  }
  omp_set_num_threads(omp_get_num_procs());
}
