#include "toolpose/reference.hpp"

#include "pnp_detail.hpp"
#include "raster_detail.hpp"
#include "toolpose/error.hpp"

namespace toolpose::reference {

FrameBuffer rasterize(std::span<const SceneObject> objects, const CameraIntrinsics& K,
                      const Viewport& vp) {
  const auto tris = detail::prepare_triangles(objects, K, vp);
  FrameBuffer fb(vp.width, vp.height);
  for (const auto& t : tris) {
    for (int r = t.row0; r <= t.row1; ++r) {
      for (int c = t.col0; c <= t.col1; ++c) detail::shade_pixel(t, r, c, fb);
    }
  }
  detail::apply_clip(vp, fb);
  return fb;
}

std::vector<double> score_hypotheses(const CorrSet& corr, const CameraIntrinsics& K,
                                     std::span<const Pose> hypotheses, double inlier_px) {
  std::vector<double> scores;
  scores.reserve(hypotheses.size());
  for (const Pose& h : hypotheses) scores.push_back(detail::msac_score(corr, K, h, inlier_px));
  return scores;
}

std::vector<double> mask_iou_batch(std::span<const MaskImage* const> a,
                                   std::span<const MaskImage* const> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::ShapeMismatch, "pair lists differ in length");
  std::vector<double> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(mask_iou(*a[i], *b[i]));
  return out;
}

}  // namespace toolpose::reference
