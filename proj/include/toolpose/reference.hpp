#pragma once

// Serial reference implementations of the OpenMP kernels. The parallel versions must match
// these bit-for-bit; tests and the benchmark compare the two.

#include <cstdint>
#include <span>
#include <vector>

#include "toolpose/eval.hpp"
#include "toolpose/pnp.hpp"
#include "toolpose/raster.hpp"

namespace toolpose::reference {

/// Triangle-major scan: every triangle visits its own pixel bounding box.
FrameBuffer rasterize(std::span<const SceneObject> objects, const CameraIntrinsics& K,
                      const Viewport& vp);

/// Scores every hypothesis in order.
std::vector<double> score_hypotheses(const CorrSet& corr, const CameraIntrinsics& K,
                                     std::span<const Pose> hypotheses, double inlier_px);

std::vector<double> mask_iou_batch(std::span<const MaskImage* const> a,
                                   std::span<const MaskImage* const> b);

}  // namespace toolpose::reference
