#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "toolpose/image.hpp"
#include "toolpose/mesh.hpp"

namespace toolpose {

/// A posed mesh. The mesh must outlive the render call.
struct SceneObject {
  const TriMesh* mesh = nullptr;
  Pose pose;
};

/// Maps output pixel (r, c) to the image point (x0 + (c + 0.5)·sx, y0 + (r + 0.5)·sy).
struct Viewport {
  double x0 = 0.0;
  double y0 = 0.0;
  double sx = 1.0;
  double sy = 1.0;
  int width = 0;
  int height = 0;
  // Samples whose image point falls outside [0, clip_w) × [0, clip_h) stay empty; 0 disables.
  int clip_w = 0;
  int clip_h = 0;

  static Viewport full_image(int width, int height);
  static Viewport crop(const BBox& crop, int out_size, int image_w, int image_h);
};

/// Per-pixel nearest fragment. `object` is -1 where nothing was hit.
struct FrameBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::int32_t> object;
  std::vector<std::uint32_t> triangle;
  std::vector<std::array<double, 3>> bary;  // perspective-correct

  FrameBuffer(int w, int h);
  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * width + c; }
  bool operator==(const FrameBuffer&) const = default;
};

inline constexpr double kNearPlane = 1e-6;

/// Z-buffered rasterization, parallel over row tiles. Triangles with a vertex closer than
/// kNearPlane are skipped. Throws EmptyRender when no triangle lies in front of the camera.
FrameBuffer rasterize(std::span<const SceneObject> objects, const CameraIntrinsics& K,
                      const Viewport& vp);

struct SceneRender {
  DepthMap depth;
  std::vector<MaskImage> visible;
};

SceneRender rasterize_scene(std::span<const SceneObject> objects, const CameraIntrinsics& K,
                            int width, int height);

/// Full silhouette of one mesh; throws EmptyRender when it covers no pixel.
MaskImage render_amodal(const TriMesh& mesh, const Pose& pose, const CameraIntrinsics& K,
                        int width, int height);

/// Dense normalized-coordinate map over `crop` resampled to out_size², with `occluders`
/// hiding the target where they are nearer.
CorrespondenceMap render_correspondence(const TriMesh& mesh, std::span<const Vec3> normalized_coords,
                                        const Pose& pose, const CameraIntrinsics& K,
                                        const BBox& crop, int out_size,
                                        std::span<const SceneObject> occluders = {});

inline constexpr int kDefaultMapSize = 64;

}  // namespace toolpose
