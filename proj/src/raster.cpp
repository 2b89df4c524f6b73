#include "toolpose/raster.hpp"

#include <algorithm>
#include <limits>

#include "raster_detail.hpp"
#include "toolpose/error.hpp"

namespace toolpose {

namespace {

constexpr int kTileRows = 8;

}  // namespace

Viewport Viewport::full_image(int width, int height) {
  Viewport vp;
  vp.width = width;
  vp.height = height;
  return vp;
}

Viewport Viewport::crop(const BBox& crop, int out_size, int image_w, int image_h) {
  crop.validate();
  if (out_size <= 0) throw Error(ErrorKind::ConfigError, "map size must be positive");
  Viewport vp;
  vp.x0 = crop.x0();
  vp.y0 = crop.y0();
  vp.sx = crop.w / out_size;
  vp.sy = crop.h / out_size;
  vp.width = out_size;
  vp.height = out_size;
  vp.clip_w = image_w;
  vp.clip_h = image_h;
  return vp;
}

FrameBuffer::FrameBuffer(int w, int h)
    : width(w),
      height(h),
      depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()),
      object(static_cast<std::size_t>(w) * h, -1),
      triangle(static_cast<std::size_t>(w) * h, 0),
      bary(static_cast<std::size_t>(w) * h, {0.0, 0.0, 0.0}) {}

FrameBuffer rasterize(std::span<const SceneObject> objects, const CameraIntrinsics& K,
                      const Viewport& vp) {
  const auto tris = detail::prepare_triangles(objects, K, vp);
  FrameBuffer fb(vp.width, vp.height);
  const int tiles = (vp.height + kTileRows - 1) / kTileRows;
  // Each tile owns its rows and walks triangles in index order, so every pixel sees the same
  // candidate sequence as the serial triangle-major scan.
#pragma omp parallel for schedule(dynamic, 1)
  for (int tile = 0; tile < tiles; ++tile) {
    const int r_lo = tile * kTileRows;
    const int r_hi = std::min(vp.height - 1, r_lo + kTileRows - 1);
    for (const auto& t : tris) {
      const int r0 = std::max(r_lo, t.row0), r1 = std::min(r_hi, t.row1);
      for (int r = r0; r <= r1; ++r) {
        for (int c = t.col0; c <= t.col1; ++c) detail::shade_pixel(t, r, c, fb);
      }
    }
  }
  detail::apply_clip(vp, fb);
  return fb;
}

SceneRender rasterize_scene(std::span<const SceneObject> objects, const CameraIntrinsics& K,
                            int width, int height) {
  for (const auto& o : objects) o.mesh->validate();
  const FrameBuffer fb = rasterize(objects, K, Viewport::full_image(width, height));
  SceneRender out;
  out.depth = DepthMap(width, height, 1);
  out.visible.assign(objects.size(), MaskImage(width, height));
  for (std::size_t i = 0; i < fb.object.size(); ++i) {
    if (fb.object[i] < 0) continue;
    out.depth.data[i] = static_cast<float>(fb.depth[i]);
    out.visible[static_cast<std::size_t>(fb.object[i])].data[i] = 1;
  }
  return out;
}

MaskImage render_amodal(const TriMesh& mesh, const Pose& pose, const CameraIntrinsics& K,
                        int width, int height) {
  const SceneObject obj{&mesh, pose};
  const FrameBuffer fb = rasterize(std::span(&obj, 1), K, Viewport::full_image(width, height));
  MaskImage m(width, height);
  for (std::size_t i = 0; i < fb.object.size(); ++i) m.data[i] = fb.object[i] == 0 ? 1 : 0;
  if (m.empty()) throw Error(ErrorKind::EmptyRender, "object covers no pixel");
  return m;
}

CorrespondenceMap render_correspondence(const TriMesh& mesh, std::span<const Vec3> normalized_coords,
                                        const Pose& pose, const CameraIntrinsics& K,
                                        const BBox& crop, int out_size,
                                        std::span<const SceneObject> occluders) {
  if (normalized_coords.size() != mesh.vertices.size()) {
    throw Error(ErrorKind::BBoxMismatch, "one normalized coordinate per vertex is required");
  }
  std::vector<SceneObject> objects;
  objects.push_back({&mesh, pose});
  objects.insert(objects.end(), occluders.begin(), occluders.end());
  const Viewport vp = Viewport::crop(crop, out_size, K.width, K.height);
  const FrameBuffer fb = rasterize(objects, K, vp);

  CorrespondenceMap map{FloatImage(out_size, out_size, 3), MaskImage(out_size, out_size), crop};
  for (int r = 0; r < out_size; ++r) {
    for (int c = 0; c < out_size; ++c) {
      const std::size_t i = fb.index(r, c);
      if (fb.object[i] != 0) continue;
      const Face& f = mesh.faces[fb.triangle[i]];
      const auto& b = fb.bary[i];
      const Vec3 q = b[0] * normalized_coords[f[0]] + b[1] * normalized_coords[f[1]] +
                     b[2] * normalized_coords[f[2]];
      for (int ch = 0; ch < 3; ++ch) {
        map.coords.at(r, c, ch) = static_cast<float>(std::clamp(q[ch], 0.0, 1.0));
      }
      map.valid.at(r, c) = 1;
    }
  }
  if (map.valid.empty()) throw Error(ErrorKind::EmptyRender, "object not visible in crop");
  return map;
}

}  // namespace toolpose
