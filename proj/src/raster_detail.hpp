#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "toolpose/error.hpp"
#include "toolpose/raster.hpp"

namespace toolpose::detail {

struct PreparedTriangle {
  std::int32_t object;
  std::uint32_t triangle;
  double x[3];
  double y[3];
  double inv_z[3];
  double inv_area;  // 1 / |signed area|
  double sign;      // orientation so that edge functions are positive inside
  bool top_left[3];
  int row0, row1, col0, col1;  // inclusive pixel range, already clipped to the viewport
};

// Edge function of edge (a -> b) evaluated at p.
inline double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

inline std::vector<PreparedTriangle> prepare_triangles(std::span<const SceneObject> objects,
                                                       const CameraIntrinsics& K, const Viewport& vp) {
  std::vector<PreparedTriangle> tris;
  bool any_in_front = false;
  for (std::size_t o = 0; o < objects.size(); ++o) {
    const TriMesh& mesh = *objects[o].mesh;
    const Pose& pose = objects[o].pose;
    std::vector<Vec3> cam(mesh.vertices.size());
    for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = pose.apply(mesh.vertices[i]);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
      PreparedTriangle t{};
      t.object = static_cast<std::int32_t>(o);
      t.triangle = static_cast<std::uint32_t>(f);
      bool behind = false;
      for (int k = 0; k < 3; ++k) {
        const Vec3& X = cam[mesh.faces[f][k]];
        if (!(X.z() > kNearPlane)) {
          behind = true;
          break;
        }
        t.x[k] = (K.f * X.x() / X.z() + K.px - vp.x0) / vp.sx;
        t.y[k] = (K.f * X.y() / X.z() + K.py - vp.y0) / vp.sy;
        t.inv_z[k] = 1.0 / X.z();
      }
      if (behind) continue;
      any_in_front = true;
      const double area = edge_fn(t.x[0], t.y[0], t.x[1], t.y[1], t.x[2], t.y[2]);
      if (area == 0.0 || !std::isfinite(area)) continue;
      t.sign = area > 0.0 ? 1.0 : -1.0;
      t.inv_area = 1.0 / std::abs(area);
      for (int k = 0; k < 3; ++k) {
        // Edge k is opposite vertex k: from vertex k+1 to vertex k+2.
        const int a = (k + 1) % 3, b = (k + 2) % 3;
        const double nx = -t.sign * (t.y[b] - t.y[a]);
        const double ny = t.sign * (t.x[b] - t.x[a]);
        t.top_left[k] = nx > 0.0 || (nx == 0.0 && ny > 0.0);
      }
      const double xmin = std::min({t.x[0], t.x[1], t.x[2]});
      const double xmax = std::max({t.x[0], t.x[1], t.x[2]});
      const double ymin = std::min({t.y[0], t.y[1], t.y[2]});
      const double ymax = std::max({t.y[0], t.y[1], t.y[2]});
      // Pixel c has its center at c + 0.5.
      auto clamp_px = [](double v, int hi) {
        return static_cast<int>(std::clamp(v, -1.0, static_cast<double>(hi)));
      };
      t.col0 = clamp_px(std::ceil(xmin - 0.5), vp.width);
      t.col1 = clamp_px(std::floor(xmax - 0.5), vp.width - 1);
      t.row0 = clamp_px(std::ceil(ymin - 0.5), vp.height);
      t.row1 = clamp_px(std::floor(ymax - 0.5), vp.height - 1);
      t.col0 = std::max(t.col0, 0);
      t.row0 = std::max(t.row0, 0);
      if (t.col0 > t.col1 || t.row0 > t.row1) continue;
      tris.push_back(t);
    }
  }
  if (!any_in_front && !objects.empty()) {
    throw Error(ErrorKind::EmptyRender, "all geometry is behind the camera");
  }
  return tris;
}

inline bool sample_in_clip(const Viewport& vp, int r, int c) {
  if (vp.clip_w <= 0) return true;
  const double ix = vp.x0 + (c + 0.5) * vp.sx;
  const double iy = vp.y0 + (r + 0.5) * vp.sy;
  return ix >= 0.0 && iy >= 0.0 && ix < vp.clip_w && iy < vp.clip_h;
}

// Depth test of one triangle at one pixel; strict less keeps the earlier fragment on ties.
inline void shade_pixel(const PreparedTriangle& t, int r, int c, FrameBuffer& fb) {
  const double px = c + 0.5, py = r + 0.5;
  const double w0 = t.sign * edge_fn(t.x[1], t.y[1], t.x[2], t.y[2], px, py);
  const double w1 = t.sign * edge_fn(t.x[2], t.y[2], t.x[0], t.y[0], px, py);
  const double w2 = t.sign * edge_fn(t.x[0], t.y[0], t.x[1], t.y[1], px, py);
  if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) return;
  if ((w0 == 0.0 && !t.top_left[0]) || (w1 == 0.0 && !t.top_left[1]) ||
      (w2 == 0.0 && !t.top_left[2])) {
    return;
  }
  const double q0 = w0 * t.inv_area * t.inv_z[0];
  const double q1 = w1 * t.inv_area * t.inv_z[1];
  const double q2 = w2 * t.inv_area * t.inv_z[2];
  const double s = q0 + q1 + q2;
  if (!(s > 0.0)) return;
  const double z = 1.0 / s;
  const std::size_t i = fb.index(r, c);
  if (!(z < fb.depth[i])) return;
  fb.depth[i] = z;
  fb.object[i] = t.object;
  fb.triangle[i] = t.triangle;
  fb.bary[i] = {q0 * z, q1 * z, q2 * z};
}

inline void apply_clip(const Viewport& vp, FrameBuffer& fb) {
  if (vp.clip_w <= 0) return;
  for (int r = 0; r < fb.height; ++r) {
    for (int c = 0; c < fb.width; ++c) {
      if (sample_in_clip(vp, r, c)) continue;
      const std::size_t i = fb.index(r, c);
      fb.depth[i] = std::numeric_limits<double>::infinity();
      fb.object[i] = -1;
      fb.triangle[i] = 0;
      fb.bary[i] = {0.0, 0.0, 0.0};
    }
  }
}

}  // namespace toolpose::detail
