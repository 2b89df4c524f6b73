#include "toolpose/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "toolpose/error.hpp"
#include "toolpose/version.hpp"
#include "parallel_detail.hpp"

namespace toolpose {

using nlohmann::json;
using detail::parallel_for;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw Error(ErrorKind::ConfigError, std::string("unknown key '") + item.key() + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::array<double, 2> pair_of(const json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::ConfigError, "expected a two-element range");
  return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v(normal01(rng), normal01(rng), normal01(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

Mat3 random_rotation(Rng& rng) {
  const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double two_pi = 2.0 * std::numbers::pi;
  const Eigen::Quaterniond q(b * std::cos(two_pi * u3), a * std::sin(two_pi * u2), a * std::cos(two_pi * u2),
                             b * std::sin(two_pi * u3));
  return q.normalized().toRotationMatrix();
}

bool pose_in_bounds(const Vec3& t, const SceneConfig& c) {
  if (t.z() < c.z_min || t.z() > c.z_max) return false;
  const double u = c.camera.f * t.x() / t.z() + c.camera.px;
  const double v = c.camera.f * t.y() / t.z() + c.camera.py;
  const double m = c.center_margin_px;
  return u >= m && u <= c.camera.width - m && v >= m && v <= c.camera.height - m;
}

BBox zero_box() { return BBox{0.0, 0.0, 0.0, 0.0}; }

void stored_pose_json(const StoredPose& p, json& obj) {
  json R = json::array(), t = json::array();
  for (float v : p.R) R.push_back(static_cast<double>(v));
  for (float v : p.t_mm) t.push_back(static_cast<double>(v));
  obj["R"] = R;
  obj["t_mm"] = t;
}

StoredPose stored_pose_from(const json& obj) {
  StoredPose p;
  const json& R = obj.at("R");
  const json& t = obj.at("t_mm");
  if (R.size() != 9 || t.size() != 3) throw Error(ErrorKind::ParseError, "pose needs R[9] and t_mm[3]");
  for (int i = 0; i < 9; ++i) p.R[i] = static_cast<float>(R[i].get<double>());
  for (int i = 0; i < 3; ++i) p.t_mm[i] = static_cast<float>(t[i].get<double>());
  return p;
}

std::string model_stem(int index, int class_id) {
  return std::to_string(index) + "_" + class_name(class_id);
}

}  // namespace

// ---- config --------------------------------------------------------------------------------

void SceneConfig::validate() const {
  camera.validate();
  if (!(z_min > 0.0 && z_min < z_max)) throw Error(ErrorKind::ConfigError, "need 0 < z_min < z_max");
  if (n_frames < 1) throw Error(ErrorKind::ConfigError, "n_frames must be at least 1");
  if (map_size < 8) throw Error(ErrorKind::ConfigError, "map_size must be at least 8");
  if (!(crop_scale >= 1.0)) throw Error(ErrorKind::ConfigError, "crop_scale must be at least 1");
  if (center_margin_px < 0 || 2 * center_margin_px >= std::min(camera.width, camera.height)) {
    throw Error(ErrorKind::ConfigError, "center margin leaves no room in the image");
  }
  if (!(max_rot_step_deg >= 0.0 && max_trans_step >= 0.0 && max_art_step >= 0.0)) {
    throw Error(ErrorKind::ConfigError, "random-walk steps must be nonnegative");
  }
  if (occluder.count_min < 0 || occluder.count_max < occluder.count_min) {
    throw Error(ErrorKind::ConfigError, "bad occluder count range");
  }
  if (!(occluder.size_min > 0.0 && occluder.size_max >= occluder.size_min)) {
    throw Error(ErrorKind::ConfigError, "bad occluder size range");
  }
  if (!(occluder.placement_radius >= 0.0)) throw Error(ErrorKind::ConfigError, "bad occluder placement radius");
  if (!(noise.corr_px_sigma >= 0.0 && noise.detector_conf_sigma >= 0.0 && noise.box_jitter >= 0.0)) {
    throw Error(ErrorKind::ConfigError, "noise levels must be nonnegative");
  }
  if (!(noise.detector_conf_mean >= 0.0 && noise.detector_conf_mean <= 1.0)) {
    throw Error(ErrorKind::ConfigError, "detector confidence mean must lie in [0,1]");
  }
}

json SceneConfig::to_json() const {
  return {
      {"models", model_manifests},
      {"camera", camera_to_json(camera)},
      {"depth_range", {z_min, z_max}},
      {"occluder",
       {{"enabled", occluder.enabled},
        {"count_range", {occluder.count_min, occluder.count_max}},
        {"size_range", {occluder.size_min, occluder.size_max}},
        {"placement_radius", occluder.placement_radius}}},
      {"noise",
       {{"corr_px_sigma", noise.corr_px_sigma},
        {"detector_conf_model", {{"mean", noise.detector_conf_mean}, {"sigma", noise.detector_conf_sigma}}},
        {"box_jitter", noise.box_jitter}}},
      {"seed", seed},
      {"n_frames", n_frames},
      {"map_size", map_size},
      {"crop_scale", crop_scale},
      {"center_margin_px", center_margin_px},
      {"steps", {{"rotation_deg", max_rot_step_deg}, {"translation_m", max_trans_step}, {"articulation", max_art_step}}},
      {"write_depth", write_depth},
  };
}

SceneConfig SceneConfig::from_json(const json& j) {
  SceneConfig c;
  try {
    check_keys(j,
               {"models", "camera", "depth_range", "occluder", "noise", "seed", "n_frames", "map_size", "crop_scale",
                "center_margin_px", "steps", "write_depth"},
               "scene config");
    read_opt(j, "models", c.model_manifests);
    if (j.contains("camera")) c.camera = camera_from_json(j.at("camera"));
    if (j.contains("depth_range")) {
      const auto r = pair_of(j.at("depth_range"));
      c.z_min = r[0];
      c.z_max = r[1];
    }
    if (j.contains("occluder")) {
      const json& o = j.at("occluder");
      check_keys(o, {"enabled", "count_range", "size_range", "placement_radius"}, "occluder");
      read_opt(o, "enabled", c.occluder.enabled);
      if (o.contains("count_range")) {
        const auto r = pair_of(o.at("count_range"));
        c.occluder.count_min = static_cast<int>(r[0]);
        c.occluder.count_max = static_cast<int>(r[1]);
      }
      if (o.contains("size_range")) {
        const auto r = pair_of(o.at("size_range"));
        c.occluder.size_min = r[0];
        c.occluder.size_max = r[1];
      }
      read_opt(o, "placement_radius", c.occluder.placement_radius);
    }
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      check_keys(n, {"corr_px_sigma", "detector_conf_model", "box_jitter"}, "noise");
      read_opt(n, "corr_px_sigma", c.noise.corr_px_sigma);
      read_opt(n, "box_jitter", c.noise.box_jitter);
      if (n.contains("detector_conf_model")) {
        const json& d = n.at("detector_conf_model");
        check_keys(d, {"mean", "sigma"}, "detector_conf_model");
        read_opt(d, "mean", c.noise.detector_conf_mean);
        read_opt(d, "sigma", c.noise.detector_conf_sigma);
      }
    }
    read_opt(j, "seed", c.seed);
    read_opt(j, "n_frames", c.n_frames);
    read_opt(j, "map_size", c.map_size);
    read_opt(j, "crop_scale", c.crop_scale);
    read_opt(j, "center_margin_px", c.center_margin_px);
    if (j.contains("steps")) {
      const json& s = j.at("steps");
      check_keys(s, {"rotation_deg", "translation_m", "articulation"}, "steps");
      read_opt(s, "rotation_deg", c.max_rot_step_deg);
      read_opt(s, "translation_m", c.max_trans_step);
      read_opt(s, "articulation", c.max_art_step);
    }
    read_opt(j, "write_depth", c.write_depth);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("scene config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- stored poses --------------------------------------------------------------------------

StoredPose StoredPose::from_pose(const Pose& pose) {
  StoredPose s;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) s.R[3 * r + c] = static_cast<float>(pose.R(r, c));
    s.t_mm[r] = static_cast<float>(pose.t[r] * 1000.0);
  }
  return s;
}

Pose StoredPose::pose() const {
  Mat3 M;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) M(r, c) = static_cast<double>(R[3 * r + c]);
  }
  // f32 entries are only orthonormal to ~1e-7; project back onto SO(3).
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  if ((U * svd.matrixV().transpose()).determinant() < 0.0) U.col(2) = -U.col(2);
  Pose p;
  p.R = U * svd.matrixV().transpose();
  p.t = Vec3(t_mm[0], t_mm[1], t_mm[2]) / 1000.0;
  return p;
}

// ---- sampling and rendering ----------------------------------------------------------------

std::vector<ArticulatedModel> load_models(const SceneConfig& config, const std::filesystem::path& base) {
  std::vector<ArticulatedModel> models;
  if (config.model_manifests.empty()) {
    for (int c = 0; c < kNumClasses; ++c) models.push_back(make_builtin_model(c));
  } else {
    for (const auto& m : config.model_manifests) {
      const std::filesystem::path p(m);
      models.push_back(load_model_manifest(p.is_absolute() ? p : base / p));
    }
  }
  std::set<int> classes;
  for (const auto& m : models) {
    if (!classes.insert(m.class_id).second) {
      throw Error(ErrorKind::ConfigError, "each model in a scene needs a distinct class");
    }
  }
  return models;
}

Pose sample_pose(Rng& rng, const SceneConfig& config) {
  const CameraIntrinsics& K = config.camera;
  Pose p;
  p.R = random_rotation(rng);
  // Volume-uniform depth: density ∝ z² on [z_min, z_max].
  const double a = std::pow(config.z_min, 3), b = std::pow(config.z_max, 3);
  const double z = std::cbrt(a + (b - a) * uniform01(rng));
  const double m = config.center_margin_px;
  const double u = uniform(rng, m, K.width - m);
  const double v = uniform(rng, m, K.height - m);
  p.t = Vec3((u - K.px) * z / K.f, (v - K.py) * z / K.f, z);
  return p;
}

void pose_scene(const SceneFrame& frame, std::span<const ArticulatedModel> models, PosedScene& out) {
  out.tool_meshes.clear();
  out.occluder_meshes.clear();
  out.tools.clear();
  out.occluders.clear();
  out.tool_meshes.reserve(frame.objects.size());
  out.occluder_meshes.reserve(frame.occluders.size());
  for (const ObjectGT& o : frame.objects) {
    if (o.model < 0 || static_cast<std::size_t>(o.model) >= models.size()) {
      throw Error(ErrorKind::ConfigError, "object refers to a missing model");
    }
    out.tool_meshes.push_back(articulate(models[o.model], o.articulation));
  }
  for (const Occluder& oc : frame.occluders) {
    out.occluder_meshes.push_back(
        make_ellipsoid(Vec3(oc.radii_mm[0], oc.radii_mm[1], oc.radii_mm[2]) / 1000.0));
  }
  for (std::size_t k = 0; k < frame.objects.size(); ++k) {
    out.tools.push_back({&out.tool_meshes[k], frame.objects[k].pose.pose()});
  }
  for (std::size_t k = 0; k < frame.occluders.size(); ++k) {
    out.occluders.push_back({&out.occluder_meshes[k], frame.occluders[k].pose.pose()});
  }
}

BBox correspondence_crop(const BBox& box, double scale) {
  box.validate();
  const double side = std::ceil(scale * std::max(box.w, box.h));
  return BBox{box.cx, box.cy, side, side};
}

FrameArtifacts render_frame(const SceneFrame& frame, std::span<const ArticulatedModel> models,
                            const RenderSettings& settings) {
  const CameraIntrinsics& K = settings.camera;
  PosedScene scene;
  pose_scene(frame, models, scene);
  const std::size_t n_tools = scene.tools.size();

  std::vector<SceneObject> all(scene.tools);
  all.insert(all.end(), scene.occluders.begin(), scene.occluders.end());

  FrameArtifacts art;
  SceneRender sr = rasterize_scene(all, K, K.width, K.height);
  art.depth = std::move(sr.depth);
  art.visible.assign(sr.visible.begin(), sr.visible.begin() + static_cast<std::ptrdiff_t>(n_tools));
  art.hand = MaskImage(K.width, K.height);
  for (std::size_t k = n_tools; k < sr.visible.size(); ++k) art.hand = mask_or(art.hand, sr.visible[k]);

  for (std::size_t k = 0; k < n_tools; ++k) {
    const auto& obj = scene.tools[k];
    MaskImage amodal(K.width, K.height);
    try {
      amodal = render_amodal(*obj.mesh, obj.pose, K, K.width, K.height);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptyRender) throw;
    }
    const auto box = mask_bbox(amodal);
    art.crops.push_back(box ? correspondence_crop(*box, settings.crop_scale) : zero_box());
    art.amodal.push_back(std::move(amodal));
  }
  if (!settings.with_maps) return art;

  for (std::size_t k = 0; k < n_tools; ++k) {
    const int s = settings.map_size;
    const BBox& crop = art.crops[k];
    CorrespondenceMap map{FloatImage(s, s, 3), MaskImage(s, s), crop};
    MaskImage sil(s, s);
    if (crop.w > 0.0) {
      const TriMesh& mesh = *scene.tools[k].mesh;
      std::vector<SceneObject> others;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (i != k) others.push_back(all[i]);
      }
      try {
        map = render_correspondence(mesh, normalize_vertices(mesh, tight_bbox(mesh)), scene.tools[k].pose, K, crop,
                                    s, others);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::EmptyRender) throw;
      }
      const SceneObject alone[] = {scene.tools[k]};
      const FrameBuffer fb = rasterize(alone, K, Viewport::crop(crop, s, K.width, K.height));
      for (std::size_t i = 0; i < sil.data.size(); ++i) sil.data[i] = fb.object[i] == 0;
    }
    art.corr.push_back(std::move(map));
    art.amodal_crop.push_back(std::move(sil));
  }
  return art;
}

std::vector<SceneFrame> generate_sequence(const SceneConfig& config, std::span<const ArticulatedModel> models,
                                          int n_frames) {
  config.validate();
  if (n_frames < 1) throw Error(ErrorKind::ConfigError, "n_frames must be at least 1");
  if (models.empty()) throw Error(ErrorKind::ConfigError, "scene has no models");
  Rng rng(config.seed);

  struct State {
    Pose pose;
    double articulation;
  };
  std::vector<State> state;
  for (std::size_t k = 0; k < models.size(); ++k) {
    Pose p = sample_pose(rng, config);
    state.push_back({p, uniform01(rng)});
  }

  // Hand proxies: ellipsoids fixed in the frame of the tool they grip.
  struct Attached {
    int tool;
    Vec3 radii;
    Pose local;
  };
  std::vector<Attached> attached;
  if (config.occluder.enabled) {
    const auto span = static_cast<std::uint64_t>(config.occluder.count_max - config.occluder.count_min + 1);
    const int count = config.occluder.count_min + static_cast<int>(uniform_index(rng, span));
    for (int i = 0; i < count; ++i) {
      Attached a;
      a.tool = static_cast<int>(uniform_index(rng, models.size()));
      for (int d = 0; d < 3; ++d) a.radii[d] = uniform(rng, config.occluder.size_min, config.occluder.size_max);
      const ArticulatedModel& m = models[a.tool];
      const double diag = tight_bbox(merge_meshes(m.part_fixed, m.part_moving)).extent().norm();
      const double r = config.occluder.placement_radius * diag * std::cbrt(uniform01(rng));
      a.local.R = random_rotation(rng);
      a.local.t = m.hinge_origin + r * random_unit(rng);
      attached.push_back(a);
    }
  }

  const double max_rot = config.max_rot_step_deg * std::numbers::pi / 180.0;
  std::vector<SceneFrame> frames(static_cast<std::size_t>(n_frames));
  for (int f = 0; f < n_frames; ++f) {
    SceneFrame& fr = frames[f];
    fr.frame_id = f;
    for (std::size_t k = 0; k < models.size(); ++k) {
      ObjectGT o;
      o.class_id = models[k].class_id;
      o.model = static_cast<int>(k);
      o.pose = StoredPose::from_pose(state[k].pose);
      o.articulation = static_cast<float>(state[k].articulation);
      fr.objects.push_back(o);
    }
    for (const Attached& a : attached) {
      const Pose tool = fr.objects[a.tool].pose.pose();
      Occluder oc;
      oc.attached_to = a.tool;
      for (int d = 0; d < 3; ++d) oc.radii_mm[d] = static_cast<float>(a.radii[d] * 1000.0);
      oc.pose = StoredPose::from_pose(Pose{tool.R * a.local.R, tool.R * a.local.t + tool.t});
      fr.occluders.push_back(oc);
    }
    if (f + 1 == n_frames) break;
    for (State& s : state) {
      s.pose.R = axis_angle_to_matrix(random_unit(rng) * uniform(rng, 0.0, max_rot)) * s.pose.R;
      // Translation steps that would leave the depth range or the image are redrawn.
      for (int attempt = 0; attempt < 16; ++attempt) {
        const Vec3 t = s.pose.t + random_unit(rng) * uniform(rng, 0.0, config.max_trans_step);
        if (pose_in_bounds(t, config)) {
          s.pose.t = t;
          break;
        }
      }
      s.articulation = std::clamp(s.articulation + uniform(rng, -config.max_art_step, config.max_art_step), 0.0, 1.0);
    }
  }

  const RenderSettings settings{config.camera, config.map_size, config.crop_scale, false};
  parallel_for(n_frames, [&](int f) {
    SceneFrame& fr = frames[f];
    const FrameArtifacts art = render_frame(fr, models, settings);
    for (std::size_t k = 0; k < fr.objects.size(); ++k) {
      ObjectGT& o = fr.objects[k];
      o.bbox_amodal = mask_bbox(art.amodal[k]).value_or(zero_box());
      o.bbox_visible = mask_bbox(art.visible[k]).value_or(zero_box());
      o.visibility = static_cast<float>(visibility_fraction(art.visible[k], art.amodal[k]));
      o.crop = art.crops[k];
    }
  });
  return frames;
}

// ---- serialization -------------------------------------------------------------------------

std::string frame_dir_name(int frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d", frame_id);
  return buf;
}

namespace {
std::string frame_file(int frame_id, const std::string& name) {
  return "frames/" + frame_dir_name(frame_id) + "/" + name;
}
}  // namespace

std::string visible_path(int f, int k) { return frame_file(f, "vis_" + std::to_string(k) + ".pgm"); }
std::string amodal_path(int f, int k) { return frame_file(f, "amodal_" + std::to_string(k) + ".pgm"); }
std::string corr_path(int f, int k) { return frame_file(f, "corr_" + std::to_string(k) + ".fmap"); }
std::string corr_valid_path(int f, int k) { return frame_file(f, "corr_valid_" + std::to_string(k) + ".pgm"); }
std::string amodal_crop_path(int f, int k) { return frame_file(f, "amodal_crop_" + std::to_string(k) + ".pgm"); }
std::string hand_path(int f) { return frame_file(f, "hand.pgm"); }
std::string depth_path(int f) { return frame_file(f, "depth.fmap"); }

json bbox_to_json(const BBox& b) { return json::array({b.x0(), b.y0(), b.w, b.h}); }

BBox bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorKind::ParseError, "bbox must be [x, y, w, h]");
  const double x = j[0].get<double>(), y = j[1].get<double>(), w = j[2].get<double>(), h = j[3].get<double>();
  return BBox{x + 0.5 * w, y + 0.5 * h, w, h};
}

json camera_to_json(const CameraIntrinsics& K) {
  return {{"f", K.f}, {"px", K.px}, {"py", K.py}, {"width", K.width}, {"height", K.height}};
}

CameraIntrinsics camera_from_json(const json& j) {
  check_keys(j, {"f", "px", "py", "width", "height"}, "camera");
  CameraIntrinsics K;
  read_opt(j, "f", K.f);
  read_opt(j, "width", K.width);
  read_opt(j, "height", K.height);
  // Principal point defaults to the image center.
  K.px = 0.5 * K.width;
  K.py = 0.5 * K.height;
  read_opt(j, "px", K.px);
  read_opt(j, "py", K.py);
  K.validate();
  return K;
}

json scene_gt_to_json(const Dataset& ds) {
  json models = json::array();
  for (std::size_t i = 0; i < ds.model_paths.size(); ++i) models.push_back(ds.model_paths[i]);
  json frames = json::array();
  for (const SceneFrame& fr : ds.frames) {
    json objects = json::array();
    for (std::size_t k = 0; k < fr.objects.size(); ++k) {
      const ObjectGT& o = fr.objects[k];
      const int ki = static_cast<int>(k);
      json jo;
      jo["class"] = o.class_id;
      jo["model"] = o.model;
      stored_pose_json(o.pose, jo);
      jo["articulation"] = static_cast<double>(o.articulation);
      jo["bbox_amodal"] = bbox_to_json(o.bbox_amodal);
      jo["bbox_visible"] = bbox_to_json(o.bbox_visible);
      jo["visibility"] = static_cast<double>(o.visibility);
      jo["crop"] = bbox_to_json(o.crop);
      jo["files"] = {{"visible", visible_path(fr.frame_id, ki)},
                     {"amodal", amodal_path(fr.frame_id, ki)},
                     {"corr", corr_path(fr.frame_id, ki)},
                     {"corr_valid", corr_valid_path(fr.frame_id, ki)},
                     {"amodal_crop", amodal_crop_path(fr.frame_id, ki)}};
      objects.push_back(jo);
    }
    json occ = json::array();
    for (const Occluder& oc : fr.occluders) {
      json jo;
      jo["attached_to"] = oc.attached_to;
      jo["radii_mm"] = {static_cast<double>(oc.radii_mm[0]), static_cast<double>(oc.radii_mm[1]),
                        static_cast<double>(oc.radii_mm[2])};
      stored_pose_json(oc.pose, jo);
      occ.push_back(jo);
    }
    frames.push_back({{"frame_id", fr.frame_id},
                      {"objects", objects},
                      {"occluders", occ},
                      {"hand", hand_path(fr.frame_id)}});
  }
  return {{"format", "toolpose-scene-gt"},
          {"version", kVersion},
          {"camera", camera_to_json(ds.render.camera)},
          {"map_size", ds.render.map_size},
          {"crop_scale", ds.render.crop_scale},
          {"models", models},
          {"frames", frames}};
}

Dataset scene_gt_from_json(const json& j) {
  Dataset ds;
  try {
    ds.render.camera = camera_from_json(j.at("camera"));
    ds.render.map_size = j.at("map_size").get<int>();
    ds.render.crop_scale = j.at("crop_scale").get<double>();
    for (const auto& m : j.at("models")) ds.model_paths.push_back(m.get<std::string>());
    for (const auto& jf : j.at("frames")) {
      SceneFrame fr;
      fr.frame_id = jf.at("frame_id").get<int>();
      for (const auto& jo : jf.at("objects")) {
        ObjectGT o;
        o.class_id = jo.at("class").get<int>();
        o.model = jo.at("model").get<int>();
        o.pose = stored_pose_from(jo);
        o.articulation = static_cast<float>(jo.at("articulation").get<double>());
        o.bbox_amodal = bbox_from_json(jo.at("bbox_amodal"));
        o.bbox_visible = bbox_from_json(jo.at("bbox_visible"));
        o.visibility = static_cast<float>(jo.at("visibility").get<double>());
        o.crop = bbox_from_json(jo.at("crop"));
        if (o.visibility < 0.0f || o.visibility > 1.0f) throw Error(ErrorKind::ParseError, "visibility outside [0,1]");
        fr.objects.push_back(o);
      }
      for (const auto& jo : jf.at("occluders")) {
        Occluder oc;
        oc.attached_to = jo.at("attached_to").get<int>();
        const json& r = jo.at("radii_mm");
        for (int d = 0; d < 3; ++d) oc.radii_mm[d] = static_cast<float>(r.at(d).get<double>());
        oc.pose = stored_pose_from(jo);
        fr.occluders.push_back(oc);
      }
      ds.frames.push_back(std::move(fr));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("scene_gt: ") + e.what());
  }
  return ds;
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

std::filesystem::path export_gt(std::span<const SceneFrame> frames, std::span<const ArticulatedModel> models,
                                const SceneConfig& config, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  config.validate();
  fs::create_directories(out_dir / "models");
  Dataset ds;
  ds.dir = out_dir;
  ds.render = RenderSettings{config.camera, config.map_size, config.crop_scale, true};
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::string stem = model_stem(static_cast<int>(i), models[i].class_id);
    save_model_manifest(models[i], out_dir / "models" / (stem + ".json"), stem + "_fixed.obj", stem + "_moving.obj");
    ds.model_paths.push_back("models/" + stem + ".json");
  }
  ds.frames.assign(frames.begin(), frames.end());
  for (const SceneFrame& fr : frames) fs::create_directories(out_dir / "frames" / frame_dir_name(fr.frame_id));

  parallel_for(static_cast<int>(frames.size()), [&](int i) {
    const SceneFrame& fr = frames[i];
    const FrameArtifacts art = render_frame(fr, models, ds.render);
    for (std::size_t k = 0; k < fr.objects.size(); ++k) {
      const int ki = static_cast<int>(k);
      write_pgm(art.visible[k], out_dir / visible_path(fr.frame_id, ki));
      write_pgm(art.amodal[k], out_dir / amodal_path(fr.frame_id, ki));
      write_fmap(art.corr[k].coords, out_dir / corr_path(fr.frame_id, ki));
      write_pgm(art.corr[k].valid, out_dir / corr_valid_path(fr.frame_id, ki));
      write_pgm(art.amodal_crop[k], out_dir / amodal_crop_path(fr.frame_id, ki));
    }
    write_pgm(art.hand, out_dir / hand_path(fr.frame_id));
    if (config.write_depth) write_fmap(art.depth, out_dir / depth_path(fr.frame_id));
  });

  const fs::path gt = out_dir / "scene_gt.json";
  write_json_file(scene_gt_to_json(ds), gt);
  return gt;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "scene_gt.json";
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::IoError, "no scene_gt.json in " + dir.string());
  Dataset ds = scene_gt_from_json(read_json_file(path));
  ds.dir = dir;
  for (const auto& p : ds.model_paths) ds.models.push_back(load_model_manifest(dir / p));
  for (const SceneFrame& fr : ds.frames) {
    for (const ObjectGT& o : fr.objects) {
      if (o.model < 0 || static_cast<std::size_t>(o.model) >= ds.models.size()) {
        throw Error(ErrorKind::ParseError, "object refers to a missing model");
      }
    }
  }
  return ds;
}

std::vector<FrameAnnotation> load_annotations(const Dataset& ds) {
  std::vector<FrameAnnotation> out(ds.frames.size());
  parallel_for(static_cast<int>(ds.frames.size()), [&](int i) {
    const SceneFrame& fr = ds.frames[i];
    FrameAnnotation& ann = out[i];
    ann.frame_id = fr.frame_id;
    ann.hand_mask = read_pgm(ds.dir / hand_path(fr.frame_id));
    for (std::size_t k = 0; k < fr.objects.size(); ++k) {
      const int cls = fr.objects[k].class_id;
      MaskImage vis = read_pgm(ds.dir / visible_path(fr.frame_id, static_cast<int>(k)));
      ann.gt_amodal_masks[cls] = read_pgm(ds.dir / amodal_path(fr.frame_id, static_cast<int>(k)));
      ann.gt_visible_masks[cls] = vis;
      ann.tool_masks[cls] = std::move(vis);
    }
  });
  return out;
}

CorrespondenceMap load_correspondence(const Dataset& ds, int frame_id, int object) {
  const SceneFrame* fr = nullptr;
  for (const auto& f : ds.frames) {
    if (f.frame_id == frame_id) fr = &f;
  }
  if (!fr || object < 0 || static_cast<std::size_t>(object) >= fr->objects.size()) {
    throw Error(ErrorKind::ConfigError, "no such frame/object in dataset");
  }
  CorrespondenceMap map;
  map.coords = read_fmap(ds.dir / corr_path(frame_id, object));
  map.valid = read_pgm(ds.dir / corr_valid_path(frame_id, object));
  map.crop = fr->objects[object].crop;
  if (map.coords.channels != 3 || map.coords.width != map.valid.width || map.coords.height != map.valid.height) {
    throw Error(ErrorKind::ShapeMismatch, "correspondence map and validity mask disagree");
  }
  return map;
}

}  // namespace toolpose
