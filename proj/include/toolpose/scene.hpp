#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "toolpose/eval.hpp"
#include "toolpose/image.hpp"
#include "toolpose/mesh.hpp"
#include "toolpose/random.hpp"
#include "toolpose/raster.hpp"

namespace toolpose {

struct OccluderConfig {
  bool enabled = true;
  int count_min = 1;
  int count_max = 2;
  double size_min = 0.015;  // ellipsoid semi-axis, meters
  double size_max = 0.035;
  double placement_radius = 0.25;  // fraction of the tool bbox diagonal around the hinge
};

struct NoiseConfig {
  double corr_px_sigma = 0.0;
  double detector_conf_mean = 0.93;
  double detector_conf_sigma = 0.03;
  double box_jitter = 0.10;  // std-dev as a fraction of box size
};

struct SceneConfig {
  std::vector<std::string> model_manifests;  // empty: one of each built-in tool
  CameraIntrinsics camera;
  double z_min = 0.35;
  double z_max = 0.60;
  OccluderConfig occluder;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  int n_frames = 200;
  int map_size = kDefaultMapSize;
  double crop_scale = 1.2;
  int center_margin_px = 10;
  double max_rot_step_deg = 2.0;
  double max_trans_step = 0.005;
  double max_art_step = 0.02;
  bool write_depth = false;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are a ConfigError.
  static SceneConfig from_json(const nlohmann::json& j);
};

/// Pose as stored on disk: f32 row-major rotation and f32 millimeter translation. The
/// double pose used everywhere is derived from it, so loading reproduces renders exactly.
struct StoredPose {
  std::array<float, 9> R{};
  std::array<float, 3> t_mm{};

  static StoredPose from_pose(const Pose& pose);
  Pose pose() const;
  bool operator==(const StoredPose&) const = default;
};

struct ObjectGT {
  int class_id = 0;
  int model = 0;  // index into the model list
  StoredPose pose;
  float articulation = 0.0f;
  BBox bbox_amodal{0, 0, 0, 0};
  BBox bbox_visible{0, 0, 0, 0};  // zero-size when fully hidden
  float visibility = 0.0f;
  BBox crop{0, 0, 0, 0};  // correspondence-map crop
};

/// Ellipsoid hand proxy rigidly attached to one tool.
struct Occluder {
  int attached_to = 0;
  std::array<float, 3> radii_mm{};
  StoredPose pose;  // camera frame
};

struct SceneFrame {
  int frame_id = 0;
  std::vector<ObjectGT> objects;
  std::vector<Occluder> occluders;
};

struct RenderSettings {
  CameraIntrinsics camera;
  int map_size = kDefaultMapSize;
  double crop_scale = 1.2;
  bool with_maps = true;  // correspondence maps and crop silhouettes
};

/// Everything rendered for one frame, indexed like SceneFrame::objects.
struct FrameArtifacts {
  std::vector<MaskImage> visible;
  std::vector<MaskImage> amodal;
  MaskImage hand;
  DepthMap depth;
  std::vector<BBox> crops;
  std::vector<CorrespondenceMap> corr;
  std::vector<MaskImage> amodal_crop;  // silhouette sampled on the correspondence grid
};

/// Meshes posed for one frame; the SceneObjects point into the mesh vectors.
struct PosedScene {
  std::vector<TriMesh> tool_meshes;
  std::vector<TriMesh> occluder_meshes;
  std::vector<SceneObject> tools;
  std::vector<SceneObject> occluders;

  PosedScene() = default;
  PosedScene(const PosedScene&) = delete;
  PosedScene& operator=(const PosedScene&) = delete;
};

std::vector<ArticulatedModel> load_models(const SceneConfig& config, const std::filesystem::path& base);

/// Uniform rotation (random unit quaternion); translation uniform over the frustum volume
/// between z_min and z_max whose projection keeps the configured margin.
Pose sample_pose(Rng& rng, const SceneConfig& config);

void pose_scene(const SceneFrame& frame, std::span<const ArticulatedModel> models, PosedScene& out);

/// Crop used for correspondence maps: square of side ceil(scale·max(w,h)) about the box center.
BBox correspondence_crop(const BBox& box, double scale);

FrameArtifacts render_frame(const SceneFrame& frame, std::span<const ArticulatedModel> models,
                            const RenderSettings& settings);

/// Smooth random-walk sequence with boxes, visibility and crops filled in from renders.
std::vector<SceneFrame> generate_sequence(const SceneConfig& config, std::span<const ArticulatedModel> models,
                                          int n_frames);

struct Dataset {
  std::filesystem::path dir;
  RenderSettings render;
  std::vector<std::string> model_paths;  // relative to dir
  std::vector<ArticulatedModel> models;
  std::vector<SceneFrame> frames;
};

/// Relative artifact paths for one object or frame.
std::string frame_dir_name(int frame_id);
std::string visible_path(int frame_id, int object);
std::string amodal_path(int frame_id, int object);
std::string corr_path(int frame_id, int object);
std::string corr_valid_path(int frame_id, int object);
std::string amodal_crop_path(int frame_id, int object);
std::string hand_path(int frame_id);
std::string depth_path(int frame_id);

nlohmann::json bbox_to_json(const BBox& b);  // [x, y, w, h]
BBox bbox_from_json(const nlohmann::json& j);
nlohmann::json camera_to_json(const CameraIntrinsics& K);
CameraIntrinsics camera_from_json(const nlohmann::json& j);

nlohmann::json scene_gt_to_json(const Dataset& ds);
/// Parses frames, camera and model paths; models themselves are left empty.
Dataset scene_gt_from_json(const nlohmann::json& j);

/// Writes model manifests, per-frame PGM/FMAP artifacts and scene_gt.json. Returns the
/// scene_gt.json path.
std::filesystem::path export_gt(std::span<const SceneFrame> frames, std::span<const ArticulatedModel> models,
                                const SceneConfig& config, const std::filesystem::path& out_dir);

/// Reads scene_gt.json and the model manifests it references.
Dataset load_dataset(const std::filesystem::path& dir);

/// Masks for evaluation. Tool masks are the stored visible masks keyed by class.
std::vector<FrameAnnotation> load_annotations(const Dataset& ds);

CorrespondenceMap load_correspondence(const Dataset& ds, int frame_id, int object);

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace toolpose
