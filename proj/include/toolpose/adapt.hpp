#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "toolpose/pnp.hpp"
#include "toolpose/scene.hpp"

namespace toolpose {

struct Detection {
  int frame_id = 0;
  int class_id = 0;
  double confidence = 0.0;
  BBox bbox;
};

/// Snapshot of a track after processing one frame.
struct TrackFrame {
  int frame_id = 0;
  BBox predicted;  // Kalman prediction before the update
  BBox state;      // posterior box
  std::optional<Detection> detection;
  int hit_streak = 0;
  int age = 0;
};

struct Track {
  using Vec8 = Eigen::Matrix<double, 8, 1>;
  using Mat8 = Eigen::Matrix<double, 8, 8>;

  int track_id = 0;
  int class_id = 0;
  Vec8 x = Vec8::Zero();  // cx, cy, w, h and their per-frame velocities
  Mat8 P = Mat8::Identity();
  int hit_streak = 0;
  int age = 0;  // frames since spawn, inclusive
  int misses = 0;
  bool active = true;
  std::vector<TrackFrame> history;

  BBox bbox() const;
};

struct TrackerParams {
  double iou_gate = 0.3;
  int max_missed = 3;
  // Kalman noise as fractions of the box height.
  double std_position = 1.0 / 20.0;
  double std_velocity = 1.0 / 160.0;
};

/// Constant-velocity Kalman boxes with greedy same-class IoU association.
class Tracker {
public:
  explicit Tracker(TrackerParams params = {});

  /// One frame of detections; all must share `frame_id`.
  void step(int frame_id, std::span<const Detection> detections);

  /// Every track ever spawned, active or dropped, in spawn order.
  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerParams& params() const { return params_; }

private:
  TrackerParams params_;
  std::vector<Track> tracks_;
  int next_id_ = 0;
};

/// Detections of tracks whose hit streak at that frame is ≥ 3 and whose confidence is at least
/// conf_min, ordered by (frame, track).
std::vector<Detection> select_pseudo_frames(std::span<const Track> tracks, double conf_min,
                                            int min_streak = 3);

struct PoseEstimate {
  Pose pose;
  int class_id = 0;
  double class_confidence = 0.0;
  double articulation = 0.0;
  PnPResult pnp;
};

/// Stand-in for the pose network: given a frame and a detection box, estimate pose, class and
/// articulation. Implementations must be deterministic and safe to call concurrently.
class PoseEstimator {
public:
  virtual ~PoseEstimator() = default;
  virtual PoseEstimate estimate(int frame_id, const BBox& box) const = 0;
};

struct OracleOptions {
  double corr_sigma = 0.0;
  double conf_mean = 0.93;
  double conf_sigma = 0.03;
  std::uint64_t seed = 0;
  RansacOptions ransac;
};

/// Renders exact correspondences of the ground-truth object under the box crop, adds pixel
/// noise and runs PnP-RANSAC on them.
class RenderOracle final : public PoseEstimator {
public:
  RenderOracle(const Dataset& ds, OracleOptions options);
  PoseEstimate estimate(int frame_id, const BBox& box) const override;

private:
  const Dataset& ds_;
  OracleOptions opt_;
  std::map<int, std::size_t> frame_index_;
};

/// Replays precomputed estimates; picks the entry of the frame whose box best overlaps.
class FileEstimator final : public PoseEstimator {
public:
  struct Entry {
    int frame_id = 0;
    BBox bbox;
    PoseEstimate estimate;
  };

  explicit FileEstimator(std::vector<Entry> entries);
  static FileEstimator load(const std::filesystem::path& jsonl);
  PoseEstimate estimate(int frame_id, const BBox& box) const override;

private:
  std::multimap<int, Entry> entries_;
};

struct RefinedBox {
  BBox bbox;
  bool flagged = false;  // estimation failed; bbox is the input box
};

/// Reprojects the estimated articulated model (chosen by the estimated class) and returns its
/// silhouette box clipped to the image.
RefinedBox refine_bbox(const Detection& det, const PoseEstimator& estimator,
                       std::span<const ArticulatedModel> models, const CameraIntrinsics& K);

struct PoseThresholds {
  double conf_min = 0.85;
  double outlier_max_frac = 0.25;
  double reproj_max_px = 3.0;
};

struct DetectionLabel {
  int frame_id = 0;
  int class_id = 0;
  BBox bbox;
  bool flagged = false;
};

struct PoseLabel {
  int frame_id = 0;
  PoseEstimate estimate;
};

struct PseudoLabelSet {
  std::vector<DetectionLabel> detection_labels;
  std::vector<PoseLabel> pose_labels;
  double select_conf_min = 0.85;
  int min_streak = 3;
  PoseThresholds thresholds;
  double mixing_ratio = 0.3;

  nlohmann::json to_json() const;
};

/// Keeps the estimates that pass every threshold, in input order.
std::vector<PoseLabel> filter_pose_labels(std::span<const PoseLabel> estimates, const PoseThresholds& th);

struct DetectorSim {
  double box_jitter = 0.10;
  double conf_mean = 0.93;
  double conf_sigma = 0.03;
  double min_visibility = kMinVisibility;
  std::uint64_t seed = 0;
};

/// Ground-truth amodal boxes with Gaussian center/size jitter and sampled confidences.
std::vector<Detection> simulate_detections(const Dataset& ds, const DetectorSim& sim);

struct AdaptConfig {
  std::uint64_t seed = 0;  // detector and estimator streams derive from it
  TrackerParams tracker;
  double select_conf_min = 0.85;
  int min_streak = 3;
  PoseThresholds thresholds;
  double mixing_ratio = 0.3;
  int rounds = 2;
  DetectorSim detector;
  OracleOptions oracle;

  void validate() const;
  nlohmann::json to_json() const;
  static AdaptConfig from_json(const nlohmann::json& j);
};

struct RoundMetrics {
  int detections = 0;
  int eligible = 0;  // detections on tracks at least min_streak frames old
  int selected = 0;
  int flagged = 0;
  int pose_estimates = 0;
  int pose_labels = 0;
  double selection_rate = 0.0;  // selected / eligible
  // Against the ground-truth amodal box of the same class; absent without a match.
  std::optional<double> mean_input_iou;
  std::optional<double> mean_refined_iou;

  nlohmann::json to_json() const;
};

struct RoundResult {
  PseudoLabelSet labels;
  RoundMetrics metrics;
  /// Input detections with selected boxes replaced by their refinements.
  std::vector<Detection> next_detections;
};

/// Tracker, selection, box refinement, pose estimation on refined crops, label filtering.
RoundResult adaptation_round(const Dataset& ds, std::span<const Detection> detections,
                             const PoseEstimator& estimator, const AdaptConfig& config);

nlohmann::json detection_to_json(const Detection& d);
Detection detection_from_json(const nlohmann::json& j);
std::vector<Detection> load_detections(const std::filesystem::path& jsonl);

nlohmann::json pose_estimate_to_json(const PoseEstimate& e);
PoseEstimate pose_estimate_from_json(const nlohmann::json& j);

}  // namespace toolpose
