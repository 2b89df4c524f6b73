#include "toolpose/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include "toolpose/error.hpp"
#include "parallel_detail.hpp"

namespace toolpose {

using nlohmann::json;

namespace {

// Failures that reject one refinement instead of aborting the round.
bool is_estimation_failure(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptyRender:
    case ErrorKind::TooFewCorrespondences:
    case ErrorKind::DegenerateConfiguration:
    case ErrorKind::NonFiniteResidual:
    case ErrorKind::NoConsensus:
    case ErrorKind::PointBehindCamera:
      return true;
    default:
      return false;
  }
}

BBox box_from_state(const Track::Vec8& x) {
  return BBox{x[0], x[1], std::max(x[2], 1.0), std::max(x[3], 1.0)};
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
      throw Error(ErrorKind::ConfigError, std::string("unknown key '") + item.key() + "' in " + where);
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

// ---- tracking ------------------------------------------------------------------------------

BBox Track::bbox() const { return box_from_state(x); }

Tracker::Tracker(TrackerParams params) : params_(params) {
  if (!(params_.iou_gate > 0.0 && params_.iou_gate <= 1.0) || params_.max_missed < 1) {
    throw Error(ErrorKind::ConfigError, "bad tracker parameters");
  }
}

void Tracker::step(int frame_id, std::span<const Detection> detections) {
  for (const Detection& d : detections) {
    if (d.frame_id != frame_id) throw Error(ErrorKind::ConfigError, "detections from several frames in one step");
    d.bbox.validate();
  }
  Track::Mat8 F = Track::Mat8::Identity();
  F.block<4, 4>(0, 4) = Eigen::Matrix4d::Identity();

  std::vector<std::size_t> live;
  std::vector<BBox> predicted;
  for (std::size_t i = 0; i < tracks_.size(); ++i) {
    Track& t = tracks_[i];
    if (!t.active) continue;
    const double h = std::max(t.x[3], 1.0);
    const double sp = params_.std_position * h, sv = params_.std_velocity * h;
    Track::Vec8 q;
    q << sp, sp, sp, sp, sv, sv, sv, sv;
    t.x = F * t.x;
    t.P = F * t.P * F.transpose();
    t.P.diagonal() += q.cwiseProduct(q);
    live.push_back(i);
    predicted.push_back(t.bbox());
  }

  // Greedy association: highest IoU first, ties by (track, detection) order.
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < live.size(); ++a) {
    for (std::size_t b = 0; b < detections.size(); ++b) {
      if (tracks_[live[a]].class_id != detections[b].class_id) continue;
      const double iou = bbox_iou(predicted[a], detections[b].bbox);
      if (iou >= params_.iou_gate) pairs.emplace_back(iou, a, b);
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& l, const auto& r) { return std::get<0>(l) > std::get<0>(r); });
  std::vector<int> det_of(live.size(), -1);
  std::vector<std::uint8_t> det_used(detections.size(), 0);
  for (const auto& [iou, a, b] : pairs) {
    if (det_of[a] >= 0 || det_used[b]) continue;
    det_of[a] = static_cast<int>(b);
    det_used[b] = 1;
  }

  Eigen::Matrix<double, 4, 8> H = Eigen::Matrix<double, 4, 8>::Zero();
  H.block<4, 4>(0, 0) = Eigen::Matrix4d::Identity();
  for (std::size_t a = 0; a < live.size(); ++a) {
    Track& t = tracks_[live[a]];
    ++t.age;
    TrackFrame rec{frame_id, predicted[a], predicted[a], std::nullopt, 0, t.age};
    if (det_of[a] >= 0) {
      const Detection& d = detections[det_of[a]];
      const Eigen::Vector4d z(d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h);
      const double r = params_.std_position * std::max(t.x[3], 1.0);
      const Eigen::Matrix4d S = H * t.P * H.transpose() + Eigen::Matrix4d::Identity() * (r * r);
      const Eigen::Matrix<double, 8, 4> Kg = t.P * H.transpose() * S.inverse();
      t.x += Kg * (z - H * t.x);
      t.P = (Track::Mat8::Identity() - Kg * H) * t.P;
      ++t.hit_streak;
      t.misses = 0;
      rec.detection = d;
    } else {
      t.hit_streak = 0;
      if (++t.misses >= params_.max_missed) t.active = false;
    }
    rec.state = t.bbox();
    rec.hit_streak = t.hit_streak;
    t.history.push_back(rec);
  }

  for (std::size_t b = 0; b < detections.size(); ++b) {
    if (det_used[b]) continue;
    const Detection& d = detections[b];
    Track t;
    t.track_id = next_id_++;
    t.class_id = d.class_id;
    t.x << d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h, 0, 0, 0, 0;
    const double sp = 2.0 * params_.std_position * d.bbox.h, sv = 10.0 * params_.std_velocity * d.bbox.h;
    Track::Vec8 p;
    p << sp, sp, sp, sp, sv, sv, sv, sv;
    t.P = p.cwiseProduct(p).asDiagonal();
    t.hit_streak = 1;
    t.age = 1;
    t.history.push_back({frame_id, d.bbox, d.bbox, d, 1, 1});
    tracks_.push_back(std::move(t));
  }
}

std::vector<Detection> select_pseudo_frames(std::span<const Track> tracks, double conf_min, int min_streak) {
  std::vector<std::tuple<int, int, Detection>> picked;
  for (const Track& t : tracks) {
    for (const TrackFrame& f : t.history) {
      if (f.detection && f.hit_streak >= min_streak && f.detection->confidence >= conf_min) {
        picked.emplace_back(f.frame_id, t.track_id, *f.detection);
      }
    }
  }
  std::stable_sort(picked.begin(), picked.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  std::vector<Detection> out;
  out.reserve(picked.size());
  for (auto& p : picked) out.push_back(std::get<2>(p));
  return out;
}

// ---- estimators ----------------------------------------------------------------------------

RenderOracle::RenderOracle(const Dataset& ds, OracleOptions options) : ds_(ds), opt_(options) {
  if (!(opt_.corr_sigma >= 0.0 && opt_.conf_sigma >= 0.0)) throw Error(ErrorKind::ConfigError, "negative noise");
  for (std::size_t i = 0; i < ds_.frames.size(); ++i) frame_index_[ds_.frames[i].frame_id] = i;
}

PoseEstimate RenderOracle::estimate(int frame_id, const BBox& box) const {
  auto it = frame_index_.find(frame_id);
  if (it == frame_index_.end()) throw Error(ErrorKind::ConfigError, "frame not in dataset");
  const SceneFrame& frame = ds_.frames[it->second];

  // The object under the box is the one whose amodal box overlaps it most.
  int target = -1;
  double best = 0.0;
  for (std::size_t k = 0; k < frame.objects.size(); ++k) {
    const BBox& gt = frame.objects[k].bbox_amodal;
    if (!(gt.w > 0.0)) continue;
    const double iou = bbox_iou(box, gt);
    if (iou > best) {
      best = iou;
      target = static_cast<int>(k);
    }
  }
  if (target < 0) throw Error(ErrorKind::EmptyRender, "no object under the box");

  PosedScene scene;
  pose_scene(frame, ds_.models, scene);
  std::vector<SceneObject> others;
  for (std::size_t k = 0; k < scene.tools.size(); ++k) {
    if (static_cast<int>(k) != target) others.push_back(scene.tools[k]);
  }
  others.insert(others.end(), scene.occluders.begin(), scene.occluders.end());

  const TriMesh& mesh = scene.tool_meshes[target];
  const Aabb mbox = tight_bbox(mesh);
  const CameraIntrinsics& K = ds_.render.camera;
  const BBox crop = correspondence_crop(box, ds_.render.crop_scale);
  const CorrespondenceMap map = render_correspondence(mesh, normalize_vertices(mesh, mbox), scene.tools[target].pose,
                                                      K, crop, ds_.render.map_size, others);
  CorrSet corr = pairs_from_map(map, mbox);
  const std::uint64_t base = mix_seed(mix_seed(opt_.seed, static_cast<std::uint64_t>(frame_id)),
                                      static_cast<std::uint64_t>(target));
  if (opt_.corr_sigma > 0.0) perturb_pixels(corr, opt_.corr_sigma, mix_seed(base, 1));
  RansacOptions ro = opt_.ransac;
  ro.seed = mix_seed(base, 2);

  PoseEstimate e;
  e.pnp = pnp_ransac(corr, K, ro);
  e.pose = e.pnp.pose;
  const ObjectGT& gt = frame.objects[target];
  e.class_id = gt.class_id;
  e.articulation = gt.articulation;
  Rng rng(mix_seed(base, 3));
  e.class_confidence = clamp01(opt_.conf_mean + opt_.conf_sigma * normal01(rng));
  return e;
}

FileEstimator::FileEstimator(std::vector<Entry> entries) {
  for (auto& e : entries) entries_.emplace(e.frame_id, std::move(e));
}

FileEstimator FileEstimator::load(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + jsonl.string());
  std::vector<Entry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Entry e;
      e.frame_id = j.at("frame_id").get<int>();
      e.bbox = bbox_from_json(j.at("bbox"));
      e.estimate = pose_estimate_from_json(j);
      entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::ParseError, jsonl.string() + ": " + ex.what());
    }
  }
  return FileEstimator(std::move(entries));
}

PoseEstimate FileEstimator::estimate(int frame_id, const BBox& box) const {
  const Entry* best = nullptr;
  double best_iou = 0.0;
  auto [lo, hi] = entries_.equal_range(frame_id);
  for (auto it = lo; it != hi; ++it) {
    const double iou = bbox_iou(box, it->second.bbox);
    if (iou > best_iou) {
      best_iou = iou;
      best = &it->second;
    }
  }
  if (!best) throw Error(ErrorKind::NoConsensus, "no stored estimate overlaps the box");
  return best->estimate;
}

// ---- refinement and filtering --------------------------------------------------------------

RefinedBox refine_bbox(const Detection& det, const PoseEstimator& estimator, std::span<const ArticulatedModel> models,
                       const CameraIntrinsics& K) {
  const RefinedBox rejected{det.bbox, true};
  try {
    const PoseEstimate e = estimator.estimate(det.frame_id, det.bbox);
    const auto model = std::find_if(models.begin(), models.end(),
                                    [&](const ArticulatedModel& m) { return m.class_id == e.class_id; });
    if (model == models.end()) return rejected;
    const MaskImage sil = render_amodal(articulate(*model, e.articulation), e.pose, K, K.width, K.height);
    return {*mask_bbox(sil), false};
  } catch (const Error& err) {
    if (is_estimation_failure(err.kind())) return rejected;
    throw;
  }
}

std::vector<PoseLabel> filter_pose_labels(std::span<const PoseLabel> estimates, const PoseThresholds& th) {
  std::vector<PoseLabel> out;
  for (const PoseLabel& l : estimates) {
    const PnPResult& p = l.estimate.pnp;
    const int total = p.inlier_count + p.outlier_count;
    const double outlier_frac = total > 0 ? static_cast<double>(p.outlier_count) / total : 1.0;
    if (l.estimate.class_confidence >= th.conf_min && outlier_frac <= th.outlier_max_frac &&
        p.mean_reproj_err <= th.reproj_max_px) {
      out.push_back(l);
    }
  }
  return out;
}

std::vector<Detection> simulate_detections(const Dataset& ds, const DetectorSim& sim) {
  if (!(sim.box_jitter >= 0.0 && sim.conf_sigma >= 0.0)) throw Error(ErrorKind::ConfigError, "negative noise");
  std::vector<Detection> out;
  for (const SceneFrame& fr : ds.frames) {
    for (std::size_t k = 0; k < fr.objects.size(); ++k) {
      const ObjectGT& o = fr.objects[k];
      if (!(o.bbox_amodal.w > 0.0) || o.visibility < sim.min_visibility) continue;
      Rng rng(mix_seed(mix_seed(sim.seed, static_cast<std::uint64_t>(fr.frame_id)), k));
      const BBox& g = o.bbox_amodal;
      Detection d;
      d.frame_id = fr.frame_id;
      d.class_id = o.class_id;
      d.bbox.cx = g.cx + sim.box_jitter * g.w * normal01(rng);
      d.bbox.cy = g.cy + sim.box_jitter * g.h * normal01(rng);
      d.bbox.w = std::max(4.0, g.w * (1.0 + sim.box_jitter * normal01(rng)));
      d.bbox.h = std::max(4.0, g.h * (1.0 + sim.box_jitter * normal01(rng)));
      d.confidence = clamp01(sim.conf_mean + sim.conf_sigma * normal01(rng));
      out.push_back(d);
    }
  }
  return out;
}

// ---- round ---------------------------------------------------------------------------------

RoundResult adaptation_round(const Dataset& ds, std::span<const Detection> detections,
                             const PoseEstimator& estimator, const AdaptConfig& config) {
  config.validate();
  if (ds.frames.empty()) throw Error(ErrorKind::EmptySequence, "sequence has no frames");

  std::map<int, std::vector<Detection>> by_frame;
  for (const SceneFrame& fr : ds.frames) by_frame[fr.frame_id];
  for (const Detection& d : detections) {
    auto it = by_frame.find(d.frame_id);
    if (it == by_frame.end()) throw Error(ErrorKind::ConfigError, "detection for a frame not in the sequence");
    it->second.push_back(d);
  }
  Tracker tracker(config.tracker);
  for (const auto& [frame_id, dets] : by_frame) tracker.step(frame_id, dets);

  RoundResult res;
  RoundMetrics& m = res.metrics;
  m.detections = static_cast<int>(detections.size());
  for (const Track& t : tracker.tracks()) {
    for (const TrackFrame& f : t.history) {
      if (f.detection && f.age >= config.min_streak) ++m.eligible;
    }
  }
  const auto selected = select_pseudo_frames(tracker.tracks(), config.select_conf_min, config.min_streak);
  m.selected = static_cast<int>(selected.size());
  m.selection_rate = m.eligible > 0 ? static_cast<double>(m.selected) / m.eligible : 0.0;

  const CameraIntrinsics& K = ds.render.camera;
  std::vector<RefinedBox> refined(selected.size());
  std::vector<std::optional<PoseEstimate>> estimates(selected.size());
  detail::parallel_for(static_cast<int>(selected.size()), [&](int i) {
    refined[i] = refine_bbox(selected[i], estimator, ds.models, K);
    if (refined[i].flagged) return;
    try {
      estimates[i] = estimator.estimate(selected[i].frame_id, refined[i].bbox);
    } catch (const Error& err) {
      if (!is_estimation_failure(err.kind())) throw;
    }
  });

  std::map<int, const SceneFrame*> frames;
  for (const SceneFrame& fr : ds.frames) frames[fr.frame_id] = &fr;
  double in_sum = 0.0, ref_sum = 0.0;
  int matched = 0;
  std::vector<PoseLabel> candidates;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const Detection& d = selected[i];
    res.labels.detection_labels.push_back({d.frame_id, d.class_id, refined[i].bbox, refined[i].flagged});
    if (refined[i].flagged) ++m.flagged;
    if (estimates[i]) candidates.push_back({d.frame_id, *estimates[i]});
    for (const ObjectGT& o : frames.at(d.frame_id)->objects) {
      if (o.class_id != d.class_id || !(o.bbox_amodal.w > 0.0)) continue;
      in_sum += bbox_iou(d.bbox, o.bbox_amodal);
      ref_sum += bbox_iou(refined[i].bbox, o.bbox_amodal);
      ++matched;
      break;
    }
  }
  if (matched > 0) {
    m.mean_input_iou = in_sum / matched;
    m.mean_refined_iou = ref_sum / matched;
  }
  m.pose_estimates = static_cast<int>(candidates.size());
  res.labels.pose_labels = filter_pose_labels(candidates, config.thresholds);
  m.pose_labels = static_cast<int>(res.labels.pose_labels.size());
  res.labels.select_conf_min = config.select_conf_min;
  res.labels.min_streak = config.min_streak;
  res.labels.thresholds = config.thresholds;
  res.labels.mixing_ratio = config.mixing_ratio;

  // Selected detections are bit-identical copies of inputs, so equality finds their source.
  res.next_detections.assign(detections.begin(), detections.end());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (refined[i].flagged) continue;
    for (Detection& d : res.next_detections) {
      const Detection& s = selected[i];
      if (d.frame_id == s.frame_id && d.class_id == s.class_id && d.confidence == s.confidence &&
          d.bbox.cx == s.bbox.cx && d.bbox.cy == s.bbox.cy && d.bbox.w == s.bbox.w && d.bbox.h == s.bbox.h) {
        d.bbox = refined[i].bbox;
        break;
      }
    }
  }
  return res;
}

// ---- config and serialization --------------------------------------------------------------

void AdaptConfig::validate() const {
  if (!(tracker.iou_gate > 0.0 && tracker.iou_gate <= 1.0) || tracker.max_missed < 1) {
    throw Error(ErrorKind::ConfigError, "bad tracker parameters");
  }
  if (!(select_conf_min >= 0.0 && select_conf_min <= 1.0) || min_streak < 1) {
    throw Error(ErrorKind::ConfigError, "bad selection parameters");
  }
  if (!(thresholds.conf_min >= 0.0 && thresholds.outlier_max_frac >= 0.0 && thresholds.reproj_max_px >= 0.0)) {
    throw Error(ErrorKind::ConfigError, "bad pose-label thresholds");
  }
  if (!(mixing_ratio >= 0.0 && mixing_ratio <= 1.0)) throw Error(ErrorKind::ConfigError, "mixing ratio outside [0,1]");
  if (rounds < 1) throw Error(ErrorKind::ConfigError, "rounds must be at least 1");
  if (!(detector.box_jitter >= 0.0 && detector.conf_sigma >= 0.0 && oracle.corr_sigma >= 0.0 &&
        oracle.conf_sigma >= 0.0)) {
    throw Error(ErrorKind::ConfigError, "noise levels must be nonnegative");
  }
}

json AdaptConfig::to_json() const {
  return {
      {"seed", seed},
      {"rounds", rounds},
      {"mixing_ratio", mixing_ratio},
      {"tracker", {{"iou_gate", tracker.iou_gate}, {"max_missed", tracker.max_missed}}},
      {"selection", {{"conf_min", select_conf_min}, {"min_streak", min_streak}}},
      {"pose_filter",
       {{"conf_min", thresholds.conf_min},
        {"outlier_max_frac", thresholds.outlier_max_frac},
        {"reproj_max_px", thresholds.reproj_max_px}}},
      {"detector",
       {{"box_jitter", detector.box_jitter}, {"conf_mean", detector.conf_mean}, {"conf_sigma", detector.conf_sigma}}},
      {"estimator",
       {{"corr_sigma", oracle.corr_sigma},
        {"conf_mean", oracle.conf_mean},
        {"conf_sigma", oracle.conf_sigma},
        {"inlier_px", oracle.ransac.inlier_px},
        {"max_iters", oracle.ransac.max_iters}}},
  };
}

AdaptConfig AdaptConfig::from_json(const json& j) {
  AdaptConfig c;
  try {
    check_keys(j, {"seed", "rounds", "mixing_ratio", "tracker", "selection", "pose_filter", "detector", "estimator"},
               "adapt config");
    read_opt(j, "seed", c.seed);
    read_opt(j, "rounds", c.rounds);
    read_opt(j, "mixing_ratio", c.mixing_ratio);
    if (j.contains("tracker")) {
      const json& t = j.at("tracker");
      check_keys(t, {"iou_gate", "max_missed"}, "tracker");
      read_opt(t, "iou_gate", c.tracker.iou_gate);
      read_opt(t, "max_missed", c.tracker.max_missed);
    }
    if (j.contains("selection")) {
      const json& s = j.at("selection");
      check_keys(s, {"conf_min", "min_streak"}, "selection");
      read_opt(s, "conf_min", c.select_conf_min);
      read_opt(s, "min_streak", c.min_streak);
    }
    if (j.contains("pose_filter")) {
      const json& p = j.at("pose_filter");
      check_keys(p, {"conf_min", "outlier_max_frac", "reproj_max_px"}, "pose_filter");
      read_opt(p, "conf_min", c.thresholds.conf_min);
      read_opt(p, "outlier_max_frac", c.thresholds.outlier_max_frac);
      read_opt(p, "reproj_max_px", c.thresholds.reproj_max_px);
    }
    if (j.contains("detector")) {
      const json& d = j.at("detector");
      check_keys(d, {"box_jitter", "conf_mean", "conf_sigma"}, "detector");
      read_opt(d, "box_jitter", c.detector.box_jitter);
      read_opt(d, "conf_mean", c.detector.conf_mean);
      read_opt(d, "conf_sigma", c.detector.conf_sigma);
    }
    if (j.contains("estimator")) {
      const json& e = j.at("estimator");
      check_keys(e, {"corr_sigma", "conf_mean", "conf_sigma", "inlier_px", "max_iters"}, "estimator");
      read_opt(e, "corr_sigma", c.oracle.corr_sigma);
      read_opt(e, "conf_mean", c.oracle.conf_mean);
      read_opt(e, "conf_sigma", c.oracle.conf_sigma);
      read_opt(e, "inlier_px", c.oracle.ransac.inlier_px);
      read_opt(e, "max_iters", c.oracle.ransac.max_iters);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("adapt config: ") + e.what());
  }
  c.validate();
  return c;
}

json RoundMetrics::to_json() const {
  json j = {{"detections", detections}, {"eligible", eligible},         {"selected", selected},
            {"flagged", flagged},       {"pose_estimates", pose_estimates}, {"pose_labels", pose_labels},
            {"selection_rate", selection_rate}};
  j["mean_input_iou"] = mean_input_iou ? json(*mean_input_iou) : json(nullptr);
  j["mean_refined_iou"] = mean_refined_iou ? json(*mean_refined_iou) : json(nullptr);
  return j;
}

json PseudoLabelSet::to_json() const {
  json dets = json::array();
  for (const auto& d : detection_labels) {
    dets.push_back({{"frame_id", d.frame_id}, {"class", d.class_id}, {"bbox", bbox_to_json(d.bbox)},
                    {"flagged", d.flagged}});
  }
  json poses = json::array();
  for (const auto& p : pose_labels) {
    json e = pose_estimate_to_json(p.estimate);
    e["frame_id"] = p.frame_id;
    poses.push_back(e);
  }
  return {{"detection_labels", dets},
          {"pose_labels", poses},
          {"thresholds",
           {{"select_conf_min", select_conf_min},
            {"min_streak", min_streak},
            {"conf_min", thresholds.conf_min},
            {"outlier_max_frac", thresholds.outlier_max_frac},
            {"reproj_max_px", thresholds.reproj_max_px}}},
          {"mixing_ratio", mixing_ratio}};
}

json detection_to_json(const Detection& d) {
  return {{"frame_id", d.frame_id}, {"class", d.class_id}, {"confidence", d.confidence}, {"bbox", bbox_to_json(d.bbox)}};
}

Detection detection_from_json(const json& j) {
  Detection d;
  try {
    d.frame_id = j.at("frame_id").get<int>();
    d.class_id = j.at("class").get<int>();
    d.confidence = j.at("confidence").get<double>();
    d.bbox = bbox_from_json(j.at("bbox"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("detection: ") + e.what());
  }
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) throw Error(ErrorKind::ParseError, "confidence outside [0,1]");
  d.bbox.validate();
  return d;
}

std::vector<Detection> load_detections(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + jsonl.string());
  std::vector<Detection> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, jsonl.string() + ": " + e.what());
    }
    out.push_back(detection_from_json(j));
  }
  return out;
}

json pose_estimate_to_json(const PoseEstimate& e) {
  const StoredPose s = StoredPose::from_pose(e.pose);
  json R = json::array(), t = json::array();
  for (float v : s.R) R.push_back(static_cast<double>(v));
  for (float v : s.t_mm) t.push_back(static_cast<double>(v));
  return {{"class", e.class_id},
          {"confidence", e.class_confidence},
          {"R", R},
          {"t_mm", t},
          {"articulation", e.articulation},
          {"inliers", e.pnp.inlier_count},
          {"outliers", e.pnp.outlier_count},
          {"mean_reproj_err", e.pnp.mean_reproj_err}};
}

PoseEstimate pose_estimate_from_json(const json& j) {
  PoseEstimate e;
  try {
    StoredPose s;
    const json& R = j.at("R");
    const json& t = j.at("t_mm");
    if (R.size() != 9 || t.size() != 3) throw Error(ErrorKind::ParseError, "pose needs R[9] and t_mm[3]");
    for (int i = 0; i < 9; ++i) s.R[i] = static_cast<float>(R[i].get<double>());
    for (int i = 0; i < 3; ++i) s.t_mm[i] = static_cast<float>(t[i].get<double>());
    e.pose = s.pose();
    e.class_id = j.at("class").get<int>();
    e.class_confidence = j.at("confidence").get<double>();
    e.articulation = j.at("articulation").get<double>();
    e.pnp.inlier_count = j.value("inliers", 0);
    e.pnp.outlier_count = j.value("outliers", 0);
    e.pnp.mean_reproj_err = j.value("mean_reproj_err", 0.0);
    e.pnp.pose = e.pose;
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::ParseError, std::string("pose estimate: ") + ex.what());
  }
  return e;
}

}  // namespace toolpose
