#include "toolpose/commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <iostream>
#include <sstream>

#include "toolpose/adapt.hpp"
#include "toolpose/error.hpp"
#include "toolpose/eval.hpp"
#include "toolpose/losses.hpp"
#include "toolpose/pnp.hpp"
#include "toolpose/scene.hpp"
#include "toolpose/version.hpp"
#include "parallel_detail.hpp"

namespace toolpose {

using nlohmann::json;

namespace {

bool is_validation(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::ParseError:
    case ErrorKind::DegenerateMesh:
    case ErrorKind::BBoxMismatch:
    case ErrorKind::InvalidRotation:
      return true;
    default:
      return false;
  }
}

template <typename F>
int guarded(const char* name, F&& body) {
  try {
    body();
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "toolpose " << name << ": " << e.what() << '\n';
    return is_validation(e.kind()) ? kExitValidation : kExitRuntime;
  } catch (const json::exception& e) {
    std::cerr << "toolpose " << name << ": invalid JSON: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "toolpose " << name << ": " << e.what() << '\n';
    return kExitRuntime;
  }
}

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw Error(ErrorKind::ConfigError, std::string(what) + " not found: " + p.string());
}

json load_config(const std::optional<fs::path>& path) {
  if (!path) return json::object();
  require_exists(*path, "config");
  return read_json_file(*path);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
      throw Error(ErrorKind::ConfigError, std::string("unknown key '") + item.key() + "' in " + where);
    }
  }
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::vector<json>& lines, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& j : lines) out << j.dump() << '\n';
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

void write_text(const std::string& text, const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
}

// The companion file name next to an output file: "<stem><suffix>".
fs::path sibling(const fs::path& file, const std::string& suffix) {
  return file.parent_path() / (file.stem().string() + suffix);
}

json ap_json(const APReport& r) {
  json per = json::object();
  for (const auto& [cls, ap] : r.per_class_ap) per[class_name(cls)] = ap;
  return {{"per_class", per}, {"mean", r.mean_ap}};
}

// ---- estimate ------------------------------------------------------------------------------

struct EstimateConfig {
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  RansacOptions ransac;

  json to_json() const {
    return {{"noise_sigma", noise_sigma},
            {"seed", seed},
            {"inlier_px", ransac.inlier_px},
            {"max_iters", ransac.max_iters}};
  }
  static EstimateConfig from_json(const json& j) {
    check_keys(j, {"noise_sigma", "seed", "inlier_px", "max_iters"}, "estimate config");
    EstimateConfig c;
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.seed = j.value("seed", c.seed);
    c.ransac.inlier_px = j.value("inlier_px", c.ransac.inlier_px);
    c.ransac.max_iters = j.value("max_iters", c.ransac.max_iters);
    return c;
  }
  void validate() const {
    if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::ConfigError, "noise sigma must be nonnegative");
    if (!(ransac.inlier_px > 0.0) || ransac.max_iters < 1) throw Error(ErrorKind::ConfigError, "bad RANSAC options");
  }
};

bool recoverable(const Error& e) {
  switch (e.kind()) {
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

// ---- losses --------------------------------------------------------------------------------

struct LossesConfig {
  LossWeights weights;
  std::size_t points = kDefaultLossPoints;
  std::uint64_t seed = 0;

  json to_json() const {
    return {{"weights", {{"pose", weights.pose}, {"geom", weights.geom}, {"cat", weights.cat}, {"art", weights.art}}},
            {"points", points},
            {"seed", seed}};
  }
  static LossesConfig from_json(const json& j) {
    check_keys(j, {"weights", "points", "seed"}, "losses config");
    LossesConfig c;
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      check_keys(w, {"pose", "geom", "cat", "art"}, "weights");
      c.weights.pose = w.value("pose", 1.0);
      c.weights.geom = w.value("geom", 1.0);
      c.weights.cat = w.value("cat", 1.0);
      c.weights.art = w.value("art", 1.0);
    }
    c.points = j.value("points", c.points);
    c.seed = j.value("seed", c.seed);
    c.weights.validate();
    if (c.points == 0) throw Error(ErrorKind::ConfigError, "need at least one loss point");
    return c;
  }
};

GroundTruth ground_truth_for(const Dataset& ds, const SceneFrame& fr, int k) {
  const ObjectGT& o = fr.objects[k];
  const CameraIntrinsics& K = ds.render.camera;
  const Pose pose = o.pose.pose();
  GroundTruth gt;
  const Vec2 center(K.f * pose.t.x() / pose.t.z() + K.px, K.f * pose.t.y() / pose.t.z() + K.py);
  gt.R = ego_to_allo(pose.R, center, K);
  gt.site = site_encode(pose.t, o.crop, K);
  gt.articulation = o.articulation;
  gt.class_id = o.class_id;
  gt.corr = to_double(read_fmap(ds.dir / corr_path(fr.frame_id, k)));
  gt.mask_vis = read_pgm(ds.dir / corr_valid_path(fr.frame_id, k));
  gt.mask_full = read_pgm(ds.dir / amodal_crop_path(fr.frame_id, k));
  return gt;
}

FloatImage to_float(const MaskImage& m) {
  FloatImage f(m.width, m.height, 1);
  for (std::size_t i = 0; i < m.data.size(); ++i) f.data[i] = m.data[i] ? 1.0f : 0.0f;
  return f;
}

}  // namespace

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

int cmd_simgen(const SimgenArgs& args) {
  return guarded("simgen", [&] {
    SceneConfig cfg = SceneConfig::from_json(load_config(args.config));
    if (args.seed) cfg.seed = *args.seed;
    if (args.frames) cfg.n_frames = *args.frames;
    cfg.validate();
    const fs::path base = args.config ? args.config->parent_path() : fs::path(".");
    const auto models = load_models(cfg, base);
    // The snapshot lives in the output directory, so manifest paths are made absolute.
    for (auto& m : cfg.model_manifests) {
      if (fs::path(m).is_relative()) m = fs::absolute(base / m).lexically_normal().string();
    }
    const auto frames = generate_sequence(cfg, models, cfg.n_frames);
    const fs::path gt = export_gt(frames, models, cfg, args.out);
    write_json_file(cfg.to_json(), args.out / "effective_config.json");
    std::cout << "simgen: " << frames.size() << " frames, " << models.size() << " tools -> " << gt.string() << '\n';
  });
}

int cmd_estimate(const EstimateArgs& args) {
  return guarded("estimate", [&] {
    require_exists(args.dataset, "dataset");
    EstimateConfig cfg = EstimateConfig::from_json(load_config(args.config));
    if (args.seed) cfg.seed = *args.seed;
    if (args.noise_sigma) cfg.noise_sigma = *args.noise_sigma;
    cfg.validate();
    const Dataset ds = load_dataset(args.dataset);
    const CameraIntrinsics& K = ds.render.camera;

    const fs::path mask_dir = sibling(args.out, "_masks");
    fs::create_directories(mask_dir);
    const std::string mask_rel = mask_dir.filename().string();

    std::vector<std::vector<json>> per_frame(ds.frames.size());
    std::vector<int> failures(ds.frames.size(), 0);
    detail::parallel_for(static_cast<int>(ds.frames.size()), [&](int fi) {
      const SceneFrame& fr = ds.frames[fi];
      struct Est {
        int object;
        PnPResult pnp;
        TriMesh mesh;
      };
      std::vector<Est> ests;
      for (std::size_t k = 0; k < fr.objects.size(); ++k) {
        const ObjectGT& o = fr.objects[k];
        if (!(o.crop.w > 0.0)) continue;
        const int ki = static_cast<int>(k);
        try {
          const CorrespondenceMap map = load_correspondence(ds, fr.frame_id, ki);
          TriMesh mesh = articulate(ds.models[o.model], o.articulation);
          CorrSet corr = pairs_from_map(map, tight_bbox(mesh));
          const std::uint64_t base = mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(fr.frame_id)), k);
          if (cfg.noise_sigma > 0.0) perturb_pixels(corr, cfg.noise_sigma, mix_seed(base, 1));
          RansacOptions ro = cfg.ransac;
          ro.seed = mix_seed(base, 2);
          ests.push_back({ki, pnp_ransac(corr, K, ro), std::move(mesh)});
        } catch (const Error& e) {
          if (!recoverable(e)) throw;
          ++failures[fi];
        }
      }
      // Reprojected masks come from one joint render so estimated tools occlude each other.
      std::vector<SceneObject> objs;
      for (const Est& e : ests) objs.push_back({&e.mesh, e.pnp.pose});
      std::vector<MaskImage> visible;
      if (!objs.empty()) {
        try {
          visible = rasterize_scene(objs, K, K.width, K.height).visible;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::EmptyRender) throw;
          visible.assign(objs.size(), MaskImage(K.width, K.height));
        }
      }
      for (std::size_t i = 0; i < ests.size(); ++i) {
        const Est& e = ests[i];
        const ObjectGT& o = fr.objects[e.object];
        const std::string name = frame_dir_name(fr.frame_id) + "_" + std::to_string(e.object) + ".pgm";
        write_pgm(visible[i], mask_dir / name);
        PoseEstimate pe;
        pe.pose = e.pnp.pose;
        pe.pnp = e.pnp;
        pe.class_id = o.class_id;
        pe.articulation = o.articulation;
        const int n = e.pnp.inlier_count + e.pnp.outlier_count;
        pe.class_confidence = n > 0 ? static_cast<double>(e.pnp.inlier_count) / n : 0.0;
        json line = pose_estimate_to_json(pe);
        line["frame_id"] = fr.frame_id;
        line["object"] = e.object;
        line["mask"] = mask_rel + "/" + name;
        try {
          line["bbox"] = bbox_to_json(*mask_bbox(render_amodal(e.mesh, e.pnp.pose, K, K.width, K.height)));
        } catch (const Error& err) {
          if (err.kind() != ErrorKind::EmptyRender) throw;
          line["bbox"] = nullptr;
        }
        per_frame[fi].push_back(std::move(line));
      }
    });

    std::vector<json> lines;
    int failed = 0;
    for (std::size_t i = 0; i < per_frame.size(); ++i) {
      for (auto& l : per_frame[i]) lines.push_back(std::move(l));
      failed += failures[i];
    }
    write_jsonl(lines, args.out);
    json snap = cfg.to_json();
    snap["dataset"] = args.dataset.string();
    write_json_file(snap, sibling(args.out, ".config.json"));
    std::cout << "estimate: " << lines.size() << " poses, " << failed << " failed -> " << args.out.string() << '\n';
  });
}

int cmd_evaluate(const EvaluateArgs& args) {
  return guarded("evaluate", [&] {
    require_exists(args.dataset, "dataset");
    require_exists(args.predictions, "predictions");
    const json cj = load_config(args.config);
    check_keys(cj, {"iou_thresholds"}, "evaluate config");
    std::vector<double> thresholds(kIouThresholds.begin(), kIouThresholds.end());
    if (cj.contains("iou_thresholds")) thresholds = cj.at("iou_thresholds").get<std::vector<double>>();
    for (double t : thresholds) {
      if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorKind::ConfigError, "IoU thresholds must lie in (0,1]");
    }

    const Dataset ds = load_dataset(args.dataset);
    const auto annotations = load_annotations(ds);
    const auto raw = read_jsonl(args.predictions);
    std::vector<PredictionRecord> preds(raw.size());
    const fs::path pred_dir = args.predictions.parent_path();
    detail::parallel_for(static_cast<int>(raw.size()), [&](int i) {
      const json& j = raw[i];
      PredictionRecord& p = preds[i];
      try {
        p.frame_id = j.at("frame_id").get<int>();
        p.class_id = j.at("class").get<int>();
        p.confidence = j.at("confidence").get<double>();
        if (j.contains("mask") && !j.at("mask").is_null()) p.reproj_mask = read_pgm(pred_dir / j.at("mask").get<std::string>());
        if (j.contains("bbox") && !j.at("bbox").is_null()) p.bbox = bbox_from_json(j.at("bbox"));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("prediction: ") + e.what());
      }
    });
    const APReport pose = pose_ap_report(preds, annotations, thresholds);

    std::vector<GtBox> gt_boxes;
    for (const SceneFrame& fr : ds.frames) {
      for (const ObjectGT& o : fr.objects) {
        if (o.bbox_amodal.w > 0.0) gt_boxes.push_back({fr.frame_id, o.class_id, o.bbox_amodal, o.visibility});
      }
    }
    std::vector<PredictionRecord> boxed;
    for (const auto& p : preds) {
      if (p.bbox) boxed.push_back({p.frame_id, p.class_id, p.confidence, std::nullopt, p.bbox});
    }
    const APReport det = detection_ap(boxed, gt_boxes, thresholds);

    const json effective = {{"iou_thresholds", thresholds}};
    const json report = {{"version", kVersion},
                         {"config_hash", config_hash(effective)},
                         {"config", effective},
                         {"dataset", args.dataset.string()},
                         {"predictions", args.predictions.string()},
                         {"frames", ds.frames.size()},
                         {"num_predictions", preds.size()},
                         {"pose_ap", ap_json(pose)},
                         {"detection_ap", ap_json(det)}};
    ensure_parent(args.out);
    write_json_file(report, args.out);

    std::ostringstream txt;
    char line[160];
    txt << "toolpose " << kVersion << "  config " << config_hash(effective) << '\n';
    txt << "frames " << ds.frames.size() << "  predictions " << preds.size() << '\n';
    txt << "class                 pose AP   det AP\n";
    for (const auto& [cls, ap] : pose.per_class_ap) {
      const auto d = det.per_class_ap.find(cls);
      std::snprintf(line, sizeof line, "%-20s  %7.4f  %7.4f\n", class_name(cls), ap,
                    d == det.per_class_ap.end() ? 0.0 : d->second);
      txt << line;
    }
    std::snprintf(line, sizeof line, "%-20s  %7.4f  %7.4f\n", "mean", pose.mean_ap, det.mean_ap);
    txt << line;
    write_text(txt.str(), sibling(args.out, ".txt"));
    std::cout << txt.str();
  });
}

int cmd_adapt(const AdaptArgs& args) {
  return guarded("adapt", [&] {
    require_exists(args.dataset, "dataset");
    if (args.detections) require_exists(*args.detections, "detections");
    if (args.estimates) require_exists(*args.estimates, "estimates");
    AdaptConfig cfg = AdaptConfig::from_json(load_config(args.config));
    if (args.seed) cfg.seed = *args.seed;
    if (args.rounds) cfg.rounds = *args.rounds;
    if (args.noise_sigma) cfg.oracle.corr_sigma = *args.noise_sigma;
    cfg.validate();
    cfg.detector.seed = mix_seed(cfg.seed, 1);
    cfg.oracle.seed = mix_seed(cfg.seed, 2);

    const Dataset ds = load_dataset(args.dataset);
    std::vector<Detection> dets =
        args.detections ? load_detections(*args.detections) : simulate_detections(ds, cfg.detector);
    std::unique_ptr<PoseEstimator> estimator;
    if (args.estimates) {
      estimator = std::make_unique<FileEstimator>(FileEstimator::load(*args.estimates));
    } else {
      estimator = std::make_unique<RenderOracle>(ds, cfg.oracle);
    }

    fs::create_directories(args.out);
    json effective = cfg.to_json();
    effective["dataset"] = args.dataset.string();
    if (args.detections) effective["detections"] = args.detections->string();
    if (args.estimates) effective["estimates"] = args.estimates->string();
    write_json_file(effective, args.out / "effective_config.json");

    json rounds = json::array();
    for (int r = 1; r <= cfg.rounds; ++r) {
      const fs::path dir = args.out / ("round_" + std::to_string(r));
      fs::create_directories(dir);
      std::vector<json> det_lines;
      for (const auto& d : dets) det_lines.push_back(detection_to_json(d));
      write_jsonl(det_lines, dir / "detections.jsonl");
      RoundResult res = adaptation_round(ds, dets, *estimator, cfg);
      write_json_file(res.labels.to_json(), dir / "pseudo_labels.json");
      json m = res.metrics.to_json();
      m["round"] = r;
      write_json_file(m, dir / "metrics.json");
      rounds.push_back(m);
      std::cout << "adapt round " << r << ": " << m.dump() << '\n';
      dets = std::move(res.next_detections);
    }
    write_json_file({{"version", kVersion}, {"config_hash", config_hash(effective)}, {"rounds", rounds}},
                    args.out / "metrics.json");
  });
}

int cmd_losses(const LossesArgs& args) {
  return guarded("losses", [&] {
    require_exists(args.dataset, "dataset");
    const LossesConfig cfg = LossesConfig::from_json(load_config(args.config));
    const Dataset ds = load_dataset(args.dataset);
    std::map<int, const SceneFrame*> frames;
    for (const auto& fr : ds.frames) frames[fr.frame_id] = &fr;

    if (args.emit_oracle) {
      // Predictions equal to the ground truth; every loss should evaluate to (nearly) zero.
      const fs::path map_dir = sibling(args.predictions, "_maps");
      fs::create_directories(map_dir);
      const std::string rel = map_dir.filename().string();
      std::vector<json> lines;
      for (const SceneFrame& fr : ds.frames) {
        for (std::size_t k = 0; k < fr.objects.size(); ++k) {
          const int ki = static_cast<int>(k);
          if (!(fr.objects[k].crop.w > 0.0)) continue;
          const MaskImage vis = read_pgm(ds.dir / corr_valid_path(fr.frame_id, ki));
          if (vis.empty()) continue;
          const GroundTruth gt = ground_truth_for(ds, fr, ki);
          const std::string stem = rel + "/" + frame_dir_name(fr.frame_id) + "_" + std::to_string(k);
          write_fmap(read_fmap(ds.dir / corr_path(fr.frame_id, ki)), map_dir.parent_path() / (stem + "_corr.fmap"));
          write_fmap(to_float(gt.mask_vis), map_dir.parent_path() / (stem + "_vis.fmap"));
          write_fmap(to_float(gt.mask_full), map_dir.parent_path() / (stem + "_full.fmap"));
          const Rot6D r6 = matrix_to_rot6d(gt.R);
          std::vector<double> logits(kNumClasses, 0.0);
          logits[gt.class_id] = 30.0;
          lines.push_back({{"frame_id", fr.frame_id},
                           {"object", ki},
                           {"rot6d", {r6.r1.x(), r6.r1.y(), r6.r1.z(), r6.r2.x(), r6.r2.y(), r6.r2.z()}},
                           {"site", {gt.site.dx, gt.site.dy, gt.site.dz}},
                           {"articulation", gt.articulation},
                           {"class_logits", logits},
                           {"corr", stem + "_corr.fmap"},
                           {"mask_vis", stem + "_vis.fmap"},
                           {"mask_full", stem + "_full.fmap"}});
        }
      }
      write_jsonl(lines, args.predictions);
      std::cout << "losses: wrote " << lines.size() << " oracle predictions -> " << args.predictions.string() << '\n';
      return;
    }

    require_exists(args.predictions, "predictions");
    const auto raw = read_jsonl(args.predictions);
    const fs::path pred_dir = args.predictions.parent_path();
    std::vector<LossBreakdown> out(raw.size());
    detail::parallel_for(static_cast<int>(raw.size()), [&](int i) {
      const json& j = raw[i];
      PosePrediction pred;
      int frame_id = 0, k = 0;
      try {
        frame_id = j.at("frame_id").get<int>();
        k = j.at("object").get<int>();
        const auto r = j.at("rot6d").get<std::vector<double>>();
        const auto s = j.at("site").get<std::vector<double>>();
        if (r.size() != 6 || s.size() != 3) throw Error(ErrorKind::ParseError, "rot6d needs 6 and site 3 values");
        pred.rot6d = Rot6D{Vec3(r[0], r[1], r[2]), Vec3(r[3], r[4], r[5])};
        pred.site = SiteParams{s[0], s[1], s[2], kDefaultZoom};
        pred.articulation = j.at("articulation").get<double>();
        pred.class_logits = j.at("class_logits").get<std::vector<double>>();
        pred.corr = to_double(read_fmap(pred_dir / j.at("corr").get<std::string>()));
        pred.mask_vis = to_double(read_fmap(pred_dir / j.at("mask_vis").get<std::string>()));
        pred.mask_full = to_double(read_fmap(pred_dir / j.at("mask_full").get<std::string>()));
      } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("loss prediction: ") + e.what());
      }
      auto it = frames.find(frame_id);
      if (it == frames.end() || k < 0 || static_cast<std::size_t>(k) >= it->second->objects.size()) {
        throw Error(ErrorKind::ConfigError, "prediction refers to a missing frame/object");
      }
      const GroundTruth gt = ground_truth_for(ds, *it->second, k);
      const ObjectGT& o = it->second->objects[k];
      const TriMesh mesh = articulate(ds.models[o.model], o.articulation);
      const auto pts = sample_surface_points(mesh, cfg.points, mix_seed(cfg.seed, static_cast<std::uint64_t>(o.model)));
      out[i] = loss_total(pred, gt, cfg.weights, pts);
    });

    auto row = [](const LossBreakdown& b) {
      return json{{"rotation", b.rotation}, {"center", b.center},     {"depth", b.depth},
                  {"mask", b.mask},         {"corr", b.corr},         {"articulation", b.articulation},
                  {"category", b.category}, {"pose_term", b.pose_term}, {"geom_term", b.geom_term},
                  {"cat_term", b.cat_term}, {"art_term", b.art_term}, {"total", b.total}};
    };
    LossBreakdown mean;
    json entries = json::array();
    for (std::size_t i = 0; i < out.size(); ++i) {
      json e = row(out[i]);
      e["frame_id"] = raw[i].at("frame_id");
      e["object"] = raw[i].at("object");
      entries.push_back(e);
      const LossBreakdown& b = out[i];
      mean.rotation += b.rotation;
      mean.center += b.center;
      mean.depth += b.depth;
      mean.mask += b.mask;
      mean.corr += b.corr;
      mean.articulation += b.articulation;
      mean.category += b.category;
      mean.pose_term += b.pose_term;
      mean.geom_term += b.geom_term;
      mean.cat_term += b.cat_term;
      mean.art_term += b.art_term;
      mean.total += b.total;
    }
    json jm = row(mean);
    if (!out.empty()) {
      for (auto it = jm.begin(); it != jm.end(); ++it) *it = it->get<double>() / static_cast<double>(out.size());
    }
    const json effective = cfg.to_json();
    const json report = {{"version", kVersion},
                         {"config_hash", config_hash(effective)},
                         {"config", effective},
                         {"count", out.size()},
                         {"mean", jm},
                         {"entries", entries}};
    ensure_parent(args.out);
    write_json_file(report, args.out);
    std::cout << "losses: " << out.size() << " predictions, mean total " << jm.at("total").get<double>() << '\n';
  });
}

}  // namespace toolpose
