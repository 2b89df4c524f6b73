#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "toolpose/eval.hpp"
#include "toolpose/scene.hpp"

using namespace toolpose;
using testing::error_kind_of;

namespace {

SceneConfig small_config(std::uint64_t seed, int frames) {
  SceneConfig c;
  c.seed = seed;
  c.n_frames = frames;
  return c;
}

Vec3 rotation_axis(const Mat3& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.axis();
}

}  // namespace

TEST_CASE("sampled poses respect depth range and image margin") {
  const SceneConfig c = small_config(1, 1);
  Rng rng(123);
  for (int i = 0; i < 2000; ++i) {
    const Pose p = sample_pose(rng, c);
    CHECK(is_rotation(p.R));
    CHECK(p.t.z() >= c.z_min);
    CHECK(p.t.z() <= c.z_max);
    const Vec2 uv = project_point(Vec3::Zero(), p, c.camera);
    CHECK(uv.x() >= c.center_margin_px - 1e-9);
    CHECK(uv.x() <= c.camera.width - c.center_margin_px + 1e-9);
    CHECK(uv.y() >= c.center_margin_px - 1e-9);
    CHECK(uv.y() <= c.camera.height - c.center_margin_px + 1e-9);
  }
  Rng a(5), b(5);
  const Pose pa = sample_pose(a, c), pb = sample_pose(b, c);
  CHECK(pa.R == pb.R);
  CHECK(pa.t == pb.t);
}

TEST_CASE("rotation axes are uniform on the sphere (Rayleigh)") {
  const SceneConfig c = small_config(1, 1);
  Rng rng(2024);
  const int n = 10000;
  Vec3 sum = Vec3::Zero();
  for (int i = 0; i < n; ++i) sum += rotation_axis(sample_pose(rng, c).R);
  // 3n·|mean|² is chi-square with 3 degrees of freedom under uniformity; 11.345 is its 1% point.
  const double stat = 3.0 * sum.squaredNorm() / n;
  CHECK(stat < 11.345);
}

TEST_CASE("scene config JSON") {
  SceneConfig c = small_config(7, 12);
  c.z_min = 0.3;
  c.occluder.count_max = 3;
  const SceneConfig back = SceneConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  nlohmann::json j = c.to_json();
  j["bogus"] = 1;
  CHECK(error_kind_of([&] { SceneConfig::from_json(j); }) == ErrorKind::ConfigError);
  c.z_max = 0.2;
  CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::ConfigError);
}

TEST_CASE("stored poses keep single precision accuracy") {
  Rng rng(4);
  const SceneConfig c = small_config(1, 1);
  for (int i = 0; i < 100; ++i) {
    const Pose orig = sample_pose(rng, c);
    const Pose p = StoredPose::from_pose(orig).pose();
    CHECK(is_rotation(p.R));
    CHECK(geodesic_angle(p.R, orig.R) < 1e-6);
    CHECK((p.t - orig.t).norm() < 1e-7);
  }
}

TEST_CASE("correspondence crop") {
  const BBox crop = correspondence_crop(BBox{100, 80, 50.2, 30}, 1.2);
  CHECK(crop.cx == 100);
  CHECK(crop.cy == 80);
  CHECK(crop.w == 61.0);
  CHECK(crop.h == 61.0);
}

TEST_CASE("single frame sequence is static and fully described") {
  const SceneConfig c = small_config(3, 1);
  const auto models = load_models(c, ".");
  const auto frames = generate_sequence(c, models, 1);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].objects.size() == models.size());
  for (const ObjectGT& o : frames[0].objects) {
    CHECK(o.visibility >= 0.0f);
    CHECK(o.visibility <= 1.0f);
    CHECK(o.articulation >= 0.0f);
    CHECK(o.articulation <= 1.0f);
  }
  CHECK(error_kind_of([&] { generate_sequence(c, models, 0); }) == ErrorKind::ConfigError);
}

TEST_CASE("random walk keeps consecutive boxes overlapping") {
  const SceneConfig c = small_config(11, 100);
  const auto models = load_models(c, ".");
  const auto frames = generate_sequence(c, models, 100);
  double worst = 1.0;
  for (std::size_t f = 1; f < frames.size(); ++f)
    for (std::size_t k = 0; k < frames[f].objects.size(); ++k) {
      const ObjectGT& a = frames[f - 1].objects[k];
      const ObjectGT& b = frames[f].objects[k];
      CHECK(geodesic_angle(a.pose.pose().R, b.pose.pose().R) <= 2.0 * std::numbers::pi / 180.0 + 1e-6);
      CHECK((a.pose.pose().t - b.pose.pose().t).norm() <= 0.005 + 1e-6);
      CHECK(std::abs(a.articulation - b.articulation) <= 0.02f + 1e-6f);
      if (a.bbox_amodal.area() > 0 && b.bbox_amodal.area() > 0)
        worst = std::min(worst, bbox_iou(a.bbox_amodal, b.bbox_amodal));
    }
  CHECK(worst > 0.7);
}

TEST_CASE("without occluders a lone tool is fully visible") {
  testing::TempDir dir("scene");
  const ArticulatedModel m = make_tweezers();
  save_obj(m.part_fixed, dir / "f.obj");
  save_obj(m.part_moving, dir / "m.obj");
  save_model_manifest(m, dir / "tweezers.json", "f.obj", "m.obj");
  SceneConfig c = small_config(5, 30);
  c.model_manifests = {"tweezers.json"};
  c.occluder.enabled = false;
  const auto models = load_models(c, dir.path());
  REQUIRE(models.size() == 1);
  const auto frames = generate_sequence(c, models, 30);
  for (const SceneFrame& fr : frames) {
    CHECK(fr.occluders.empty());
    const FrameArtifacts art = render_frame(fr, models, RenderSettings{c.camera, c.map_size, c.crop_scale, false});
    CHECK(art.visible[0] == art.amodal[0]);
    CHECK(art.hand.empty());
  }
}

TEST_CASE("duplicate classes are rejected") {
  testing::TempDir dir("scene");
  const ArticulatedModel m = make_tweezers();
  save_obj(m.part_fixed, dir / "f.obj");
  save_obj(m.part_moving, dir / "m.obj");
  save_model_manifest(m, dir / "a.json", "f.obj", "m.obj");
  SceneConfig c = small_config(5, 3);
  c.model_manifests = {"a.json", "a.json"};
  CHECK(error_kind_of([&] { load_models(c, dir.path()); }) == ErrorKind::ConfigError);
}

TEST_CASE("export round trip and re-render consistency") {
  testing::TempDir a("scene"), b("scene");
  const SceneConfig c = small_config(17, 12);
  const auto models = load_models(c, ".");
  const auto frames = generate_sequence(c, models, c.n_frames);
  const auto gt_path = export_gt(frames, models, c, a.path());

  const std::string first = testing::slurp(gt_path);
  const Dataset ds = load_dataset(a.path());
  write_json_file(scene_gt_to_json(ds), b / "scene_gt.json");
  CHECK(testing::slurp(b / "scene_gt.json") == first);

  REQUIRE(ds.frames.size() == frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const SceneFrame& fr = ds.frames[f];
    REQUIRE(fr.objects.size() == models.size());
    const FrameArtifacts art = render_frame(fr, ds.models, RenderSettings{ds.render.camera, ds.render.map_size, ds.render.crop_scale, false});
    for (std::size_t k = 0; k < fr.objects.size(); ++k) {
      const ObjectGT& o = fr.objects[k];
      CHECK(o.pose == frames[f].objects[k].pose);
      const MaskImage stored = read_pgm(a.path() / visible_path(fr.frame_id, static_cast<int>(k)));
      CHECK(mask_iou(stored, art.visible[k]) >= 0.99);
      const auto box = mask_bbox(art.visible[k]);
      if (box) {
        CHECK(box->cx == o.bbox_visible.cx);
        CHECK(box->cy == o.bbox_visible.cy);
        CHECK(box->w == o.bbox_visible.w);
        CHECK(box->h == o.bbox_visible.h);
      } else {
        CHECK(o.bbox_visible.area() == 0.0);
      }
    }
  }
}

TEST_CASE("generation is deterministic per seed") {
  testing::TempDir a("scene"), b("scene"), d("scene");
  const SceneConfig c = small_config(99, 6);
  const auto models = load_models(c, ".");
  export_gt(generate_sequence(c, models, 6), models, c, a.path());
  export_gt(generate_sequence(c, models, 6), models, c, b.path());
  std::string diff;
  CHECK_MESSAGE(testing::trees_identical(a.path(), b.path(), &diff), diff);

  const SceneConfig other = small_config(100, 6);
  export_gt(generate_sequence(other, models, 6), models, other, d.path());
  CHECK_FALSE(testing::trees_identical(a.path(), d.path()));
}

TEST_CASE("missing dataset is an IO error") {
  testing::TempDir dir("scene");
  CHECK(error_kind_of([&] { load_dataset(dir / "nope"); }) == ErrorKind::IoError);
}
