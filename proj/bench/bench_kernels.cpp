// Serial reference vs OpenMP kernels. Thread count is the benchmark argument.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "support.hpp"
#include "toolpose/mesh.hpp"
#include "toolpose/reference.hpp"

using namespace toolpose;

namespace {

const CameraIntrinsics kCam;

struct RasterScene {
  std::vector<TriMesh> meshes;
  std::vector<SceneObject> objects;

  RasterScene() {
    Rng rng(11);
    for (int k = 0; k < 6; ++k) meshes.push_back(articulate(make_builtin_model(k % kNumClasses), 0.2 * k));
    meshes.push_back(make_ellipsoid(Vec3(0.03, 0.04, 0.03)));
    for (const TriMesh& m : meshes) {
      Pose p;
      p.R = testing::random_rotation(rng);
      p.t = Vec3(uniform(rng, -0.05, 0.05), uniform(rng, -0.04, 0.04), uniform(rng, 0.3, 0.6));
      objects.push_back({&m, p});
    }
  }
};

const RasterScene& raster_scene() {
  static const RasterScene s;
  return s;
}

struct ScoringSetup {
  CorrSet corr;
  std::vector<Pose> hyps;

  ScoringSetup() {
    Rng rng(12);
    Pose gt;
    gt.t = Vec3(0.01, -0.02, 0.45);
    gt.R = testing::random_rotation(rng);
    corr.pts3d = sample_surface_points(articulate(make_builtin_model(0), 0.5), 2000, 3);
    corr.pts2d = project_points(corr.pts3d, gt, kCam);
    for (int i = 0; i < 400; ++i) {
      Pose h;
      h.R = testing::random_rotation(rng);
      h.t = Vec3(uniform(rng, -0.05, 0.05), uniform(rng, -0.04, 0.04), uniform(rng, 0.35, 0.6));
      hyps.push_back(i % 4 == 0 ? gt : h);
    }
  }
};

const ScoringSetup& scoring() {
  static const ScoringSetup s;
  return s;
}

struct MaskSetup {
  std::vector<MaskImage> a, b;
  std::vector<const MaskImage*> pa, pb;

  MaskSetup() {
    Rng rng(13);
    for (int i = 0; i < 64; ++i) {
      MaskImage x(640, 480), y(640, 480);
      for (auto& v : x.data) v = uniform01(rng) < 0.3;
      for (auto& v : y.data) v = uniform01(rng) < 0.3;
      a.push_back(std::move(x));
      b.push_back(std::move(y));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      pa.push_back(&a[i]);
      pb.push_back(&b[i]);
    }
  }
};

const MaskSetup& masks() {
  static const MaskSetup s;
  return s;
}

void BM_RasterizeSerial(benchmark::State& st) {
  const auto& s = raster_scene();
  const Viewport vp = Viewport::full_image(kCam.width, kCam.height);
  for (auto _ : st) benchmark::DoNotOptimize(reference::rasterize(s.objects, kCam, vp));
}

void BM_RasterizeParallel(benchmark::State& st) {
  omp_set_num_threads(static_cast<int>(st.range(0)));
  const auto& s = raster_scene();
  const Viewport vp = Viewport::full_image(kCam.width, kCam.height);
  for (auto _ : st) benchmark::DoNotOptimize(rasterize(s.objects, kCam, vp));
}

void BM_ScoreSerial(benchmark::State& st) {
  const auto& s = scoring();
  for (auto _ : st) benchmark::DoNotOptimize(reference::score_hypotheses(s.corr, kCam, s.hyps, 2.0));
}

void BM_ScoreParallel(benchmark::State& st) {
  omp_set_num_threads(static_cast<int>(st.range(0)));
  const auto& s = scoring();
  for (auto _ : st) benchmark::DoNotOptimize(score_hypotheses(s.corr, kCam, s.hyps, 2.0));
}

void BM_MaskIouSerial(benchmark::State& st) {
  const auto& s = masks();
  for (auto _ : st) benchmark::DoNotOptimize(reference::mask_iou_batch(s.pa, s.pb));
}

void BM_MaskIouParallel(benchmark::State& st) {
  omp_set_num_threads(static_cast<int>(st.range(0)));
  const auto& s = masks();
  for (auto _ : st) benchmark::DoNotOptimize(mask_iou_batch(s.pa, s.pb));
}

}  // namespace

BENCHMARK(BM_RasterizeSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RasterizeParallel)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScoreSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScoreParallel)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MaskIouSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MaskIouParallel)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
