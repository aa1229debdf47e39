#include <benchmark/benchmark.h>

#include "monocuboid/iou.hpp"
#include "monocuboid/pnp.hpp"
#include "monocuboid/solver.hpp"
#include "monocuboid/synth.hpp"

using namespace monocuboid;

namespace {

SyntheticScene bench_scene(std::uint64_t seed, double noise) {
  SceneSpec spec;
  spec.recipe = recipe_full_side();
  spec.noise_sigma_px = noise;
  spec.seed = seed;
  return generate_scene(spec);
}

void BM_SolvePrior(benchmark::State& state) {
  auto s = bench_scene(1, 1.0);
  SizePrior prior;
  prior.mu = s.gt_pose.dimensions;
  prior.sigma = Vec3(0.05 * 0.05, 0.03 * 0.03, 0.03 * 0.03).asDiagonal();
  SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(solve({"v", "", s.annotations, {}}, s.camera, &prior, cfg));
}
BENCHMARK(BM_SolvePrior)->Unit(benchmark::kMillisecond);

void BM_SolveFixDz(benchmark::State& state) {
  SceneSpec spec;
  spec.recipe = recipe_full_side();
  spec.recipe.push_back(AnnotationLabel::EdgeFrontLeft);
  spec.seed = 2;
  auto s = generate_scene(spec);
  SolverConfig cfg;
  cfg.gauge = Gauge::FixDz;
  for (auto _ : state) benchmark::DoNotOptimize(solve({"v", "", s.annotations, {}}, s.camera, nullptr, cfg));
}
BENCHMARK(BM_SolveFixDz)->Unit(benchmark::kMillisecond);

void BM_Pnp(benchmark::State& state) {
  auto s = bench_scene(3, 0.5);
  auto sys = compile(s.annotations, s.camera);
  auto pts = evaluate_points(sys, ground_truth_parameters(sys, s));
  std::vector<NormalizedPoint> rays;
  for (const auto& r : sys.rows) rays.push_back(r.u);
  for (auto _ : state) benchmark::DoNotOptimize(pnp_stage(pts, rays));
}
BENCHMARK(BM_Pnp)->Unit(benchmark::kMicrosecond);

void BM_Iou3d(benchmark::State& state) {
  CuboidPose a, b;
  a.dimensions = {4.5, 1.8, 1.5};
  b.dimensions = {4.2, 1.7, 1.4};
  b.rotation = Rotation3::axis_angle({0.1, 0.2, 1.0}, 0.4);
  b.translation = {0.5, 0.3, 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(iou3d(a, b));
}
BENCHMARK(BM_Iou3d)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
