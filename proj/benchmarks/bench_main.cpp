#include <benchmark/benchmark.h>

#include "vehicount/bgsub.hpp"
#include "vehicount/boostcascade.hpp"
#include "vehicount/features.hpp"
#include "vehicount/synthgen.hpp"
#include "vehicount/tracking.hpp"

using namespace vehicount;

namespace {

const SceneRenderer& scene() {
  static const SceneRenderer renderer([] {
    ScenarioConfig c;
    c.vehicles = 12;
    return c;
  }());
  return renderer;
}

const CascadeModel& model() {
  static const CascadeModel m = [] {
    ScenarioConfig c;
    c.vehicles = 30;
    const TrainingSet set = generate_training_set(c, 200, 200, 27, 36);
    CascadeTrainOptions opt;
    opt.stages = 3;
    return train_cascade(set.positives, set.negatives, opt);
  }();
  return m;
}

void BM_IntegralImage(benchmark::State& state) {
  const Frame f = scene().render(40);
  for (auto _ : state) benchmark::DoNotOptimize(IntegralImage(f));
}
BENCHMARK(BM_IntegralImage);

void BM_MbLbpHistogram(benchmark::State& state) {
  const IntegralImage ii(scene().render(40));
  const auto g = static_cast<int>(state.range(0));
  RankTable rt;
  for (auto _ : state) benchmark::DoNotOptimize(mb_lbp_histogram(ii, {0, 0, 240, 135}, BlockGeometry{g, g}, rt));
}
BENCHMARK(BM_MbLbpHistogram)->Arg(1)->Arg(2)->Arg(3);

void BM_WindowFeatures(benchmark::State& state) {
  const IntegralImage ii(scene().render(40));
  const CascadeModel& m = model();
  for (auto _ : state) benchmark::DoNotOptimize(compute_features(m.layout, m.rank_table, ii, {40, 30, 27, 36}));
}
BENCHMARK(BM_WindowFeatures);

void BM_CascadeDetect(benchmark::State& state) {
  const Frame f = scene().render(40);
  const CascadeModel& m = model();
  const DetectParams params;
  for (auto _ : state) benchmark::DoNotOptimize(detect(m, f, params));
}
BENCHMARK(BM_CascadeDetect)->Unit(benchmark::kMillisecond);

void BM_BackgroundSubtraction(benchmark::State& state) {
  std::vector<Frame> frames;
  for (int f = 0; f < 32; ++f) frames.push_back(scene().render(f));
  BackgroundModel bg(0.05);
  bg.update(frames[0]);
  std::size_t i = 0;
  for (auto _ : state) {
    const Frame& f = frames[i++ % frames.size()];
    const Mask mask = morphological_open(subtract(bg, f, 10), 1);
    benchmark::DoNotOptimize(extract_blobs(mask, 25));
    bg.update(f);
  }
}
BENCHMARK(BM_BackgroundSubtraction);

void BM_EkfCycle(benchmark::State& state) {
  Track t;
  t.state << 50, 10, 80, 0, 4.71238898038469, 0;
  const EkfNoise noise;
  const StateMatrix q = (noise.process_per_second * 0.04).asDiagonal();
  const MeasurementNoise r = noise.measurement.asDiagonal();
  double y = 10;
  for (auto _ : state) {
    y += 3.2;
    t = update(predict(t, 0.04, q), Measurement{50, y, Rect{}}, r);
    benchmark::DoNotOptimize(t);
  }
}
BENCHMARK(BM_EkfCycle);

void BM_TrackerStep(benchmark::State& state) {
  Tracker tracker{TrackerParams{}};
  std::int64_t frame = 0;
  std::vector<Rect> det(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    for (std::size_t k = 0; k < det.size(); ++k)
      det[k] = {static_cast<int>(10 + 30 * k), static_cast<int>((frame * 3) % 100), 27, 36};
    benchmark::DoNotOptimize(tracker.step(det, 0.04, frame++));
  }
}
BENCHMARK(BM_TrackerStep)->Arg(3)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
