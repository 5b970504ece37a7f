#include <gtest/gtest.h>

#include <memory>
#include <regex>
#include <sstream>

#include "support.hpp"
#include "vehicount/error.hpp"
#include "vehicount/pipeline.hpp"

using namespace vehicount;

TEST(PipelineConfig, DefaultsAreValid) {
  const PipelineConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.detector, CountingMode::kBackgroundSubtraction);
  EXPECT_EQ(c.tracker, TrackerMode::kEkf);
  EXPECT_EQ(c.th, 10.0);
  EXPECT_EQ(c.tfc, 10);
  EXPECT_EQ(c.mhr, 0.995);
  EXPECT_EQ(c.mcc, 2);
}

TEST(PipelineConfig, TextRoundTrip) {
  PipelineConfig c;
  c.set("detector", "feature");
  c.set("tracker", "none");
  c.set("th", "8.5");
  c.set("rounds", "4,6,8");
  c.set("stages", "3");
  c.set("scales", "1,1.5");
  c.set("markers", "10,100,40,35;80,100,40,35");
  c.set("require_marker_overlap", "true");
  c.set("scene", "some dir/with space");
  c.set("phi_min", "3.5");
  c.set("q", "2,2,3,1,0.5,0.25");
  std::istringstream in(c.to_text());
  EXPECT_EQ(PipelineConfig::from_key_values(parse_key_values(in)), c);
  std::istringstream defaults(PipelineConfig{}.to_text());
  EXPECT_EQ(PipelineConfig::from_key_values(parse_key_values(defaults)), PipelineConfig{});
}

TEST(PipelineConfig, Errors) {
  PipelineConfig c;
  EXPECT_THROW(c.set("threshold", "10"), ConfigError);
  EXPECT_THROW(c.set("detector", "hog"), ConfigError);
  EXPECT_THROW(c.set("tfc", "ten"), ConfigError);
  std::istringstream in("th = 10\nbogus = 1\n");
  EXPECT_THROW(PipelineConfig::from_key_values(parse_key_values(in)), ConfigError);
  auto invalid = [](const char* key, const char* value) {
    PipelineConfig p;
    p.set(key, value);
    return p;
  };
  EXPECT_THROW(invalid("mhr", "1.5").validate(), ConfigError);
  EXPECT_THROW(invalid("rounds", "1,2").validate(), ConfigError);  // stages = 5
  EXPECT_THROW(invalid("learning_rate", "0").validate(), ConfigError);
}

TEST(Grid, ParseSortsKeysAndValues) {
  const GridSpec g = parse_grid("tfc=30,10; th=10,8,9.5");
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].first, "tfc");
  EXPECT_EQ(g[0].second, (std::vector<std::string>{"10", "30"}));
  EXPECT_EQ(g[1].first, "th");
  EXPECT_EQ(g[1].second, (std::vector<std::string>{"8", "9.5", "10"}));
  EXPECT_THROW(parse_grid(""), ConfigError);
  EXPECT_THROW(parse_grid("th"), ConfigError);
  EXPECT_THROW(parse_grid("th=1;th=2"), ConfigError);
  EXPECT_THROW(parse_grid("th="), ConfigError);
}

TEST(Bench, LineFormat) {
  const BenchRecord r{"detect", 50, 1.23456, 1.2, 2.0};
  EXPECT_EQ(bench_line(r), "BENCH stage=detect frames=50 mean_ms=1.235 p50_ms=1.200 p95_ms=2.000");
}

TEST(Bench, NearestRankSummary) {
  std::vector<double> ms;
  for (int i = 20; i >= 1; --i) ms.push_back(i);
  const BenchRecord r = summarize_timings("x", ms);
  EXPECT_EQ(r.frames, 20u);
  EXPECT_DOUBLE_EQ(r.mean_ms, 10.5);
  EXPECT_DOUBLE_EQ(r.p50_ms, 10.0);
  EXPECT_DOUBLE_EQ(r.p95_ms, 19.0);
}

class PipelineScene : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<vctest::TempDir>("pipeline");
    ScenarioConfig s;
    s.vehicles = 10;
    s.seed = 3;
    write_scene(s, dir_->path() / "clean");
    ScenarioConfig empty = s;
    empty.vehicles = 0;
    empty.frames = 40;
    write_scene(empty, dir_->path() / "empty");
  }
  static void TearDownTestSuite() { dir_.reset(); }

  static PipelineConfig config(const char* scene = "clean") {
    PipelineConfig c;
    c.scene = dir_->path() / scene;
    return c;
  }

  static std::unique_ptr<vctest::TempDir> dir_;
};

std::unique_ptr<vctest::TempDir> PipelineScene::dir_;

TEST_F(PipelineScene, CleanSceneCountsEveryVehicle) {
  const PipelineResult r = run_pipeline(config());
  EXPECT_EQ(r.report.gt, 10);
  EXPECT_EQ(r.report.counted, 10);
  EXPECT_EQ(r.report.fp, 0);
  EXPECT_EQ(r.report.fn, 0);
  ASSERT_TRUE(r.report.accuracy.has_value());
  EXPECT_EQ(r.report.accuracy->rounded, 100);
}

TEST_F(PipelineScene, EmptySceneHasUndefinedAccuracy) {
  const PipelineResult r = run_pipeline(config("empty"));
  EXPECT_EQ(r.report.counted, 0);
  EXPECT_EQ(r.report.fp, 0);
  EXPECT_EQ(r.report.fn, 0);
  EXPECT_FALSE(r.report.accuracy.has_value());
  EXPECT_NE(result_line(r.report).find("acc_int=na"), std::string::npos);
}

TEST_F(PipelineScene, WithoutTrackerStillCounts) {
  PipelineConfig c = config();
  c.tracker = TrackerMode::kNone;
  const PipelineResult r = run_pipeline(c);
  EXPECT_EQ(r.report.gt, 10);
  EXPECT_GT(r.report.counted, 0);
}

TEST_F(PipelineScene, RunIsDeterministic) {
  const PipelineResult a = run_pipeline(config());
  const PipelineResult b = run_pipeline(config());
  EXPECT_EQ(result_line(a.report), result_line(b.report));
  EXPECT_EQ(a.events, b.events);
}

TEST_F(PipelineScene, BenchRecords) {
  const PipelineResult r = run_pipeline(config());
  ASSERT_EQ(r.bench.size(), 4u);
  const char* names[] = {"detect", "track", "count", "total"};
  const std::regex line(R"(BENCH stage=\w+ frames=[1-9]\d* mean_ms=\d+\.\d{3} p50_ms=\d+\.\d{3} p95_ms=\d+\.\d{3})");
  double stages = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.bench[i].stage, names[i]);
    EXPECT_GT(r.bench[i].frames, 0u);
    EXPECT_GE(r.bench[i].mean_ms, 0.0);
    EXPECT_TRUE(std::regex_match(bench_line(r.bench[i]), line)) << bench_line(r.bench[i]);
    if (i < 3) stages += r.bench[i].mean_ms;
  }
  EXPECT_LE(stages, r.bench[3].mean_ms * 1.05 + 1e-3);

  const auto b = bench(config(), 2, 8);
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(b[0].frames, 8u);
}

TEST_F(PipelineScene, SingleGridPointMatchesRun) {
  PipelineConfig c = config();
  const SweepTable t = sweep(c, parse_grid("th=10"));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(result_line(t.rows[0].report), result_line(run_pipeline(c).report));
}

TEST_F(PipelineScene, SweepProductOrderAndTsv) {
  const SweepTable t = sweep(config(), parse_grid("th=10,8;tfc=30,10"));
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.keys, (std::vector<std::string>{"tfc", "th"}));
  EXPECT_EQ(t.rows[0].values, (std::vector<std::string>{"10", "8"}));
  EXPECT_EQ(t.rows[1].values, (std::vector<std::string>{"10", "10"}));
  EXPECT_EQ(t.rows[2].values, (std::vector<std::string>{"30", "8"}));
  EXPECT_EQ(t.rows[3].values, (std::vector<std::string>{"30", "10"}));
  std::ostringstream os;
  write_sweep_tsv(os, t);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "tfc\tth\tfp\tfn\tgt\tacc_real\tacc_int");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 4);
}

TEST_F(PipelineScene, StricterTfcNeverCountsMore) {
  const SweepTable t = sweep(config(), parse_grid("tfc=0,5,10,15,20,30,40"));
  for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_LE(t.rows[i].report.counted, t.rows[i - 1].report.counted);
}

TEST_F(PipelineScene, FeatureDetectorNeedsMatchingModel) {
  PipelineConfig c = config();
  c.detector = CountingMode::kFeature;
  const SceneData scene = load_scene(c.scene);
  EXPECT_THROW(run_pipeline(c, scene_inputs(scene, nullptr)), ConfigError);
  CascadeModel wrong;
  wrong.layout.window_w = 30;
  EXPECT_THROW(run_pipeline(c, scene_inputs(scene, &wrong)), DomainError);
  c.scene = dir_->path() / "missing";
  EXPECT_THROW(run_pipeline(c), IoError);
}
