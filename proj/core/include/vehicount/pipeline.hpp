#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vehicount/bgsub.hpp"
#include "vehicount/boostcascade.hpp"
#include "vehicount/config.hpp"
#include "vehicount/counting.hpp"
#include "vehicount/synthgen.hpp"
#include "vehicount/tracking.hpp"

namespace vehicount {

/// Flat `key = value` pipeline configuration. Every key has a default; unknown keys are
/// rejected. See README for the key reference.
struct PipelineConfig {
  CountingMode detector = CountingMode::kBackgroundSubtraction;
  TrackerMode tracker = TrackerMode::kEkf;
  int resolution_factor = 1;

  // Background subtraction.
  double th = 10.0;
  double learning_rate = 0.05;
  int open_radius = 1;
  int min_area = 25;

  // Feature detector.
  double mhr = 0.995;
  int stages = 5;
  std::vector<int> rounds;  // stumps per stage; empty: 2 * s
  int mcc = 2;
  std::vector<double> scales{1.0, 1.25};
  int stride = 2;
  int window_w = 27;
  int window_h = 36;
  int grid = 3;
  std::vector<int> geometries{1, 2, 3};

  // Tracking and counting.
  int tfc = 10;
  double phi_min = kDefaultPhiMin;
  double phi_max = kDefaultPhiMax;
  double distance_fraction = 0.2;
  bool require_marker_overlap = false;
  double fps = 25.0;
  double gate = 0.0;  // px; 0 means a quarter of the larger frame dimension
  int max_misses = 5;
  std::vector<double> q{1, 1, 4, 1, 0.01, 0.001};   // process noise per second
  std::vector<double> r{4, 4};                      // measurement noise, px^2
  std::vector<double> p0{25, 25, 100, 25, 1, 0.1};  // initial covariance diagonal
  int eval_tol = 15;                                // frames
  std::string markers;                              // empty: taken from the scene's scenario.cfg

  // Paths.
  std::filesystem::path scene;
  std::filesystem::path model;  // feature detector model; empty: train in memory
  std::filesystem::path output;
  std::filesystem::path counted_events;  // eval: counted events to score
  std::filesystem::path train_scene;     // scenario config for training crops; empty: built-in scenario

  // Training.
  std::uint64_t seed = 42;
  int train_positives = 500;
  int train_negatives = 500;

  // Bench and sweep.
  int warmup = 5;
  int bench_frames = 50;
  std::string grid_spec;  // `key=v1,v2;key2=...`

  void set(const std::string& key, const std::string& value);
  static PipelineConfig from_key_values(const KeyValues& kv);
  static PipelineConfig load(const std::filesystem::path& path);
  std::string to_text() const;

  /// Throws ConfigError on an invalid combination.
  void validate() const;

  DetectorLayout layout() const;
  DetectParams detect_params() const;
  CountingPolicy policy() const;
  TrackerParams tracker_params(int frame_w, int frame_h) const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

struct BenchRecord {
  std::string stage;
  std::size_t frames = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
};

/// `BENCH stage=<name> frames=<n> mean_ms=<x> p50_ms=<x> p95_ms=<x>` (three decimals).
std::string bench_line(const BenchRecord& record);
BenchRecord summarize_timings(std::string stage, std::span<const double> ms);

/// In-memory inputs of one pipeline run.
struct PipelineInputs {
  std::size_t frame_count = 0;
  std::function<Frame(std::size_t)> frame;  // called once per frame, in index order
  MarkerSet markers;                        // full-resolution coordinates
  std::vector<CountEvent> truth;
  const CascadeModel* model = nullptr;      // required for the feature detector
};

/// Optional per-frame hook: detections (processing resolution) and the tracks that ended.
struct PipelineObserver {
  std::function<void(std::int64_t frame, std::span<const Rect> detections)> on_detections;
  std::function<void(std::int64_t frame, const Tracker& tracker, std::span<const Track> finished)> on_tracks;
};

struct PipelineResult {
  CountingReport report;
  std::vector<CountEvent> events;
  std::vector<BenchRecord> bench;  // detect, track, count, total
  int frame_w = 0;
  int frame_h = 0;
};

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineInputs& inputs,
                            const PipelineObserver* observer = nullptr, std::size_t timing_warmup = 0);

/// A scene directory held in memory.
struct SceneData {
  std::vector<Frame> frames;
  MarkerSet markers;
  std::vector<CountEvent> truth;
};

/// Loads frames/, gt_events.txt (optional) and the markers (config override, else scenario.cfg).
SceneData load_scene(const std::filesystem::path& dir, const std::string& marker_override = {});
PipelineInputs scene_inputs(const SceneData& scene, const CascadeModel* model);

/// Loads config.scene and config.model (or trains one when config.model is empty) and runs.
PipelineResult run_pipeline(const PipelineConfig& config, const PipelineObserver* observer = nullptr);

/// The scenario used for training crops: config.train_scene if set, else the built-in
/// default scenario seeded with config.seed.
ScenarioConfig training_scenario(const PipelineConfig& config);

CascadeModel train_model(const PipelineConfig& config, std::vector<StageLog>* log = nullptr);

/// Feature model for config: loaded from config.model, or trained in memory when unset.
CascadeModel obtain_model(const PipelineConfig& config);

using GridSpec = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// `key=v1,v2;key2=w1,...`; keys are sorted and numeric values ordered ascending.
GridSpec parse_grid(const std::string& text);

struct SweepRow {
  std::vector<std::string> values;  // one per grid key
  CountingReport report;
};

struct SweepTable {
  std::vector<std::string> keys;
  std::vector<SweepRow> rows;
};

/// Cartesian product over the grid, in lexicographic parameter order.
SweepTable sweep(const PipelineConfig& base, const GridSpec& grid);
void write_sweep_tsv(std::ostream& os, const SweepTable& table);

/// Timings over `measured` frames after `warmup` frames; frames cycle if the scene is short.
std::vector<BenchRecord> bench(const PipelineConfig& config, int warmup, int measured);

}  // namespace vehicount
