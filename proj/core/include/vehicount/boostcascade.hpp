#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "vehicount/features.hpp"
#include "vehicount/imaging.hpp"

namespace vehicount {

/// Window size, cell grid, and MB-LBP block geometries of a detector.
///
/// A feature vector concatenates, for every grid cell (row-major) and every block
/// geometry, the 64-bin rank histogram of that cell normalised by its site count:
///
///     index = (cell * geometries.size() + geometry) * 64 + bin
struct DetectorLayout {
  int window_w = 27;
  int window_h = 36;
  int grid = 3;
  std::vector<int> geometries{1, 2, 3};

  int dimension() const { return grid * grid * static_cast<int>(geometries.size()) * kRankBins; }

  /// Throws DomainError when a canonical cell cannot hold the largest block footprint.
  void validate() const;

  friend bool operator==(const DetectorLayout&, const DetectorLayout&) = default;
};

using FeatureVector = std::vector<double>;

/// Cell rectangles and scaled block geometries of one (possibly scaled) window.
struct WindowGeometry {
  std::vector<Rect> cells;
  std::vector<BlockGeometry> blocks;
};

WindowGeometry window_geometry(const DetectorLayout& layout, const Rect& window);

/// Full feature vector of a window, computed directly from the integral image.
FeatureVector compute_features(const DetectorLayout& layout, const RankTable& rt, const IntegralImage& ii,
                               const Rect& window);

/// A single component of compute_features.
double feature_value(const DetectorLayout& layout, const RankTable& rt, const IntegralImage& ii,
                     const WindowGeometry& wg, int feature_index);

/// Decision stump: with polarity +1 returns -1 when x[feature_index] < threshold, else +1.
/// Polarity -1 flips the output.
struct Stump {
  int feature_index = 0;
  double threshold = 0.0;
  int polarity = 1;

  int classify(double value) const {
    const int raw = value < threshold ? -1 : 1;
    return polarity * raw;
  }

  friend bool operator==(const Stump&, const Stump&) = default;
};

int weak_classify(const Stump& s, std::span<const double> x);

struct WeightedStump {
  Stump stump;
  double alpha = 0.0;

  friend bool operator==(const WeightedStump&, const WeightedStump&) = default;
};

struct StrongClassifier {
  std::vector<WeightedStump> stumps;
  double stage_threshold = 0.0;

  friend bool operator==(const StrongClassifier&, const StrongClassifier&) = default;
};

struct StrongResult {
  double score = 0.0;
  int label = 1;
};

/// score = sum(alpha_t * h_t(x)); label = +1 iff score >= stage_threshold.
StrongResult strong_classify(const StrongClassifier& h, std::span<const double> x);

/// Dense sample matrix, feature-major, with each feature's sample order pre-sorted.
class SampleMatrix {
 public:
  SampleMatrix() = default;
  explicit SampleMatrix(std::span<const FeatureVector> xs);

  int samples() const { return samples_; }
  int dimension() const { return dimension_; }
  double value(int feature, int sample) const {
    return values_[static_cast<std::size_t>(feature) * samples_ + sample];
  }
  std::span<const std::int32_t> sorted(int feature) const {
    return {order_.data() + static_cast<std::size_t>(feature) * samples_, static_cast<std::size_t>(samples_)};
  }
  /// Copy holding only the listed samples.
  SampleMatrix subset(std::span<const int> rows) const;

 private:
  int samples_ = 0;
  int dimension_ = 0;
  std::vector<double> values_;
  std::vector<std::int32_t> order_;
};

struct StumpFit {
  Stump stump;
  double error = 0.0;  // weighted 0/1 error
};

/// Minimum weighted-error stump. Candidate thresholds are midpoints between consecutive
/// distinct values of a feature plus one sentinel below the minimum and one above the
/// maximum. Ties go to the lower feature index, then the lower threshold, then polarity +1.
StumpFit fit_stump(const SampleMatrix& m, std::span<const int> labels, std::span<const double> weights);
Stump train_stump(std::span<const FeatureVector> xs, std::span<const int> labels, std::span<const double> weights);

/// Per-round diagnostics of train_strong.
struct BoostRound {
  double error = 0.0;       // clamped weighted error of the chosen stump
  double alpha = 0.0;
  double weight_sum = 0.0;  // sum of sample weights after renormalisation
};
using BoostTrace = std::vector<BoostRound>;

inline constexpr double kMinBoostError = 1e-10;

StrongClassifier train_strong(const SampleMatrix& m, std::span<const int> labels, int rounds,
                              BoostTrace* trace = nullptr);
StrongClassifier train_strong(std::span<const FeatureVector> xs, std::span<const int> labels, int rounds,
                              BoostTrace* trace = nullptr);

/// Sets stage_threshold to the largest value that still lets at least a min_hit_rate fraction
/// of the positive scores through (score >= threshold).
StrongClassifier calibrate_stage(StrongClassifier h, std::span<const double> positive_scores, double min_hit_rate);

struct CascadeModel {
  DetectorLayout layout;
  RankTable rank_table;
  std::vector<StrongClassifier> stages;

  void write(std::ostream& os) const;
  static CascadeModel read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static CascadeModel load(const std::filesystem::path& path);

  friend bool operator==(const CascadeModel&, const CascadeModel&) = default;
};

struct CascadeTrainOptions {
  DetectorLayout layout;
  int stages = 5;
  double min_hit_rate = 0.995;
  /// Stumps in stage s (1-based). Defaults to 2 * s.
  std::function<int(int)> rounds_for_stage;
  /// Optional stream of fresh negative crops (bootstrapping). Before each stage after the
  /// first, the negative set is topped up to its initial size with drawn crops that the
  /// cascade trained so far still accepts. Draws per stage are capped by max_source_draws.
  std::function<Frame()> negative_source;
  std::size_t max_source_draws = 1'000'000;
};

struct StageLog {
  int stage = 0;
  int rounds = 0;
  int positives = 0;
  int negatives = 0;
  double hit_rate = 0.0;             // on the positives the stage was trained with
  double false_positive_rate = 0.0;  // on the negatives the stage was trained with
  int bootstrapped = 0;              // negatives added from negative_source before this stage
};

/// Trains a cascade on window-sized grayscale crops.
CascadeModel train_cascade(std::span<const Frame> positives, std::span<const Frame> negatives,
                           const CascadeTrainOptions& options, std::vector<StageLog>* log = nullptr);

/// Counts of MB-LBP codes of every layout geometry over whole crops; input to build_rank_table.
CodeCounts collect_codes(const DetectorLayout& layout, std::span<const Frame> crops);

struct WindowResult {
  bool accepted = true;
  double score = 0.0;
  int stages_evaluated = 0;
};

/// Any callable double(int feature_index).
template <typename Source>
WindowResult evaluate_cascade(const CascadeModel& model, Source&& value_of) {
  WindowResult result;
  for (const auto& stage : model.stages) {
    double score = 0.0;
    for (const auto& ws : stage.stumps) score += ws.alpha * ws.stump.classify(value_of(ws.stump.feature_index));
    ++result.stages_evaluated;
    result.score = score;
    if (score < stage.stage_threshold) {
      result.accepted = false;
      return result;
    }
  }
  return result;
}

/// Runs the cascade on one window with early rejection.
WindowResult classify_window(const CascadeModel& model, const IntegralImage& ii, const Rect& window);

/// Per-frame cache of rank-bin maps, one per scaled block geometry, so that repeated
/// windows read precomputed codes instead of re-evaluating block sums.
class FrameFeatureCache {
 public:
  FrameFeatureCache(const IntegralImage& ii, const RankTable& rt) : ii_(&ii), rt_(&rt) {}

  /// Normalised count of `bin` among anchors of g inside region; identical to the
  /// corresponding compute_features component.
  double bin_fraction(const Rect& region, BlockGeometry g, int bin);

 private:
  struct BinMap {
    BlockGeometry g;
    int cols = 0;
    int rows = 0;
    std::vector<std::uint8_t> bins;
  };
  const BinMap& map_for(BlockGeometry g);

  const IntegralImage* ii_;
  const RankTable* rt_;
  std::vector<BinMap> maps_;
};

struct Detection {
  Rect rect;
  double score = 0.0;
  int cluster_count = 1;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct RawHit {
  Rect rect;
  double score = 0.0;
};

/// Greedy clustering: a hit joins the existing cluster whose running mean rectangle has
/// the highest IoU with it, if that IoU >= 0.5; otherwise it starts a new cluster. Clusters
/// whose mean rectangles then overlap by IoU >= 0.5 are fused (earliest pair first).
/// Clusters with fewer than min_cluster_count members are dropped.
std::vector<Detection> cluster_hits(std::span<const RawHit> hits, int min_cluster_count);

struct DetectParams {
  std::vector<double> scales{1.0, 1.25};
  int stride = 2;
  int min_cluster_count = 2;
};

/// Accepted windows of every scale, in scale, row, column order.
std::vector<RawHit> scan_windows(const CascadeModel& model, const Frame& frame, const DetectParams& params);
std::vector<Detection> detect(const CascadeModel& model, const Frame& frame, const DetectParams& params);

}  // namespace vehicount
