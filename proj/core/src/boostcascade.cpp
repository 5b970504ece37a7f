#include "vehicount/boostcascade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "vehicount/error.hpp"

namespace vehicount {

void DetectorLayout::validate() const {
  if (grid < 1) throw DomainError("layout: grid must be positive");
  if (geometries.empty()) throw DomainError("layout: no block geometries");
  if (window_w < 1 || window_h < 1) throw DomainError("layout: empty window");
  const int largest = *std::max_element(geometries.begin(), geometries.end());
  if (*std::min_element(geometries.begin(), geometries.end()) < 1) throw DomainError("layout: block size must be >= 1");
  if (window_w / grid < 3 * largest || window_h / grid < 3 * largest)
    throw DomainError("layout: grid cell smaller than the largest block footprint");
}

WindowGeometry window_geometry(const DetectorLayout& layout, const Rect& window) {
  const int cell_w = window.w / layout.grid;
  const int cell_h = window.h / layout.grid;
  if (cell_w < 3 || cell_h < 3) throw DomainError("window too small for the detector grid");

  WindowGeometry wg;
  wg.cells.reserve(static_cast<std::size_t>(layout.grid) * layout.grid);
  for (int j = 0; j < layout.grid; ++j)
    for (int i = 0; i < layout.grid; ++i) wg.cells.push_back(Rect{window.x + i * cell_w, window.y + j * cell_h, cell_w, cell_h});

  const double sx = static_cast<double>(window.w) / layout.window_w;
  const double sy = static_cast<double>(window.h) / layout.window_h;
  for (const int g : layout.geometries) {
    const int gx = static_cast<int>(std::clamp<long long>(round_half_away(g * sx), 1, cell_w / 3));
    const int gy = static_cast<int>(std::clamp<long long>(round_half_away(g * sy), 1, cell_h / 3));
    wg.blocks.push_back(BlockGeometry{gx, gy});
  }
  return wg;
}

namespace {

struct FeatureAddress {
  int cell;
  int geometry;
  int bin;
};

FeatureAddress decode(int feature_index, int geometries) {
  return {feature_index / (geometries * kRankBins), (feature_index / kRankBins) % geometries, feature_index % kRankBins};
}

}  // namespace

FeatureVector compute_features(const DetectorLayout& layout, const RankTable& rt, const IntegralImage& ii,
                               const Rect& window) {
  if (!ii.contains(window)) throw DomainError("compute_features: window out of bounds");
  const WindowGeometry wg = window_geometry(layout, window);
  FeatureVector x;
  x.reserve(static_cast<std::size_t>(layout.dimension()));
  for (const Rect& cell : wg.cells) {
    for (const BlockGeometry& g : wg.blocks) {
      const Histogram hist = mb_lbp_histogram(ii, cell, g, rt);
      const double sites = static_cast<double>(mb_lbp_site_count(cell, g));
      for (const auto count : hist) x.push_back(count / sites);
    }
  }
  return x;
}

double feature_value(const DetectorLayout& layout, const RankTable& rt, const IntegralImage& ii,
                     const WindowGeometry& wg, int feature_index) {
  if (feature_index < 0 || feature_index >= layout.dimension()) throw DomainError("feature index out of range");
  const auto [cell_index, geometry, bin] = decode(feature_index, static_cast<int>(layout.geometries.size()));
  const Rect& cell = wg.cells[cell_index];
  const BlockGeometry g = wg.blocks[geometry];
  const int last_x = cell.right() - g.footprint_w();
  const int last_y = cell.bottom() - g.footprint_h();
  std::uint32_t count = 0;
  for (int y = cell.y; y <= last_y; ++y)
    for (int x = cell.x; x <= last_x; ++x) count += rt.bin(mb_lbp_code_unchecked(ii, x, y, g.cell_w, g.cell_h)) == bin;
  return count / static_cast<double>(mb_lbp_site_count(cell, g));
}

int weak_classify(const Stump& s, std::span<const double> x) {
  if (s.feature_index < 0 || static_cast<std::size_t>(s.feature_index) >= x.size())
    throw DomainError("weak_classify: feature index out of range");
  return s.classify(x[static_cast<std::size_t>(s.feature_index)]);
}

StrongResult strong_classify(const StrongClassifier& h, std::span<const double> x) {
  StrongResult r;
  for (const auto& ws : h.stumps) r.score += ws.alpha * weak_classify(ws.stump, x);
  r.label = r.score >= h.stage_threshold ? 1 : -1;
  return r;
}

// ---------------------------------------------------------------------------
// Training

SampleMatrix::SampleMatrix(std::span<const FeatureVector> xs) : samples_(static_cast<int>(xs.size())) {
  if (xs.empty()) throw DomainError("SampleMatrix: no samples");
  dimension_ = static_cast<int>(xs.front().size());
  for (const auto& x : xs)
    if (static_cast<int>(x.size()) != dimension_) throw DomainError("SampleMatrix: inconsistent dimensionality");

  values_.resize(static_cast<std::size_t>(dimension_) * samples_);
  order_.resize(values_.size());
  for (int f = 0; f < dimension_; ++f) {
    double* col = &values_[static_cast<std::size_t>(f) * samples_];
    for (int i = 0; i < samples_; ++i) col[i] = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];
    std::int32_t* ord = &order_[static_cast<std::size_t>(f) * samples_];
    std::iota(ord, ord + samples_, 0);
    std::stable_sort(ord, ord + samples_, [col](std::int32_t a, std::int32_t b) { return col[a] < col[b]; });
  }
}

SampleMatrix SampleMatrix::subset(std::span<const int> rows) const {
  std::vector<std::int32_t> remap(static_cast<std::size_t>(samples_), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= samples_) throw DomainError("SampleMatrix::subset: row out of range");
    remap[static_cast<std::size_t>(rows[k])] = static_cast<std::int32_t>(k);
  }
  SampleMatrix out;
  out.samples_ = static_cast<int>(rows.size());
  out.dimension_ = dimension_;
  out.values_.resize(static_cast<std::size_t>(dimension_) * out.samples_);
  out.order_.reserve(out.values_.size());
  for (int f = 0; f < dimension_; ++f) {
    for (std::size_t k = 0; k < rows.size(); ++k)
      out.values_[static_cast<std::size_t>(f) * out.samples_ + k] = value(f, rows[k]);
    // Filtering the parent order keeps it sorted (and stable).
    for (const std::int32_t i : sorted(f))
      if (remap[static_cast<std::size_t>(i)] >= 0) out.order_.push_back(remap[static_cast<std::size_t>(i)]);
  }
  return out;
}

namespace {

void check_training_input(const SampleMatrix& m, std::span<const int> labels, std::span<const double> weights) {
  if (m.samples() == 0) throw DomainError("training: no samples");
  if (labels.size() != static_cast<std::size_t>(m.samples())) throw DomainError("training: label count mismatch");
  if (weights.size() != labels.size()) throw DomainError("training: weight count mismatch");
  for (const int y : labels)
    if (y != 1 && y != -1) throw DomainError("training: labels must be +1 or -1");
  for (const double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("training: weights must be finite and nonnegative");
}

}  // namespace

StumpFit fit_stump(const SampleMatrix& m, std::span<const int> labels, std::span<const double> weights) {
  check_training_input(m, labels, weights);
  double total_pos = 0.0;
  double total_neg = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] > 0 ? total_pos : total_neg) += weights[i];
  const double total = total_pos + total_neg;
  if (!(total > 0.0)) throw DomainError("fit_stump: weights sum to zero");
  const double eps = 1e-12 * total;

  StumpFit best;
  best.error = std::numeric_limits<double>::infinity();
  auto consider = [&](int f, double threshold, double pos_below, double neg_below) {
    // polarity +1 predicts -1 below the threshold
    const double err_plus = pos_below + (total_neg - neg_below);
    const double err_minus = neg_below + (total_pos - pos_below);
    if (err_plus < best.error - eps) best = {Stump{f, threshold, 1}, err_plus};
    if (err_minus < best.error - eps) best = {Stump{f, threshold, -1}, err_minus};
  };

  const int n = m.samples();
  for (int f = 0; f < m.dimension(); ++f) {
    const auto order = m.sorted(f);
    const double vmin = m.value(f, order.front());
    const double vmax = m.value(f, order.back());
    consider(f, vmin - 1.0, 0.0, 0.0);
    double pos_below = 0.0;
    double neg_below = 0.0;
    for (int k = 0; k < n;) {
      const double v = m.value(f, order[static_cast<std::size_t>(k)]);
      while (k < n && m.value(f, order[static_cast<std::size_t>(k)]) == v) {
        const int i = order[static_cast<std::size_t>(k)];
        (labels[static_cast<std::size_t>(i)] > 0 ? pos_below : neg_below) += weights[static_cast<std::size_t>(i)];
        ++k;
      }
      if (k < n) consider(f, 0.5 * (v + m.value(f, order[static_cast<std::size_t>(k)])), pos_below, neg_below);
    }
    consider(f, vmax + 1.0, total_pos, total_neg);
  }
  best.error /= total;
  return best;
}

Stump train_stump(std::span<const FeatureVector> xs, std::span<const int> labels, std::span<const double> weights) {
  return fit_stump(SampleMatrix(xs), labels, weights).stump;
}

StrongClassifier train_strong(const SampleMatrix& m, std::span<const int> labels, int rounds, BoostTrace* trace) {
  if (rounds < 1) throw DomainError("train_strong: rounds must be >= 1");
  const int n = m.samples();
  if (labels.size() != static_cast<std::size_t>(n)) throw DomainError("train_strong: label count mismatch");
  const auto n_pos = std::count(labels.begin(), labels.end(), 1);
  const auto n_neg = std::count(labels.begin(), labels.end(), -1);
  if (n_pos == 0 || n_neg == 0) throw DomainError("train_strong: both classes must be present");
  if (n_pos + n_neg != n) throw DomainError("train_strong: labels must be +1 or -1");

  // Each class starts with half of the total weight.
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] > 0 ? 0.5 / static_cast<double>(n_pos)
                                                                              : 0.5 / static_cast<double>(n_neg);

  StrongClassifier h;
  for (int t = 0; t < rounds; ++t) {
    const StumpFit fit = fit_stump(m, labels, w);
    const double err = std::clamp(fit.error, kMinBoostError, 1.0 - kMinBoostError);
    const double alpha = 0.5 * std::log((1.0 - err) / err);
    h.stumps.push_back({fit.stump, alpha});

    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const int out = fit.stump.classify(m.value(fit.stump.feature_index, i));
      double& wi = w[static_cast<std::size_t>(i)];
      wi *= std::exp(-alpha * labels[static_cast<std::size_t>(i)] * out);
      sum += wi;
    }
    double check = 0.0;
    for (double& wi : w) {
      wi /= sum;
      check += wi;
    }
    if (trace) trace->push_back({err, alpha, check});
  }
  return h;
}

StrongClassifier train_strong(std::span<const FeatureVector> xs, std::span<const int> labels, int rounds,
                              BoostTrace* trace) {
  return train_strong(SampleMatrix(xs), labels, rounds, trace);
}

StrongClassifier calibrate_stage(StrongClassifier h, std::span<const double> positive_scores, double min_hit_rate) {
  if (positive_scores.empty()) throw DomainError("calibrate_stage: no positive scores");
  if (!(min_hit_rate > 0.0 && min_hit_rate <= 1.0)) throw DomainError("calibrate_stage: hit rate must be in (0, 1]");
  std::vector<double> sorted(positive_scores.begin(), positive_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<long long>(sorted.size());
  // Smallest pass count meeting the hit rate; the 1e-9 absorbs representation error in rate * n.
  const long long must_pass = std::clamp<long long>(
      static_cast<long long>(std::ceil(min_hit_rate * static_cast<double>(n) - 1e-9)), 1, n);
  const double cutoff = sorted[static_cast<std::size_t>(n - must_pass)];
  h.stage_threshold = std::nextafter(cutoff, -std::numeric_limits<double>::infinity());
  return h;
}

CodeCounts collect_codes(const DetectorLayout& layout, std::span<const Frame> crops) {
  CodeCounts counts{};
  for (const Frame& crop : crops) {
    const IntegralImage ii(crop);
    const Rect whole{0, 0, crop.width(), crop.height()};
    for (const int g : layout.geometries) accumulate_mb_lbp_codes(ii, whole, BlockGeometry{g, g}, counts);
  }
  return counts;
}

CascadeModel train_cascade(std::span<const Frame> positives, std::span<const Frame> negatives,
                           const CascadeTrainOptions& options, std::vector<StageLog>* log) {
  const DetectorLayout& layout = options.layout;
  layout.validate();
  if (positives.empty() || negatives.empty()) throw DomainError("train_cascade: empty crop set");
  if (options.stages < 1) throw DomainError("train_cascade: need at least one stage");
  for (const auto* set : {&positives, &negatives})
    for (const Frame& crop : *set)
      if (crop.width() != layout.window_w || crop.height() != layout.window_h)
        throw DomainError("train_cascade: crop size does not match the detector window");

  std::vector<Frame> all(positives.begin(), positives.end());
  all.insert(all.end(), negatives.begin(), negatives.end());

  CascadeModel model;
  model.layout = layout;
  model.rank_table = build_rank_table(collect_codes(layout, all));

  std::vector<FeatureVector> xs;
  xs.reserve(all.size());
  const Rect whole{0, 0, layout.window_w, layout.window_h};
  for (const Frame& crop : all) xs.push_back(compute_features(layout, model.rank_table, IntegralImage(crop), whole));

  const int n_pos = static_cast<int>(positives.size());
  std::vector<int> pos_rows(static_cast<std::size_t>(n_pos));
  std::iota(pos_rows.begin(), pos_rows.end(), 0);
  std::vector<int> neg_rows(negatives.size());
  std::iota(neg_rows.begin(), neg_rows.end(), n_pos);
  const std::size_t neg_target = negatives.size();

  for (int s = 1; s <= options.stages; ++s) {
    int added = 0;
    if (s > 1 && options.negative_source) {
      for (std::size_t draws = 0; neg_rows.size() < neg_target && draws < options.max_source_draws; ++draws) {
        const Frame crop = options.negative_source();
        if (crop.width() != layout.window_w || crop.height() != layout.window_h)
          throw DomainError("train_cascade: negative source crop size does not match the detector window");
        const IntegralImage ii(crop);
        if (!classify_window(model, ii, whole).accepted) continue;
        neg_rows.push_back(static_cast<int>(xs.size()));
        xs.push_back(compute_features(layout, model.rank_table, ii, whole));
        ++added;
      }
    }
    if (neg_rows.empty()) break;

    const int rounds = options.rounds_for_stage ? options.rounds_for_stage(s) : 2 * s;
    std::vector<int> rows = pos_rows;
    rows.insert(rows.end(), neg_rows.begin(), neg_rows.end());
    std::vector<int> labels(rows.size(), -1);
    std::fill_n(labels.begin(), pos_rows.size(), 1);

    std::vector<FeatureVector> stage_xs;
    stage_xs.reserve(rows.size());
    for (const int r : rows) stage_xs.push_back(xs[static_cast<std::size_t>(r)]);
    StrongClassifier stage = train_strong(SampleMatrix(stage_xs), labels, rounds);

    auto score_of = [&](int row) { return strong_classify(stage, xs[static_cast<std::size_t>(row)]).score; };
    std::vector<double> pos_scores;
    pos_scores.reserve(pos_rows.size());
    for (const int r : pos_rows) pos_scores.push_back(score_of(r));
    stage = calibrate_stage(std::move(stage), pos_scores, options.min_hit_rate);

    std::vector<int> pos_kept;
    std::vector<int> neg_kept;
    for (const int r : pos_rows)
      if (score_of(r) >= stage.stage_threshold) pos_kept.push_back(r);
    for (const int r : neg_rows)
      if (score_of(r) >= stage.stage_threshold) neg_kept.push_back(r);

    if (log) {
      log->push_back(StageLog{s, rounds, static_cast<int>(pos_rows.size()), static_cast<int>(neg_rows.size()),
                              static_cast<double>(pos_kept.size()) / static_cast<double>(pos_rows.size()),
                              static_cast<double>(neg_kept.size()) / static_cast<double>(neg_rows.size()), added});
    }
    model.stages.push_back(std::move(stage));
    pos_rows = std::move(pos_kept);
    neg_rows = std::move(neg_kept);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_real(const std::string& token) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    throw FormatError("model: bad number '" + token + "'");
  }
  if (used != token.size()) throw FormatError("model: bad number '" + token + "'");
  return v;
}

std::string join_ints(const std::vector<int>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + std::to_string(values[i]);
  return s;
}

}  // namespace

void CascadeModel::write(std::ostream& os) const {
  os << "mblbp-cascade v1 " << layout.window_w << ' ' << layout.window_h << ' ' << layout.grid << ' '
     << join_ints(layout.geometries) << ' ' << layout.dimension() << ' ' << stages.size() << '\n';
  rank_table.write(os);
  for (const auto& stage : stages) {
    os << "stage " << stage.stumps.size() << ' ' << format_real(stage.stage_threshold) << '\n';
    for (const auto& ws : stage.stumps)
      os << ws.stump.feature_index << ' ' << format_real(ws.stump.threshold) << ' ' << ws.stump.polarity << ' '
         << format_real(ws.alpha) << '\n';
  }
}

CascadeModel CascadeModel::read(std::istream& is) {
  std::string magic;
  std::string version;
  std::string geometries;
  int dimension = 0;
  std::size_t stage_count = 0;
  CascadeModel model;
  if (!(is >> magic >> version) || magic != "mblbp-cascade" || version != "v1")
    throw FormatError("model: not an mblbp-cascade v1 file");
  if (!(is >> model.layout.window_w >> model.layout.window_h >> model.layout.grid >> geometries >> dimension >>
        stage_count))
    throw FormatError("model: truncated header");
  model.layout.geometries.clear();
  std::stringstream gs(geometries);
  for (std::string item; std::getline(gs, item, ',');) {
    try {
      model.layout.geometries.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw FormatError("model: bad geometry list '" + geometries + "'");
    }
  }
  try {
    model.layout.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
  if (dimension != model.layout.dimension()) throw FormatError("model: feature dimension does not match layout");
  model.rank_table = RankTable::read(is);

  for (std::size_t s = 0; s < stage_count; ++s) {
    std::string tag;
    std::size_t count = 0;
    std::string threshold;
    if (!(is >> tag >> count >> threshold) || tag != "stage") throw FormatError("model: bad stage header");
    StrongClassifier stage;
    stage.stage_threshold = parse_real(threshold);
    for (std::size_t t = 0; t < count; ++t) {
      WeightedStump ws;
      std::string thr;
      std::string alpha;
      if (!(is >> ws.stump.feature_index >> thr >> ws.stump.polarity >> alpha)) throw FormatError("model: truncated stage");
      if (ws.stump.feature_index < 0 || ws.stump.feature_index >= dimension) throw FormatError("model: feature index out of range");
      if (ws.stump.polarity != 1 && ws.stump.polarity != -1) throw FormatError("model: bad polarity");
      ws.stump.threshold = parse_real(thr);
      ws.alpha = parse_real(alpha);
      stage.stumps.push_back(ws);
    }
    model.stages.push_back(std::move(stage));
  }
  return model;
}

void CascadeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write(out);
}

CascadeModel CascadeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read(in);
}

// ---------------------------------------------------------------------------
// Detection

WindowResult classify_window(const CascadeModel& model, const IntegralImage& ii, const Rect& window) {
  if (!ii.contains(window)) throw DomainError("classify_window: window out of bounds");
  if (model.stages.empty()) return {};
  const WindowGeometry wg = window_geometry(model.layout, window);
  return evaluate_cascade(model, [&](int index) { return feature_value(model.layout, model.rank_table, ii, wg, index); });
}

const FrameFeatureCache::BinMap& FrameFeatureCache::map_for(BlockGeometry g) {
  for (const auto& m : maps_)
    if (m.g == g) return m;
  BinMap m;
  m.g = g;
  m.cols = std::max(0, ii_->width() - g.footprint_w() + 1);
  m.rows = std::max(0, ii_->height() - g.footprint_h() + 1);
  m.bins.resize(static_cast<std::size_t>(m.cols) * m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      m.bins[static_cast<std::size_t>(y) * m.cols + x] = rt_->bin(mb_lbp_code_unchecked(*ii_, x, y, g.cell_w, g.cell_h));
  maps_.push_back(std::move(m));
  return maps_.back();
}

double FrameFeatureCache::bin_fraction(const Rect& region, BlockGeometry g, int bin) {
  const BinMap& m = map_for(g);
  const int nx = region.w - g.footprint_w() + 1;
  const int ny = region.h - g.footprint_h() + 1;
  std::uint32_t count = 0;
  for (int y = region.y; y < region.y + ny; ++y) {
    const std::uint8_t* row = &m.bins[static_cast<std::size_t>(y) * m.cols + region.x];
    for (int x = 0; x < nx; ++x) count += row[x] == bin;
  }
  return count / static_cast<double>(static_cast<long long>(nx) * ny);
}

namespace {

struct MeanRect {
  double x, y, w, h;
};

double real_iou(const MeanRect& a, const MeanRect& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

struct Cluster {
  double sx = 0, sy = 0, sw = 0, sh = 0;
  int members = 0;
  double best_score = -std::numeric_limits<double>::infinity();

  MeanRect mean() const { return {sx / members, sy / members, sw / members, sh / members}; }
  double iou(const Rect& r) const {
    return real_iou(mean(), {static_cast<double>(r.x), static_cast<double>(r.y), static_cast<double>(r.w),
                             static_cast<double>(r.h)});
  }
  void add(const RawHit& hit) {
    sx += hit.rect.x;
    sy += hit.rect.y;
    sw += hit.rect.w;
    sh += hit.rect.h;
    ++members;
    best_score = std::max(best_score, hit.score);
  }
  void absorb(const Cluster& o) {
    sx += o.sx;
    sy += o.sy;
    sw += o.sw;
    sh += o.sh;
    members += o.members;
    best_score = std::max(best_score, o.best_score);
  }
};

}  // namespace

std::vector<Detection> cluster_hits(std::span<const RawHit> hits, int min_cluster_count) {
  std::vector<Cluster> clusters;
  for (const RawHit& hit : hits) {
    int best = -1;
    double best_iou = 0.5;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const double v = clusters[c].iou(hit.rect);
      if (v > best_iou || (v == best_iou && best < 0)) {
        best = static_cast<int>(c);
        best_iou = v;
      }
    }
    if (best < 0) {
      clusters.emplace_back();
      best = static_cast<int>(clusters.size()) - 1;
    }
    clusters[static_cast<std::size_t>(best)].add(hit);
  }

  // Greedy assignment is order dependent: two clusters can end up describing the same
  // object. Fuse the earliest pair whose means overlap by IoU >= 0.5 until none is left.
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t a = 0; a < clusters.size() && !merged; ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        if (real_iou(clusters[a].mean(), clusters[b].mean()) >= 0.5) {
          clusters[a].absorb(clusters[b]);
          clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(b));
          merged = true;
          break;
        }
      }
    }
  }

  std::vector<Detection> out;
  for (const Cluster& c : clusters) {
    if (c.members < min_cluster_count) continue;
    const double n = c.members;
    Detection d;
    d.rect = Rect{static_cast<int>(round_half_away(c.sx / n)), static_cast<int>(round_half_away(c.sy / n)),
                  static_cast<int>(round_half_away(c.sw / n)), static_cast<int>(round_half_away(c.sh / n))};
    d.score = c.best_score;
    d.cluster_count = c.members;
    out.push_back(d);
  }
  return out;
}

std::vector<RawHit> scan_windows(const CascadeModel& model, const Frame& frame, const DetectParams& params) {
  if (params.stride < 1) throw DomainError("detect: stride must be >= 1");
  for (std::size_t i = 0; i < params.scales.size(); ++i) {
    if (params.scales[i] < 1.0) throw DomainError("detect: scales must be >= 1");
    if (i > 0 && params.scales[i] < params.scales[i - 1]) throw DomainError("detect: scales must be ascending");
  }

  const IntegralImage ii(frame);
  FrameFeatureCache cache(ii, model.rank_table);
  const int geometries = static_cast<int>(model.layout.geometries.size());
  std::vector<RawHit> hits;

  for (const double scale : params.scales) {
    const int ww = static_cast<int>(round_half_away(model.layout.window_w * scale));
    const int wh = static_cast<int>(round_half_away(model.layout.window_h * scale));
    if (ww > frame.width() || wh > frame.height()) continue;
    const WindowGeometry base = window_geometry(model.layout, Rect{0, 0, ww, wh});

    for (int y = 0; y + wh <= frame.height(); y += params.stride) {
      for (int x = 0; x + ww <= frame.width(); x += params.stride) {
        const WindowResult r = evaluate_cascade(model, [&](int index) {
          const auto [cell_index, geometry, bin] = decode(index, geometries);
          Rect cell = base.cells[static_cast<std::size_t>(cell_index)];
          cell.x += x;
          cell.y += y;
          return cache.bin_fraction(cell, base.blocks[static_cast<std::size_t>(geometry)], bin);
        });
        if (r.accepted) hits.push_back(RawHit{Rect{x, y, ww, wh}, r.score});
      }
    }
  }
  return hits;
}

std::vector<Detection> detect(const CascadeModel& model, const Frame& frame, const DetectParams& params) {
  const auto hits = scan_windows(model, frame, params);
  return cluster_hits(hits, params.min_cluster_count);
}

}  // namespace vehicount
