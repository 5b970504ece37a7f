#include "vehicount/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "vehicount/error.hpp"

namespace vehicount {

namespace {

std::string join_doubles(const std::vector<double>& v) { return format_double_list(v); }

template <typename T>
std::string path_text(const T& p) {
  return p.generic_string();
}

Rect scale_rect_down(const Rect& r, int factor) {
  if (factor == 1) return r;
  const int x0 = r.x / factor;
  const int y0 = r.y / factor;
  const int x1 = (r.right() + factor - 1) / factor;
  const int y1 = (r.bottom() + factor - 1) / factor;
  return {x0, y0, std::max(1, x1 - x0), std::max(1, y1 - y0)};
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool is_number(const std::string& s) {
  double v = 0;
  try {
    v = parse_double("", s);
  } catch (const ConfigError&) {
    return false;
  }
  return std::isfinite(v);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (key == "detector") {
    if (value == "bgsub") detector = CountingMode::kBackgroundSubtraction;
    else if (value == "feature") detector = CountingMode::kFeature;
    else throw ConfigError("detector: expected bgsub or feature, got '" + value + "'");
  } else if (key == "tracker") {
    if (value == "ekf") tracker = TrackerMode::kEkf;
    else if (value == "none") tracker = TrackerMode::kNone;
    else throw ConfigError("tracker: expected ekf or none, got '" + value + "'");
  }
  else if (key == "resolution_factor") resolution_factor = parse_int(key, value);
  else if (key == "th") th = parse_double(key, value);
  else if (key == "learning_rate") learning_rate = parse_double(key, value);
  else if (key == "open_radius") open_radius = parse_int(key, value);
  else if (key == "min_area") min_area = parse_int(key, value);
  else if (key == "mhr") mhr = parse_double(key, value);
  else if (key == "stages") stages = parse_int(key, value);
  else if (key == "rounds") rounds = parse_int_list(key, value);
  else if (key == "mcc") mcc = parse_int(key, value);
  else if (key == "scales") scales = parse_double_list(key, value);
  else if (key == "stride") stride = parse_int(key, value);
  else if (key == "window_w") window_w = parse_int(key, value);
  else if (key == "window_h") window_h = parse_int(key, value);
  else if (key == "grid") grid = parse_int(key, value);
  else if (key == "geometries") geometries = parse_int_list(key, value);
  else if (key == "tfc") tfc = parse_int(key, value);
  else if (key == "phi_min") phi_min = parse_double(key, value);
  else if (key == "phi_max") phi_max = parse_double(key, value);
  else if (key == "distance_fraction") distance_fraction = parse_double(key, value);
  else if (key == "require_marker_overlap") require_marker_overlap = parse_bool(key, value);
  else if (key == "fps") fps = parse_double(key, value);
  else if (key == "gate") gate = parse_double(key, value);
  else if (key == "max_misses") max_misses = parse_int(key, value);
  else if (key == "q") q = parse_double_list(key, value);
  else if (key == "r") r = parse_double_list(key, value);
  else if (key == "p0") p0 = parse_double_list(key, value);
  else if (key == "eval_tol") eval_tol = parse_int(key, value);
  else if (key == "markers") markers = value;
  else if (key == "scene") scene = value;
  else if (key == "model") model = value;
  else if (key == "output") output = value;
  else if (key == "counted_events") counted_events = value;
  else if (key == "train_scene") train_scene = value;
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "train_positives") train_positives = parse_int(key, value);
  else if (key == "train_negatives") train_negatives = parse_int(key, value);
  else if (key == "warmup") warmup = parse_int(key, value);
  else if (key == "bench_frames") bench_frames = parse_int(key, value);
  else if (key == "grid_spec") grid_spec = value;
  else throw ConfigError("unknown config key '" + key + "'");
}

PipelineConfig PipelineConfig::from_key_values(const KeyValues& kv) {
  PipelineConfig c;
  for (const auto& [k, v] : kv) c.set(k, v);
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) { return from_key_values(load_key_values(path)); }

std::string PipelineConfig::to_text() const {
  std::ostringstream os;
  os << "detector = " << (detector == CountingMode::kFeature ? "feature" : "bgsub") << "\n"
     << "tracker = " << (tracker == TrackerMode::kEkf ? "ekf" : "none") << "\n"
     << "resolution_factor = " << resolution_factor << "\n"
     << "th = " << format_double(th) << "\n"
     << "learning_rate = " << format_double(learning_rate) << "\n"
     << "open_radius = " << open_radius << "\n"
     << "min_area = " << min_area << "\n"
     << "mhr = " << format_double(mhr) << "\n"
     << "stages = " << stages << "\n"
     << "rounds = " << format_int_list(rounds) << "\n"
     << "mcc = " << mcc << "\n"
     << "scales = " << join_doubles(scales) << "\n"
     << "stride = " << stride << "\n"
     << "window_w = " << window_w << "\n"
     << "window_h = " << window_h << "\n"
     << "grid = " << grid << "\n"
     << "geometries = " << format_int_list(geometries) << "\n"
     << "tfc = " << tfc << "\n"
     << "phi_min = " << format_double(phi_min) << "\n"
     << "phi_max = " << format_double(phi_max) << "\n"
     << "distance_fraction = " << format_double(distance_fraction) << "\n"
     << "require_marker_overlap = " << (require_marker_overlap ? "true" : "false") << "\n"
     << "fps = " << format_double(fps) << "\n"
     << "gate = " << format_double(gate) << "\n"
     << "max_misses = " << max_misses << "\n"
     << "q = " << join_doubles(q) << "\n"
     << "r = " << join_doubles(r) << "\n"
     << "p0 = " << join_doubles(p0) << "\n"
     << "eval_tol = " << eval_tol << "\n"
     << "markers = " << markers << "\n"
     << "scene = " << path_text(scene) << "\n"
     << "model = " << path_text(model) << "\n"
     << "output = " << path_text(output) << "\n"
     << "counted_events = " << path_text(counted_events) << "\n"
     << "train_scene = " << path_text(train_scene) << "\n"
     << "seed = " << seed << "\n"
     << "train_positives = " << train_positives << "\n"
     << "train_negatives = " << train_negatives << "\n"
     << "warmup = " << warmup << "\n"
     << "bench_frames = " << bench_frames << "\n"
     << "grid_spec = " << grid_spec << "\n";
  return os.str();
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (resolution_factor < 1) fail("resolution_factor must be >= 1");
  if (!(th > 0)) fail("th must be positive");
  if (!(learning_rate > 0 && learning_rate < 1)) fail("learning_rate must lie in (0, 1)");
  if (open_radius < 0 || min_area < 1) fail("open_radius must be >= 0 and min_area >= 1");
  if (!(mhr > 0 && mhr <= 1)) fail("mhr must lie in (0, 1]");
  if (stages < 1) fail("stages must be >= 1");
  if (!rounds.empty() && rounds.size() != static_cast<std::size_t>(stages)) fail("rounds needs one entry per stage");
  for (const int t : rounds)
    if (t < 1) fail("rounds entries must be >= 1");
  if (mcc < 1) fail("mcc must be >= 1");
  if (scales.empty()) fail("scales must not be empty");
  for (std::size_t i = 0; i < scales.size(); ++i)
    if (!(scales[i] >= 1) || (i && !(scales[i] > scales[i - 1]))) fail("scales must be >= 1 and strictly ascending");
  if (stride < 1) fail("stride must be >= 1");
  try {
    layout().validate();
  } catch (const DomainError& e) {
    fail(e.what());
  }
  if (tfc < 0) fail("tfc must be >= 0");
  if (!(phi_min <= phi_max)) fail("phi_min must not exceed phi_max");
  if (!(distance_fraction >= 0)) fail("distance_fraction must be >= 0");
  if (!(fps > 0)) fail("fps must be positive");
  if (!(gate >= 0)) fail("gate must be >= 0");
  if (max_misses < 0) fail("max_misses must be >= 0");
  if (q.size() != 6 || r.size() != 2 || p0.size() != 6) fail("q and p0 need 6 values, r needs 2");
  for (const double v : q)
    if (!(v >= 0)) fail("q entries must be >= 0");
  for (const double v : r)
    if (!(v > 0)) fail("r entries must be positive");
  for (const double v : p0)
    if (!(v > 0)) fail("p0 entries must be positive");
  if (eval_tol < 0) fail("eval_tol must be >= 0");
  if (train_positives < 1 || train_negatives < 1) fail("train_positives and train_negatives must be >= 1");
  if (warmup < 0 || bench_frames < 1) fail("warmup must be >= 0 and bench_frames >= 1");
}

DetectorLayout PipelineConfig::layout() const { return {window_w, window_h, grid, geometries}; }

DetectParams PipelineConfig::detect_params() const { return {scales, stride, mcc}; }

CountingPolicy PipelineConfig::policy() const {
  return {detector, tfc, phi_min, phi_max, distance_fraction, require_marker_overlap};
}

TrackerParams PipelineConfig::tracker_params(int frame_w, int frame_h) const {
  TrackerParams p;
  p.mode = tracker;
  for (int i = 0; i < 6; ++i) {
    p.noise.process_per_second(i) = q[static_cast<std::size_t>(i)];
    p.noise.initial(i) = p0[static_cast<std::size_t>(i)];
  }
  p.noise.measurement = Eigen::Vector2d(r[0], r[1]);
  p.gate = gate > 0 ? gate : 0.25 * std::max(frame_w, frame_h);
  p.max_misses = max_misses;
  return p;
}

std::string bench_line(const BenchRecord& b) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "BENCH stage=%s frames=%zu mean_ms=%.3f p50_ms=%.3f p95_ms=%.3f", b.stage.c_str(),
                b.frames, b.mean_ms, b.p50_ms, b.p95_ms);
  return buf;
}

BenchRecord summarize_timings(std::string stage, std::span<const double> ms) {
  BenchRecord b;
  b.stage = std::move(stage);
  b.frames = ms.size();
  if (ms.empty()) return b;
  std::vector<double> sorted(ms.begin(), ms.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0;
  for (const double v : sorted) sum += v;
  b.mean_ms = sum / static_cast<double>(sorted.size());
  // Nearest-rank percentiles.
  auto rank = [&](double p) {
    const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(k, 1, sorted.size()) - 1];
  };
  b.p50_ms = rank(0.50);
  b.p95_ms = rank(0.95);
  return b;
}

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineInputs& inputs, const PipelineObserver* observer,
                            std::size_t timing_warmup) {
  config.validate();
  const bool feature = config.detector == CountingMode::kFeature;
  if (feature) {
    if (inputs.model == nullptr) throw ConfigError("detector=feature needs a model");
    if (!(inputs.model->layout == config.layout()))
      throw DomainError("model window/layout does not match the configured detector layout");
  }

  PipelineResult result;
  const DetectParams dparams = config.detect_params();
  const CountingPolicy policy = config.policy();
  BackgroundModel background(config.learning_rate);
  std::optional<Tracker> tracker;
  MarkerSet markers;
  const double dt = 1.0 / config.fps;
  std::vector<double> t_detect, t_track, t_count, t_total;

  auto count_finished = [&](std::span<const Track> finished) {
    for (const Track& track : finished) {
      const CountDecision d = should_count(track, policy, markers, result.frame_w, result.frame_h);
      if (d.counted && d.marker) result.events.push_back({track.last_frame, *d.marker});
    }
  };

  for (std::size_t i = 0; i < inputs.frame_count; ++i) {
    const auto frame_index = static_cast<std::int64_t>(i);
    Frame frame = downscale(inputs.frame(i), config.resolution_factor);
    if (!tracker) {
      result.frame_w = frame.width();
      result.frame_h = frame.height();
      for (const Marker& m : inputs.markers) markers.push_back({scale_rect_down(m.rect, config.resolution_factor), m.lane});
      validate_markers(markers, result.frame_w, result.frame_h);
      tracker.emplace(config.tracker_params(result.frame_w, result.frame_h));
    } else if (frame.width() != result.frame_w || frame.height() != result.frame_h) {
      throw FormatError("frame " + std::to_string(i) + " has different dimensions");
    }

    const auto start = Clock::now();
    std::vector<Rect> rects;
    if (feature) {
      for (const Detection& d : detect(*inputs.model, frame, dparams)) rects.push_back(d.rect);
    } else if (!background.initialized()) {
      background.update(frame);
    } else {
      Mask mask = subtract(background, frame, config.th);
      background.update(frame);
      rects = extract_blobs(morphological_open(mask, config.open_radius), config.min_area);
    }
    const double detect_ms = ms_since(start);

    const auto track_start = Clock::now();
    const std::vector<Track> finished = tracker->step(rects, dt, frame_index);
    const double track_ms = ms_since(track_start);

    const auto count_start = Clock::now();
    count_finished(finished);
    const double count_ms = ms_since(count_start);
    const double total_ms = ms_since(start);

    if (i >= timing_warmup) {
      t_detect.push_back(detect_ms);
      t_track.push_back(track_ms);
      t_count.push_back(count_ms);
      t_total.push_back(total_ms);
    }
    if (observer && observer->on_detections) observer->on_detections(frame_index, rects);
    if (observer && observer->on_tracks) observer->on_tracks(frame_index, *tracker, finished);
  }
  if (tracker) {
    const std::vector<Track> rest = tracker->flush();
    count_finished(rest);
    if (observer && observer->on_tracks) observer->on_tracks(static_cast<std::int64_t>(inputs.frame_count), *tracker, rest);
  }

  std::stable_sort(result.events.begin(), result.events.end(), [](const CountEvent& a, const CountEvent& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.marker < b.marker;
  });
  result.report = make_report(result.events, inputs.truth, config.eval_tol, markers.size(),
                              static_cast<double>(inputs.frame_count) / config.fps);
  result.bench = {summarize_timings("detect", t_detect), summarize_timings("track", t_track),
                  summarize_timings("count", t_count), summarize_timings("total", t_total)};
  return result;
}

SceneData load_scene(const std::filesystem::path& dir, const std::string& marker_override) {
  if (!std::filesystem::is_directory(dir)) throw IoError("scene directory not found: " + dir.string());
  SceneData scene;
  const auto frames_dir = dir / "frames";
  for (std::size_t i = 0;; ++i) {
    const auto p = frame_path(frames_dir, i);
    if (!std::filesystem::exists(p)) break;
    scene.frames.push_back(load_pgm(p));
  }
  if (scene.frames.empty()) throw IoError("no frames found in " + frames_dir.string());

  if (!marker_override.empty()) {
    scene.markers = parse_markers(marker_override);
  } else if (std::filesystem::exists(dir / "scenario.cfg")) {
    scene.markers = ScenarioConfig::load(dir / "scenario.cfg").marker_set();
  } else {
    throw ConfigError("no markers configured and no scenario.cfg in " + dir.string());
  }
  if (std::filesystem::exists(dir / "gt_events.txt"))
    for (const GtEvent& e : read_gt_events(dir / "gt_events.txt")) scene.truth.push_back({e.frame, e.marker});
  return scene;
}

PipelineInputs scene_inputs(const SceneData& scene, const CascadeModel* model) {
  PipelineInputs in;
  in.frame_count = scene.frames.size();
  in.frame = [&scene](std::size_t i) { return scene.frames[i]; };
  in.markers = scene.markers;
  in.truth = scene.truth;
  in.model = model;
  return in;
}

ScenarioConfig training_scenario(const PipelineConfig& config) {
  if (!config.train_scene.empty()) return ScenarioConfig::load(config.train_scene);
  ScenarioConfig s;
  s.seed = config.seed;
  s.background_seed = config.seed + 1;
  s.vehicles = 60;
  s.jitter = 1;
  return s;
}

CascadeModel train_model(const PipelineConfig& config, std::vector<StageLog>* log) {
  config.validate();
  const ScenarioConfig scenario = training_scenario(config);
  const TrainingSet set = generate_training_set(scenario, config.train_positives, config.train_negatives,
                                                config.window_w, config.window_h);
  NegativeSampler sampler(scenario, config.window_w, config.window_h);
  CascadeTrainOptions opts;
  opts.layout = config.layout();
  opts.stages = config.stages;
  opts.min_hit_rate = config.mhr;
  opts.negative_source = [&sampler] { return sampler.next(); };
  if (!config.rounds.empty())
    opts.rounds_for_stage = [&config](int s) { return config.rounds[static_cast<std::size_t>(s - 1)]; };
  return train_cascade(set.positives, set.negatives, opts, log);
}

CascadeModel obtain_model(const PipelineConfig& config) {
  return config.model.empty() ? train_model(config) : CascadeModel::load(config.model);
}

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineObserver* observer) {
  config.validate();
  if (config.scene.empty()) throw ConfigError("scene is not set");
  const SceneData scene = load_scene(config.scene, config.markers);
  std::optional<CascadeModel> model;
  if (config.detector == CountingMode::kFeature) model = obtain_model(config);
  return run_pipeline(config, scene_inputs(scene, model ? &*model : nullptr), observer);
}

GridSpec parse_grid(const std::string& text) {
  std::map<std::string, std::vector<std::string>> by_key;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ';');) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("grid entries need key=v1,v2: '" + item + "'");
    std::string key = item.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    if (key.empty()) throw ConfigError("grid entry with empty key");
    if (by_key.count(key)) throw ConfigError("grid key '" + key + "' given twice");
    std::vector<std::string> values;
    std::stringstream vs(item.substr(eq + 1));
    for (std::string v; std::getline(vs, v, ',');) {
      v.erase(0, v.find_first_not_of(" \t"));
      v.erase(v.find_last_not_of(" \t") + 1);
      if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw ConfigError("grid key '" + key + "' has no values");
    if (std::all_of(values.begin(), values.end(), is_number)) {
      std::stable_sort(values.begin(), values.end(),
                       [](const std::string& a, const std::string& b) { return parse_double("", a) < parse_double("", b); });
    } else {
      std::stable_sort(values.begin(), values.end());
    }
    by_key.emplace(std::move(key), std::move(values));
  }
  if (by_key.empty()) throw ConfigError("grid is empty");
  return GridSpec(by_key.begin(), by_key.end());
}

namespace {

// Keys whose change requires a different feature model.
bool affects_model(const std::string& key) {
  static const char* const keys[] = {"mhr", "stages", "rounds", "window_w", "window_h", "grid", "geometries",
                                     "seed", "train_scene", "train_positives", "train_negatives", "model"};
  return std::any_of(std::begin(keys), std::end(keys), [&](const char* k) { return key == k; });
}

}  // namespace

SweepTable sweep(const PipelineConfig& base, const GridSpec& grid) {
  if (grid.empty()) throw ConfigError("grid is empty");
  if (base.scene.empty()) throw ConfigError("scene is not set");
  SweepTable table;
  for (const auto& [k, values] : grid) table.keys.push_back(k);

  // Validate every key up front so a typo fails before any work is done.
  for (const auto& [k, values] : grid) {
    PipelineConfig probe = base;
    for (const auto& v : values) probe.set(k, v);
  }

  const SceneData scene = load_scene(base.scene, base.markers);
  std::map<std::string, CascadeModel> models;  // keyed by the model-relevant parameter values

  std::vector<std::size_t> idx(grid.size(), 0);
  for (;;) {
    PipelineConfig cfg = base;
    SweepRow row;
    std::string model_key;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const std::string& v = grid[k].second[idx[k]];
      cfg.set(grid[k].first, v);
      row.values.push_back(v);
      if (affects_model(grid[k].first)) model_key += grid[k].first + "=" + v + ";";
    }
    cfg.validate();
    const CascadeModel* model = nullptr;
    if (cfg.detector == CountingMode::kFeature) {
      auto it = models.find(model_key);
      if (it == models.end()) it = models.emplace(model_key, obtain_model(cfg)).first;
      model = &it->second;
    }
    row.report = run_pipeline(cfg, scene_inputs(scene, model)).report;
    table.rows.push_back(std::move(row));

    // Odometer over the grid, last key fastest.
    std::size_t k = grid.size();
    while (k > 0) {
      --k;
      if (++idx[k] < grid[k].second.size()) break;
      idx[k] = 0;
      if (k == 0) return table;
    }
  }
}

void write_sweep_tsv(std::ostream& os, const SweepTable& table) {
  for (const auto& k : table.keys) os << k << '\t';
  os << "fp\tfn\tgt\tacc_real\tacc_int\n";
  for (const auto& row : table.rows) {
    for (const auto& v : row.values) os << v << '\t';
    const CountingReport& r = row.report;
    os << r.fp << '\t' << r.fn << '\t' << r.gt << '\t';
    if (r.accuracy) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", r.accuracy->percent);
      os << buf << '\t' << r.accuracy->rounded << '\n';
    } else {
      os << "na\tna\n";
    }
  }
}

std::vector<BenchRecord> bench(const PipelineConfig& config, int warmup, int measured) {
  if (measured < 1) throw ConfigError("bench needs at least one measured frame");
  if (warmup < 0) throw ConfigError("warmup must be >= 0");
  config.validate();
  if (config.scene.empty()) throw ConfigError("scene is not set");
  const SceneData scene = load_scene(config.scene, config.markers);
  std::optional<CascadeModel> model;
  if (config.detector == CountingMode::kFeature) model = obtain_model(config);
  PipelineInputs in = scene_inputs(scene, model ? &*model : nullptr);
  in.frame_count = static_cast<std::size_t>(warmup) + static_cast<std::size_t>(measured);
  in.frame = [&scene](std::size_t i) { return scene.frames[i % scene.frames.size()]; };
  return run_pipeline(config, in, nullptr, static_cast<std::size_t>(warmup)).bench;
}

}  // namespace vehicount
