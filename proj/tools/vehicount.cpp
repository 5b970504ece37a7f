// vehicount: synthetic scene generation, cascade training, and vehicle counting.
//
//   vehicount <synth|train|detect|track|count|sweep|bench|eval> [--config FILE] [--key value ...]

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "vehicount/error.hpp"
#include "vehicount/pipeline.hpp"

namespace vc = vehicount;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// `--key value` and `--key=value` pairs left over after CLI11 parsing.
vc::KeyValues parse_overrides(const std::vector<std::string>& extras) {
  vc::KeyValues kv;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) throw vc::ConfigError("unexpected argument '" + a + "'");
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      kv.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw vc::ConfigError("missing value for " + a);
      kv.emplace_back(a.substr(2), extras[++i]);
    }
  }
  return kv;
}

vc::KeyValues gather(const std::string& config_path, const std::vector<std::string>& extras) {
  vc::KeyValues kv;
  if (!config_path.empty()) kv = vc::load_key_values(config_path);
  for (auto& p : parse_overrides(extras)) kv.push_back(std::move(p));
  return kv;
}

vc::PipelineConfig pipeline_config(const std::string& config_path, const std::vector<std::string>& extras) {
  auto cfg = vc::PipelineConfig::from_key_values(gather(config_path, extras));
  cfg.validate();
  return cfg;
}

// Output file inside config.output, or stdout when no output directory is set.
class Sink {
 public:
  Sink(const std::filesystem::path& dir, const std::string& name) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    file_.open(dir / name, std::ios::trunc);
    if (!file_) throw vc::IoError("cannot write " + (dir / name).string());
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void write_result(const vc::PipelineConfig& cfg, const vc::PipelineResult& result) {
  if (!cfg.output.empty()) {
    Sink events(cfg.output, "events.txt");
    vc::write_events(events.stream(), result.events);
    Sink report(cfg.output, "report.txt");
    vc::write_report(report.stream(), result.report);
  }
  std::cout << vc::result_line(result.report) << '\n';
}

int cmd_synth(const std::string& config_path, const std::vector<std::string>& extras) {
  std::filesystem::path out;
  vc::KeyValues scenario;
  for (auto& [k, v] : gather(config_path, extras)) {
    if (k == "output") out = v;
    else scenario.emplace_back(k, v);
  }
  if (out.empty()) throw vc::ConfigError("synth needs --output DIR");
  const auto cfg = vc::ScenarioConfig::from_key_values(scenario);
  cfg.validate();
  vc::write_scene(cfg, out);
  const vc::SceneRenderer renderer(cfg);
  std::cout << "scene " << out.string() << ": frames=" << renderer.frame_count()
            << " vehicles=" << renderer.vehicles().size() << " exits=" << renderer.ground_truth().exits.size() << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& extras) {
  const auto cfg = pipeline_config(config_path, extras);
  if (cfg.model.empty()) throw vc::ConfigError("train needs --model FILE");
  std::vector<vc::StageLog> log;
  const vc::CascadeModel model = vc::train_model(cfg, &log);
  if (cfg.model.has_parent_path()) std::filesystem::create_directories(cfg.model.parent_path());
  model.save(cfg.model);
  for (const auto& s : log) {
    std::printf("stage %d rounds=%d pos=%d neg=%d bootstrapped=%d hit_rate=%.4f fp_rate=%.4f\n", s.stage, s.rounds,
                s.positives, s.negatives, s.bootstrapped, s.hit_rate, s.false_positive_rate);
  }
  std::printf("model %s: stages=%zu dimension=%d\n", cfg.model.string().c_str(), model.stages.size(),
              model.layout.dimension());
  return 0;
}

int cmd_detect(const std::string& config_path, const std::vector<std::string>& extras) {
  const auto cfg = pipeline_config(config_path, extras);
  Sink sink(cfg.output, "detections.txt");
  vc::PipelineObserver obs;
  obs.on_detections = [&](std::int64_t frame, std::span<const vc::Rect> rects) {
    for (const auto& r : rects) sink.stream() << frame << ' ' << r.x << ' ' << r.y << ' ' << r.w << ' ' << r.h << '\n';
  };
  vc::run_pipeline(cfg, &obs);
  return 0;
}

int cmd_track(const std::string& config_path, const std::vector<std::string>& extras) {
  const auto cfg = pipeline_config(config_path, extras);
  Sink sink(cfg.output, "tracks.txt");
  vc::PipelineObserver obs;
  obs.on_tracks = [&](std::int64_t frame, const vc::Tracker& tracker, std::span<const vc::Track>) {
    for (const auto& t : tracker.tracks()) vc::write_track_log_line(sink.stream(), frame, t);
  };
  vc::run_pipeline(cfg, &obs);
  return 0;
}

int cmd_count(const std::string& config_path, const std::vector<std::string>& extras) {
  const auto cfg = pipeline_config(config_path, extras);
  write_result(cfg, vc::run_pipeline(cfg));
  return 0;
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& extras) {
  const auto cfg = pipeline_config(config_path, extras);
  if (cfg.counted_events.empty() || cfg.scene.empty()) throw vc::ConfigError("eval needs --counted_events FILE and --scene DIR");
  std::ifstream in(cfg.counted_events);
  if (!in) throw vc::IoError("cannot open " + cfg.counted_events.string());
  const auto counted = vc::read_events(in);
  std::vector<vc::CountEvent> truth;
  for (const auto& e : vc::read_gt_events(cfg.scene / "gt_events.txt")) truth.push_back({e.frame, e.marker});
  const auto markers = cfg.markers.empty() ? vc::ScenarioConfig::load(cfg.scene / "scenario.cfg").marker_set()
                                           : vc::parse_markers(cfg.markers);
  std::size_t frames = 0;
  while (std::filesystem::exists(vc::frame_path(cfg.scene / "frames", frames))) ++frames;
  const auto report = vc::make_report(counted, truth, cfg.eval_tol, markers.size(), static_cast<double>(frames) / cfg.fps);
  if (!cfg.output.empty()) {
    Sink sink(cfg.output, "report.txt");
    vc::write_report(sink.stream(), report);
  }
  std::cout << vc::result_line(report) << '\n';
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& extras) {
  const auto cfg = pipeline_config(config_path, extras);
  if (cfg.grid_spec.empty()) throw vc::ConfigError("sweep needs --grid_spec 'key=v1,v2;...'");
  const auto table = vc::sweep(cfg, vc::parse_grid(cfg.grid_spec));
  Sink sink(cfg.output, "sweep.tsv");
  vc::write_sweep_tsv(sink.stream(), table);
  return 0;
}

int cmd_bench(const std::string& config_path, const std::vector<std::string>& extras) {
  const auto cfg = pipeline_config(config_path, extras);
  const auto records = vc::bench(cfg, cfg.warmup, cfg.bench_frames);
  Sink sink(cfg.output, "bench.txt");
  for (const auto& r : records) sink.stream() << vc::bench_line(r) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle counting with MB-LBP cascades, background subtraction and EKF tracking"};
  app.require_subcommand(1, 1);

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const std::string&, const std::vector<std::string>&);
  };
  const Command commands[] = {
      {"synth", "Render a synthetic scene with ground truth", cmd_synth},
      {"train", "Train a cascade on synthetic crops and save the model", cmd_train},
      {"detect", "Write per-frame detections", cmd_detect},
      {"track", "Write per-frame track states", cmd_track},
      {"count", "Count vehicles and report accuracy", cmd_count},
      {"sweep", "Run a parameter grid and emit a TSV table", cmd_sweep},
      {"bench", "Time the pipeline stages", cmd_bench},
      {"eval", "Score a counted-events file against ground truth", cmd_eval},
  };

  std::string config_path;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "key = value config file");
    sub->allow_extras();
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    for (const auto& [sub, cmd] : subs)
      if (sub->parsed()) return cmd->run(config_path, sub->remaining());
  } catch (const vc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const vc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
