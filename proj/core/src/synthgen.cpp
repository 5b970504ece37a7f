#include "vehicount/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "vehicount/error.hpp"

namespace vehicount {

namespace {

// Stream tags keep the per-purpose generators independent.
constexpr std::uint64_t kTagSchedule = 1;
constexpr std::uint64_t kTagTexture = 2;
constexpr std::uint64_t kTagNoise = 3;
constexpr std::uint64_t kTagJitter = 4;
constexpr std::uint64_t kTagTraining = 5;
constexpr std::uint64_t kTagBackground = 6;
constexpr std::uint64_t kTagBootstrap = 7;

constexpr int kTailFrames = 10;
constexpr int kNoiseGrid = 24;
constexpr int kRoadLow = 95;
constexpr int kRoadHigh = 125;
constexpr int kLaneLine = 165;
// Vehicle palette. Every texture column averages close to the road level, so a passing
// vehicle leaves only a faint trace in a running-average background. After a +50 step no
// vehicle level lands within 10 of the unlit road (95..125), and the brightest pixel still
// fits in 8 bits.
constexpr int kVehicleBright = 185;
constexpr int kVehicleDark = 30;
constexpr int kVehicleTrim = 20;
constexpr int kVehicleGlass = 155;

SceneRng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return SceneRng(seed ^ splitmix64(tag * 0x9E3779B97F4A7C15ull + index));
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<IlluminationEvent> parse_illumination(const std::string& key, const std::string& value) {
  std::vector<IlluminationEvent> out;
  for (const auto& item : split(value, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ConfigError(key + ": expected frame:delta, got '" + item + "'");
    out.push_back({parse_int(key, parts[0]), parse_int(key, parts[1])});
  }
  return out;
}

std::vector<VehicleSpawn> parse_spawns(const std::string& key, const std::string& value) {
  std::vector<VehicleSpawn> out;
  for (const auto& item : split(value, ';')) {
    const auto p = split(item, ':');
    if (p.size() != 5 && p.size() != 6) throw ConfigError(key + ": expected frame:lane:speed:w:h[:dx], got '" + item + "'");
    VehicleSpawn s;
    s.frame = parse_int(key, p[0]);
    s.lane = parse_int(key, p[1]);
    s.speed = parse_double(key, p[2]);
    s.w = parse_int(key, p[3]);
    s.h = parse_int(key, p[4]);
    if (p.size() == 6) s.x_offset = parse_int(key, p[5]);
    out.push_back(s);
  }
  return out;
}

std::uint8_t clamp_u8(long long v) { return static_cast<std::uint8_t>(std::clamp<long long>(v, 0, 255)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double SceneRng::gaussian() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void ScenarioConfig::set(const std::string& key, const std::string& value) {
  if (key == "width") width = parse_int(key, value);
  else if (key == "height") height = parse_int(key, value);
  else if (key == "frames") frames = parse_int(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "background_seed") background_seed = parse_u64(key, value);
  else if (key == "noise_sigma") noise_sigma = parse_double(key, value);
  else if (key == "jitter") jitter = parse_int(key, value);
  else if (key == "illumination") illumination = parse_illumination(key, value);
  else if (key == "lanes") lanes = parse_int_list(key, value);
  else if (key == "lane_speeds") lane_speeds = parse_double_list(key, value);
  else if (key == "vehicles") vehicles = parse_int(key, value);
  else if (key == "vehicle_w") vehicle_w = parse_int(key, value);
  else if (key == "vehicle_h") vehicle_h = parse_int(key, value);
  else if (key == "size_jitter") size_jitter = parse_double(key, value);
  else if (key == "min_gap") min_gap = parse_int(key, value);
  else if (key == "gap_jitter") gap_jitter = parse_int(key, value);
  else if (key == "start_frame") start_frame = parse_int(key, value);
  else if (key == "markers") markers = value;
  else if (key == "spawns") spawns = parse_spawns(key, value);
  else throw ConfigError("unknown scenario key '" + key + "'");
}

ScenarioConfig ScenarioConfig::from_key_values(const KeyValues& kv) {
  ScenarioConfig c;
  for (const auto& [k, v] : kv) c.set(k, v);
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) { return from_key_values(load_key_values(path)); }

std::string ScenarioConfig::to_text() const {
  std::ostringstream os;
  os << "width = " << width << "\n"
     << "height = " << height << "\n"
     << "frames = " << frames << "\n"
     << "seed = " << seed << "\n"
     << "background_seed = " << background_seed << "\n"
     << "noise_sigma = " << format_double(noise_sigma) << "\n"
     << "jitter = " << jitter << "\n";
  os << "illumination = ";
  for (std::size_t i = 0; i < illumination.size(); ++i)
    os << (i ? "," : "") << illumination[i].frame << ':' << illumination[i].delta;
  os << "\n"
     << "lanes = " << format_int_list(lanes) << "\n"
     << "lane_speeds = " << format_double_list(lane_speeds) << "\n"
     << "vehicles = " << vehicles << "\n"
     << "vehicle_w = " << vehicle_w << "\n"
     << "vehicle_h = " << vehicle_h << "\n"
     << "size_jitter = " << format_double(size_jitter) << "\n"
     << "min_gap = " << min_gap << "\n"
     << "gap_jitter = " << gap_jitter << "\n"
     << "start_frame = " << start_frame << "\n"
     << "markers = " << markers << "\n";
  os << "spawns = ";
  for (std::size_t i = 0; i < spawns.size(); ++i) {
    const auto& s = spawns[i];
    os << (i ? ";" : "") << s.frame << ':' << s.lane << ':' << format_double(s.speed) << ':' << s.w << ':' << s.h << ':'
       << s.x_offset;
  }
  os << "\n";
  return os.str();
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("scenario: " + m); };
  if (width < 32 || height < 32 || width > IntegralImage::kMaxDimension || height > IntegralImage::kMaxDimension)
    fail("frame dimensions must lie in [32, 4096]");
  if (frames < 0) fail("frames must be >= 0");
  if (!(noise_sigma >= 0) || noise_sigma > 20) fail("noise_sigma must lie in [0, 20]");
  if (jitter < 0 || jitter > 8) fail("jitter must lie in [0, 8]");
  if (lanes.empty()) fail("at least one lane is required");
  if (lane_speeds.empty()) fail("lane_speeds must not be empty");
  for (const double s : lane_speeds)
    if (!(s > 0)) fail("lane speeds must be positive");
  if (vehicles < 0) fail("vehicles must be >= 0");
  if (!(size_jitter >= 0 && size_jitter < 0.5)) fail("size_jitter must lie in [0, 0.5)");
  if (min_gap < 0 || gap_jitter < 0 || start_frame < 0) fail("min_gap, gap_jitter and start_frame must be >= 0");

  int level = 0;
  int lo = 0;
  int hi = 0;
  auto events = illumination;
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
  for (const auto& e : events) {
    if (e.frame < 0) fail("illumination frame must be >= 0");
    level += e.delta;
    lo = std::min(lo, level);
    hi = std::max(hi, level);
  }
  // Rendered intensities stay in [20, 205]; deltas must not push the whole range out of [0, 255].
  if (lo < -200 || hi > 230) fail("illumination deltas must keep intensities clampable to [0, 255]");

  for (const auto& s : schedule()) {
    if (s.lane < 0 || s.lane >= static_cast<int>(lanes.size())) fail("spawn lane out of range");
    if (!(s.speed > 0)) fail("spawn speed must be positive");
    if (s.frame < 0) fail("spawn frame must be >= 0");
    if (s.w < 9 || s.h < 9 || s.w > width || s.h > height) fail("vehicle size must lie in [9, frame size]");
    const int x = lanes[static_cast<std::size_t>(s.lane)] - s.w / 2 + s.x_offset;
    if (x < 0 || x + s.w > width) fail("vehicle does not fit inside the frame at spawn");
  }
  if (!markers.empty()) {
    try {
      validate_markers(parse_markers(markers), width, height);
    } catch (const Error& e) {
      fail(e.what());
    }
  }
}

std::vector<VehicleSpawn> ScenarioConfig::schedule() const {
  if (!spawns.empty() || vehicles == 0 || lanes.empty() || lane_speeds.empty()) return spawns;
  SceneRng rng = stream(seed, kTagSchedule, 0);
  std::vector<VehicleSpawn> out;
  std::vector<int> next(lanes.size(), -1);
  std::vector<int> prev_h(lanes.size(), 0);
  for (int i = 0; i < vehicles; ++i) {
    VehicleSpawn s;
    s.lane = i % static_cast<int>(lanes.size());
    const auto lane = static_cast<std::size_t>(s.lane);
    s.speed = lane_speeds[lane % lane_speeds.size()];
    s.w = static_cast<int>(round_half_away(vehicle_w * (1.0 + rng.uniform(-size_jitter, size_jitter))));
    s.h = static_cast<int>(round_half_away(vehicle_h * (1.0 + rng.uniform(-size_jitter, size_jitter))));
    const int extra = gap_jitter > 0 ? rng.uniform_int(0, gap_jitter) : 0;
    if (next[lane] < 0) {
      s.frame = start_frame + static_cast<int>(lane) * 3 + extra;
    } else {
      // The previous vehicle must have cleared its length plus min_gap before this one appears.
      const int clear = static_cast<int>(std::ceil((prev_h[lane] + min_gap) / s.speed));
      s.frame = next[lane] + clear + extra;
    }
    next[lane] = s.frame;
    prev_h[lane] = s.h;
    out.push_back(s);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
  return out;
}

MarkerSet ScenarioConfig::marker_set() const {
  if (!markers.empty()) return parse_markers(markers);
  MarkerSet out;
  int spacing = width;
  for (std::size_t i = 1; i < lanes.size(); ++i) spacing = std::min(spacing, std::abs(lanes[i] - lanes[i - 1]));
  const int w = std::max(4, std::min(vehicle_w + 16, spacing - 4));
  const int h = std::max(4, height / 5);
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const int x = std::clamp(lanes[i] - w / 2, 0, width - w);
    out.push_back({Rect{x, height - h, w, h}, static_cast<int>(i)});
  }
  return out;
}

int ScenarioConfig::frame_count() const {
  if (frames > 0) return frames;
  int last = start_frame;
  for (const auto& s : schedule()) {
    // First frame whose top edge has left the image.
    const int gone = s.frame + static_cast<int>(std::ceil(height / s.speed)) + 1;
    last = std::max(last, gone);
  }
  return last + kTailFrames;
}

std::vector<CountEvent> GroundTruth::exit_events() const {
  std::vector<CountEvent> out;
  out.reserve(exits.size());
  for (const auto& e : exits) out.push_back({e.frame, e.marker});
  return out;
}

Frame vehicle_texture(int w, int h, std::uint64_t seed) {
  SceneRng rng(seed);
  Frame t(w, h);
  const int ws0 = static_cast<int>(round_half_away(0.18 * h));
  const int ws1 = static_cast<int>(round_half_away(0.32 * h));
  const int rw0 = static_cast<int>(round_half_away(0.74 * h));
  const int rw1 = static_cast<int>(round_half_away(0.84 * h));
  const int blocks_x = (w + 2) / 3;
  std::vector<std::uint8_t> body(static_cast<std::size_t>(blocks_x) * ((h + 2) / 3));
  for (auto& b : body) b = (rng.next() % 2 != 0) ? kVehicleBright : kVehicleDark;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int v;
      if (y < 2 || y >= h - 2) {
        v = kVehicleTrim;
      } else if (x < 2 || x >= w - 2) {
        v = (y / 3) % 2 ? kVehicleBright : kVehicleTrim;
      } else if (x >= 3 && x < w - 3 && ((y >= ws0 && y < ws1) || (y >= rw0 && y < rw1))) {
        v = kVehicleGlass;
      } else {
        v = body[static_cast<std::size_t>(y / 3) * blocks_x + x / 3] + rng.uniform_int(-4, 4);
      }
      t.at(x, y) = clamp_u8(v);
    }
  }
  return t;
}

SceneRenderer::SceneRenderer(ScenarioConfig config) : config_(std::move(config)) {
  config_.validate();
  spawns_ = config_.schedule();
  frame_count_ = config_.frame_count();
  std::stable_sort(config_.illumination.begin(), config_.illumination.end(),
                   [](const auto& a, const auto& b) { return a.frame < b.frame; });

  // Smooth value-noise road surface plus static grain and dashed lane separators.
  const int W = config_.width;
  const int H = config_.height;
  const int gx = W / kNoiseGrid + 2;
  const int gy = H / kNoiseGrid + 2;
  SceneRng rng = stream(config_.background_seed, kTagBackground, 0);
  std::vector<double> grid(static_cast<std::size_t>(gx) * gy);
  for (auto& g : grid) g = rng.uniform(kRoadLow, kRoadHigh);
  background_ = Frame(W, H);
  for (int y = 0; y < H; ++y) {
    const double fy = static_cast<double>(y) / kNoiseGrid;
    const int iy = static_cast<int>(fy);
    const double ty = fy - iy;
    for (int x = 0; x < W; ++x) {
      const double fx = static_cast<double>(x) / kNoiseGrid;
      const int ix = static_cast<int>(fx);
      const double tx = fx - ix;
      auto g = [&](int i, int j) { return grid[static_cast<std::size_t>(j) * gx + i]; };
      const double top = g(ix, iy) + tx * (g(ix + 1, iy) - g(ix, iy));
      const double bot = g(ix, iy + 1) + tx * (g(ix + 1, iy + 1) - g(ix, iy + 1));
      background_.at(x, y) = clamp_u8(round_half_away(top + ty * (bot - top)) + rng.uniform_int(-3, 3));
    }
  }
  for (std::size_t i = 1; i < config_.lanes.size(); ++i) {
    const int mid = (config_.lanes[i - 1] + config_.lanes[i]) / 2;
    for (int y = 0; y < H; ++y) {
      if (y % 20 >= 10) continue;
      for (int x = mid - 1; x <= mid; ++x)
        if (x >= 0 && x < W) background_.at(x, y) = kLaneLine;
    }
  }

  textures_.reserve(spawns_.size());
  for (std::size_t v = 0; v < spawns_.size(); ++v)
    textures_.push_back(vehicle_texture(spawns_[v].w, spawns_[v].h, splitmix64(config_.seed ^ splitmix64(kTagTexture * 0x9E3779B97F4A7C15ull + v))));
}

Rect SceneRenderer::vehicle_rect(int vehicle, int frame) const {
  const auto& s = spawns_[static_cast<std::size_t>(vehicle)];
  const int x = config_.lanes[static_cast<std::size_t>(s.lane)] - s.w / 2 + s.x_offset;
  const int y = static_cast<int>(round_half_away(s.speed * (frame - s.frame)));
  return {x, y, s.w, s.h};
}

bool SceneRenderer::vehicle_visible(int vehicle, int frame) const {
  const auto& s = spawns_[static_cast<std::size_t>(vehicle)];
  return frame >= s.frame && vehicle_rect(vehicle, frame).y < config_.height;
}

int SceneRenderer::exit_frame(int vehicle) const {
  const auto& s = spawns_[static_cast<std::size_t>(vehicle)];
  int f = s.frame;
  while (vehicle_rect(vehicle, f + 1).center_y() < config_.height) ++f;
  return f;
}

SceneRenderer::Offset SceneRenderer::jitter(int frame) const {
  if (config_.jitter == 0) return {};
  SceneRng rng = stream(config_.seed, kTagJitter, static_cast<std::uint64_t>(frame));
  const int dx = rng.uniform_int(-config_.jitter, config_.jitter);
  const int dy = rng.uniform_int(-config_.jitter, config_.jitter);
  return {dx, dy};
}

Frame SceneRenderer::render(int frame) const {
  const int W = config_.width;
  const int H = config_.height;
  Frame canvas = background_;
  for (std::size_t v = 0; v < spawns_.size(); ++v) {
    const int vi = static_cast<int>(v);
    if (!vehicle_visible(vi, frame)) continue;
    const Rect r = vehicle_rect(vi, frame);
    const Frame& tex = textures_[v];
    for (int y = std::max(0, r.y); y < std::min(H, r.bottom()); ++y)
      for (int x = std::max(0, r.x); x < std::min(W, r.right()); ++x) canvas.at(x, y) = tex.at(x - r.x, y - r.y);
  }

  int delta = 0;
  for (const auto& e : config_.illumination)
    if (e.frame <= frame) delta += e.delta;

  const Offset off = jitter(frame);
  SceneRng rng = stream(config_.seed, kTagNoise, static_cast<std::uint64_t>(frame));
  const bool noisy = config_.noise_sigma > 0;
  Frame out(W, H);
  for (int y = 0; y < H; ++y) {
    const int sy = std::clamp(y - off.dy, 0, H - 1);
    for (int x = 0; x < W; ++x) {
      const int sx = std::clamp(x - off.dx, 0, W - 1);
      long long v = canvas.at(sx, sy) + delta;
      if (noisy) v += round_half_away(config_.noise_sigma * std::clamp(rng.gaussian(), -3.0, 3.0));
      out.at(x, y) = clamp_u8(v);
    }
  }
  return out;
}

std::vector<GtBox> SceneRenderer::boxes(int frame) const {
  std::vector<GtBox> out;
  const Offset off = jitter(frame);
  for (std::size_t v = 0; v < spawns_.size(); ++v) {
    const int vi = static_cast<int>(v);
    if (!vehicle_visible(vi, frame)) continue;
    Rect r = vehicle_rect(vi, frame);
    r.x += off.dx;
    r.y += off.dy;
    const int x0 = std::max(0, r.x);
    const int y0 = std::max(0, r.y);
    const int x1 = std::min(config_.width, r.right());
    const int y1 = std::min(config_.height, r.bottom());
    if (x1 <= x0 || y1 <= y0) continue;
    out.push_back({frame, vi, Rect{x0, y0, x1 - x0, y1 - y0}});
  }
  return out;
}

GroundTruth SceneRenderer::ground_truth() const {
  GroundTruth gt;
  for (int f = 0; f < frame_count_; ++f) {
    auto b = boxes(f);
    gt.boxes.insert(gt.boxes.end(), b.begin(), b.end());
  }
  const MarkerSet markers = config_.marker_set();
  for (std::size_t v = 0; v < spawns_.size(); ++v) {
    const int vi = static_cast<int>(v);
    const int f = exit_frame(vi);
    if (f >= frame_count_) continue;
    const Rect r = vehicle_rect(vi, f);
    // The marker sharing the most columns with the vehicle; its lane when none does.
    int marker = spawns_[v].lane;
    int best = 0;
    for (std::size_t m = 0; m < markers.size(); ++m) {
      const int overlap =
          std::min(r.right(), markers[m].rect.right()) - std::max(r.x, markers[m].rect.x);
      if (overlap > best) {
        best = overlap;
        marker = static_cast<int>(m);
      }
    }
    gt.exits.push_back({f, vi, marker});
  }
  std::stable_sort(gt.exits.begin(), gt.exits.end(), [](const GtEvent& a, const GtEvent& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.vehicle < b.vehicle;
  });
  return gt;
}

Scene generate_scene(const ScenarioConfig& config) {
  const SceneRenderer renderer(config);
  Scene scene;
  scene.frames.reserve(static_cast<std::size_t>(renderer.frame_count()));
  for (int f = 0; f < renderer.frame_count(); ++f) scene.frames.push_back(renderer.render(f));
  scene.truth = renderer.ground_truth();
  return scene;
}

void write_scene(const ScenarioConfig& config, const std::filesystem::path& dir) {
  const SceneRenderer renderer(config);
  const auto frames_dir = dir / "frames";
  std::error_code ec;
  std::filesystem::create_directories(frames_dir, ec);
  if (ec) throw IoError("cannot create " + frames_dir.string() + ": " + ec.message());
  for (int f = 0; f < renderer.frame_count(); ++f)
    save_pgm(renderer.render(f), frame_path(frames_dir, static_cast<std::size_t>(f)));

  const GroundTruth gt = renderer.ground_truth();
  {
    std::ofstream out(dir / "gt_boxes.txt", std::ios::trunc);
    if (!out) throw IoError("cannot write gt_boxes.txt in " + dir.string());
    for (const auto& b : gt.boxes)
      out << b.frame << ' ' << b.vehicle << ' ' << b.rect.x << ' ' << b.rect.y << ' ' << b.rect.w << ' ' << b.rect.h << '\n';
  }
  {
    std::ofstream out(dir / "gt_events.txt", std::ios::trunc);
    if (!out) throw IoError("cannot write gt_events.txt in " + dir.string());
    for (const auto& e : gt.exits) out << e.frame << ' ' << e.vehicle << ' ' << e.marker << '\n';
  }
  {
    // Echo the config with the derived frame count and markers made explicit.
    ScenarioConfig echo = config;
    echo.frames = renderer.frame_count();
    echo.markers = format_markers(config.marker_set());
    std::ofstream out(dir / "scenario.cfg", std::ios::trunc);
    if (!out) throw IoError("cannot write scenario.cfg in " + dir.string());
    out << echo.to_text();
  }
}

std::vector<GtEvent> read_gt_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<GtEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    GtEvent e;
    std::string rest;
    if (!(ls >> e.frame >> e.vehicle >> e.marker) || (ls >> rest)) throw FormatError("bad line in " + path.string() + ": " + line);
    out.push_back(e);
  }
  return out;
}

std::vector<GtBox> read_gt_boxes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<GtBox> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    GtBox b;
    std::string rest;
    if (!(ls >> b.frame >> b.vehicle >> b.rect.x >> b.rect.y >> b.rect.w >> b.rect.h) || (ls >> rest))
      throw FormatError("bad line in " + path.string() + ": " + line);
    out.push_back(b);
  }
  return out;
}

TrainingSet generate_training_set(const ScenarioConfig& config, int n_pos, int n_neg, int window_w, int window_h,
                                  double perturbation) {
  if (n_pos < 1 || n_neg < 1) throw DomainError("training set needs at least one positive and one negative");
  if (window_w < 1 || window_h < 1) throw DomainError("window dimensions must be positive");
  if (!(perturbation >= 0 && perturbation < 0.5)) throw DomainError("perturbation must lie in [0, 0.5)");
  const SceneRenderer renderer(config);
  const int W = config.width;
  const int H = config.height;
  const int n_frames = renderer.frame_count();
  TrainingSet set;
  SceneRng rng = stream(config.seed, kTagTraining, 0);

  // (vehicle, frame) pairs where the vehicle is fully inside the image.
  std::vector<std::pair<int, int>> visible;
  for (int f = 0; f < n_frames; ++f) {
    const auto off = renderer.jitter(f);
    for (std::size_t v = 0; v < renderer.vehicles().size(); ++v) {
      const int vi = static_cast<int>(v);
      if (!renderer.vehicle_visible(vi, f)) continue;
      Rect r = renderer.vehicle_rect(vi, f);
      r.x += off.dx;
      r.y += off.dy;
      if (r.x >= 0 && r.y >= 0 && r.right() <= W && r.bottom() <= H) visible.emplace_back(vi, f);
    }
  }
  if (visible.empty()) throw DomainError("scenario has no fully visible vehicle to crop");

  while (static_cast<int>(set.positives.size()) < n_pos) {
    const auto [v, f] = visible[rng.next() % visible.size()];
    Rect r = renderer.vehicle_rect(v, f);
    const auto off = renderer.jitter(f);
    const double s = 1.0 + rng.uniform(-perturbation, perturbation);
    const double w = std::min<double>(W, r.w * s);
    const double h = std::min<double>(H, r.h * s);
    const double cx = r.x + off.dx + r.w / 2.0 + rng.uniform(-perturbation, perturbation) * r.w;
    const double cy = r.y + off.dy + r.h / 2.0 + rng.uniform(-perturbation, perturbation) * r.h;
    const double x = std::clamp(cx - w / 2, 0.0, W - w);
    const double y = std::clamp(cy - h / 2, 0.0, H - h);
    set.positives.push_back(crop_resample(renderer.render(f), x, y, w, h, window_w, window_h, Interpolation::kNearest));
  }

  constexpr int kMaxAttempts = 1'000'000;
  int attempts = 0;
  while (static_cast<int>(set.negatives.size()) < n_neg) {
    if (++attempts > kMaxAttempts) throw DomainError("could not place negative crops clear of all vehicles");
    const int f = static_cast<int>(rng.next() % static_cast<std::uint64_t>(n_frames));
    const double s = rng.uniform(1.0, 1.6);
    const double w = window_w * s;
    const double h = window_h * s;
    if (w > W || h > H) continue;
    const double x = rng.uniform(0.0, W - w);
    const double y = rng.uniform(0.0, H - h);
    // Conservative integer cover of the real-valued window.
    const Rect cover{static_cast<int>(std::floor(x)), static_cast<int>(std::floor(y)),
                     static_cast<int>(std::ceil(x + w)) - static_cast<int>(std::floor(x)),
                     static_cast<int>(std::ceil(y + h)) - static_cast<int>(std::floor(y))};
    const auto boxes = renderer.boxes(f);
    if (std::any_of(boxes.begin(), boxes.end(), [&](const GtBox& b) { return intersection_area(b.rect, cover) > 0; }))
      continue;
    set.negatives.push_back(crop_resample(renderer.render(f), x, y, w, h, window_w, window_h, Interpolation::kNearest));
  }
  return set;
}

NegativeSampler::NegativeSampler(const ScenarioConfig& config, int window_w, int window_h, double max_iou,
                                 int pool_frames)
    : window_w_(window_w), window_h_(window_h), max_iou_(max_iou), rng_(stream(config.seed, kTagBootstrap, 0)) {
  if (window_w < 1 || window_h < 1 || window_w > config.width || window_h > config.height)
    throw DomainError("negative sampler: window does not fit the scenario frame");
  if (!(max_iou >= 0 && max_iou < 1)) throw DomainError("negative sampler: max_iou must lie in [0, 1)");
  if (pool_frames < 1) throw DomainError("negative sampler: pool must hold at least one frame");
  const SceneRenderer renderer(config);
  const int n = renderer.frame_count();
  const int step = std::max(1, n / pool_frames);
  for (int f = 0; f < n && static_cast<int>(pool_.size()) < pool_frames; f += step)
    pool_.push_back({renderer.render(f), renderer.boxes(f)});
}

Frame NegativeSampler::next() {
  constexpr int kMaxAttempts = 1'000'000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const PoolFrame& p = pool_[rng_.next() % pool_.size()];
    const int W = p.frame.width();
    const int H = p.frame.height();
    const double s = rng_.uniform(1.0, 1.6);
    const double w = window_w_ * s;
    const double h = window_h_ * s;
    if (w > W || h > H) continue;
    const double x = rng_.uniform(0.0, W - w);
    const double y = rng_.uniform(0.0, H - h);
    const Rect cover{static_cast<int>(std::floor(x)), static_cast<int>(std::floor(y)), static_cast<int>(std::ceil(w)),
                     static_cast<int>(std::ceil(h))};
    if (std::any_of(p.boxes.begin(), p.boxes.end(),
                    [&](const GtBox& b) { return intersection_over_union(b.rect, cover) > max_iou_; }))
      continue;
    return crop_resample(p.frame, x, y, w, h, window_w_, window_h_, Interpolation::kNearest);
  }
  throw DomainError("negative sampler: no admissible window found");
}

}  // namespace vehicount
