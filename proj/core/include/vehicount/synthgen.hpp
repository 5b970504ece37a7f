#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vehicount/config.hpp"
#include "vehicount/counting.hpp"
#include "vehicount/imaging.hpp"

namespace vehicount {

/// Randomness: every stream is a std::mt19937_64 seeded with splitmix64(seed ^ stream tag).
/// Uniform reals take the top 53 bits of one draw; Gaussians use Box-Muller on two
/// uniforms. mt19937_64 output is fixed by the C++ standard, so the generated bytes are
/// reproducible across platforms and implementations.
std::uint64_t splitmix64(std::uint64_t x);

class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  double gaussian();

 private:
  std::mt19937_64 engine_;
};

struct VehicleSpawn {
  int frame = 0;      // first frame in which the vehicle starts to enter from the top
  int lane = 0;
  double speed = 3.0; // px per frame, downward
  int w = 27;
  int h = 36;
  int x_offset = 0;   // from the lane-centred position

  friend bool operator==(const VehicleSpawn&, const VehicleSpawn&) = default;
};

struct IlluminationEvent {
  int frame = 0;
  int delta = 0;  // added to every pixel from this frame on

  friend bool operator==(const IlluminationEvent&, const IlluminationEvent&) = default;
};

/// Synthetic road scene: vertical lanes, vehicles moving down, optional sensor noise,
/// camera jitter, and global illumination steps.
struct ScenarioConfig {
  int width = 240;
  int height = 135;
  int frames = 0;  // 0: run until the last vehicle has left, plus a short tail
  std::uint64_t seed = 42;
  std::uint64_t background_seed = 7;
  double noise_sigma = 2.0;
  int jitter = 0;
  std::vector<IlluminationEvent> illumination;
  std::vector<int> lanes{50, 120, 190};          // lane centre columns
  std::vector<double> lane_speeds{3.0, 3.5, 4.0};  // px/frame, cycled over lanes
  int vehicles = 10;
  int vehicle_w = 27;
  int vehicle_h = 36;
  double size_jitter = 0.05;
  int min_gap = 48;     // px of free road between consecutive vehicles of a lane
  int gap_jitter = 12;  // extra random frames between spawns in a lane
  int start_frame = 10;
  std::string markers;  // empty: one marker per lane, derived from the geometry
  std::vector<VehicleSpawn> spawns;  // explicit schedule; empty: planned from the fields above

  void set(const std::string& key, const std::string& value);
  static ScenarioConfig from_key_values(const KeyValues& kv);
  static ScenarioConfig load(const std::filesystem::path& path);
  std::string to_text() const;

  /// Throws ConfigError on invalid settings.
  void validate() const;

  std::vector<VehicleSpawn> schedule() const;
  MarkerSet marker_set() const;
  int frame_count() const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct GtBox {
  int frame = 0;
  int vehicle = 0;
  Rect rect;

  friend bool operator==(const GtBox&, const GtBox&) = default;
};

struct GtEvent {
  int frame = 0;
  int vehicle = 0;
  int marker = 0;

  friend bool operator==(const GtEvent&, const GtEvent&) = default;
};

struct GroundTruth {
  std::vector<GtBox> boxes;   // sorted by (frame, vehicle)
  std::vector<GtEvent> exits; // one per vehicle whose centre leaves the bottom edge, sorted by (frame, vehicle)

  std::vector<CountEvent> exit_events() const;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Renders individual frames of a scenario on demand. Each frame depends only on
/// (config, frame index), so frames may be rendered in any order or concurrently.
class SceneRenderer {
 public:
  explicit SceneRenderer(ScenarioConfig config);

  const ScenarioConfig& config() const { return config_; }
  int frame_count() const { return frame_count_; }
  const std::vector<VehicleSpawn>& vehicles() const { return spawns_; }

  Frame render(int frame) const;

  /// Unclipped, unjittered vehicle rectangle at a frame (may lie partly outside the image).
  Rect vehicle_rect(int vehicle, int frame) const;
  bool vehicle_visible(int vehicle, int frame) const;
  /// Last frame in which the vehicle's centre is still on screen. A window detector loses
  /// the vehicle a few frames earlier and a blob detector a few frames later.
  int exit_frame(int vehicle) const;

  struct Offset {
    int dx = 0;
    int dy = 0;
  };
  Offset jitter(int frame) const;

  /// Visible boxes (jittered and clipped to the image) of one frame.
  std::vector<GtBox> boxes(int frame) const;
  GroundTruth ground_truth() const;

  const Frame& texture(int vehicle) const { return textures_[static_cast<std::size_t>(vehicle)]; }
  const Frame& background() const { return background_; }

 private:
  ScenarioConfig config_;
  std::vector<VehicleSpawn> spawns_;
  int frame_count_ = 0;
  Frame background_;
  std::vector<Frame> textures_;
};

/// Deterministic high-contrast vehicle appearance.
Frame vehicle_texture(int w, int h, std::uint64_t seed);

struct Scene {
  std::vector<Frame> frames;
  GroundTruth truth;
};

Scene generate_scene(const ScenarioConfig& config);

/// Writes frames/frame_NNNNNN.pgm, gt_boxes.txt, gt_events.txt and scenario.cfg into dir.
void write_scene(const ScenarioConfig& config, const std::filesystem::path& dir);

std::vector<GtEvent> read_gt_events(const std::filesystem::path& path);
std::vector<GtBox> read_gt_boxes(const std::filesystem::path& path);

struct TrainingSet {
  std::vector<Frame> positives;
  std::vector<Frame> negatives;
};

/// Positives are fully visible vehicles with up to +-perturbation relative scale and
/// centre jitter; negatives are random background windows that touch no vehicle box.
TrainingSet generate_training_set(const ScenarioConfig& config, int n_pos, int n_neg, int window_w, int window_h,
                                  double perturbation = 0.1);

/// Endless stream of window-sized crops from a pool of rendered scenario frames whose IoU
/// with every vehicle box is at most max_iou. Includes windows that clip vehicles, which
/// makes it a source of hard negatives for cascade bootstrapping.
class NegativeSampler {
 public:
  NegativeSampler(const ScenarioConfig& config, int window_w, int window_h, double max_iou = 0.45,
                  int pool_frames = 120);
  Frame next();

 private:
  struct PoolFrame {
    Frame frame;
    std::vector<GtBox> boxes;
  };
  std::vector<PoolFrame> pool_;
  int window_w_;
  int window_h_;
  double max_iou_;
  SceneRng rng_;
};

}  // namespace vehicount
