#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "support.hpp"
#include "vehicount/error.hpp"
#include "vehicount/synthgen.hpp"

using namespace vehicount;

namespace {

ScenarioConfig small_scene(int vehicles = 6) {
  ScenarioConfig c;
  c.vehicles = vehicles;
  c.seed = 5;
  c.background_seed = 9;
  return c;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Frame sub_frame(const Frame& f, const Rect& r) {
  Frame out(r.w, r.h);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x) out.at(x, y) = f.at(r.x + x, r.y + y);
  return out;
}

}  // namespace

TEST(SceneRng, SplitMixReference) {
  // splitmix64(0), computed independently.
  EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL);
  SceneRng a(3), b(3);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    b.uniform();
  }
  EXPECT_EQ(a.next(), b.next());
}

TEST(Scene, EmptyNoiselessSceneIsStatic) {
  ScenarioConfig c;
  c.vehicles = 0;
  c.noise_sigma = 0;
  c.frames = 12;
  const Scene s = generate_scene(c);
  ASSERT_EQ(s.frames.size(), 12u);
  for (const Frame& f : s.frames) EXPECT_EQ(f, s.frames.front());
  EXPECT_TRUE(s.truth.boxes.empty());
  EXPECT_TRUE(s.truth.exits.empty());
}

TEST(Scene, OneExitPerVehicle) {
  const ScenarioConfig c = small_scene(9);
  const Scene s = generate_scene(c);
  EXPECT_EQ(s.truth.exits.size(), 9u);
  std::set<int> ids;
  for (const auto& e : s.truth.exits) ids.insert(e.vehicle);
  EXPECT_EQ(ids.size(), 9u);
  const auto markers = c.marker_set();
  for (const auto& e : s.truth.exits) {
    EXPECT_GE(e.marker, 0);
    EXPECT_LT(e.marker, static_cast<int>(markers.size()));
  }
}

TEST(Scene, IsDeterministic) {
  ScenarioConfig c = small_scene();
  c.jitter = 2;
  c.illumination = {{20, 30}};
  const Scene a = generate_scene(c);
  const Scene b = generate_scene(c);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) EXPECT_EQ(frame_hash(a.frames[i]), frame_hash(b.frames[i]));
  EXPECT_EQ(a.truth, b.truth);

  c.seed = 6;
  const Scene other = generate_scene(c);
  EXPECT_NE(frame_hash(other.frames[30]), frame_hash(a.frames[30]));
}

TEST(Scene, RenderOrderDoesNotMatter) {
  const ScenarioConfig c = small_scene();
  const SceneRenderer r(c);
  const Scene s = generate_scene(c);
  for (int f = r.frame_count() - 1; f >= 0; f -= 7) EXPECT_EQ(r.render(f), s.frames[static_cast<std::size_t>(f)]);
}

TEST(Scene, WrittenDirectoryIsByteIdentical) {
  vctest::TempDir a("scene_a"), b("scene_b");
  const ScenarioConfig c = small_scene(3);
  write_scene(c, a.path());
  write_scene(c, b.path());
  for (const char* name : {"gt_boxes.txt", "gt_events.txt", "scenario.cfg"})
    EXPECT_EQ(read_file(a.path() / name), read_file(b.path() / name)) << name;
  for (int f = 0; f < c.frame_count(); f += 5)
    EXPECT_EQ(read_file(frame_path(a.path() / "frames", f)), read_file(frame_path(b.path() / "frames", f)));
  // The echo pins the frame count and the markers; everything else is copied.
  ScenarioConfig resolved = c;
  resolved.frames = c.frame_count();
  resolved.markers = format_markers(c.marker_set());
  const ScenarioConfig echoed = ScenarioConfig::load(a.path() / "scenario.cfg");
  EXPECT_EQ(echoed, resolved);
  EXPECT_EQ(generate_scene(echoed).truth, generate_scene(c).truth);

  const Scene s = generate_scene(c);
  EXPECT_EQ(read_gt_events(a.path() / "gt_events.txt"), s.truth.exits);
  EXPECT_EQ(read_gt_boxes(a.path() / "gt_boxes.txt"), s.truth.boxes);
}

TEST(Scene, GroundTruthConsistency) {
  ScenarioConfig c = small_scene(12);
  c.jitter = 2;
  const Scene s = generate_scene(c);
  std::map<int, std::vector<GtBox>> by_vehicle;
  for (const auto& b : s.truth.boxes) {
    EXPECT_GE(b.rect.x, 0);
    EXPECT_GE(b.rect.y, 0);
    EXPECT_LE(b.rect.right(), c.width);
    EXPECT_LE(b.rect.bottom(), c.height);
    by_vehicle[b.vehicle].push_back(b);
  }
  EXPECT_TRUE(std::is_sorted(s.truth.boxes.begin(), s.truth.boxes.end(),
                             [](const GtBox& x, const GtBox& y) { return std::tie(x.frame, x.vehicle) < std::tie(y.frame, y.vehicle); }));
  const SceneRenderer r(c);
  for (const auto& [id, boxes] : by_vehicle) {
    for (std::size_t i = 1; i < boxes.size(); ++i) {
      EXPECT_EQ(boxes[i].frame, boxes[i - 1].frame + 1) << "vehicle " << id;
      EXPECT_GE(r.vehicle_rect(id, boxes[i].frame).y, r.vehicle_rect(id, boxes[i - 1].frame).y);
    }
  }
}

TEST(Scene, TemplateMatchRecoversGroundTruth) {
  ScenarioConfig c = small_scene(20);
  c.noise_sigma = 0;
  c.jitter = 1;
  const SceneRenderer r(c);
  const GroundTruth gt = r.ground_truth();
  std::size_t full = 0, recovered = 0;
  for (const auto& b : gt.boxes) {
    const Frame& tex = r.texture(b.vehicle);
    if (b.rect.w != tex.width() || b.rect.h != tex.height()) continue;  // clipped at an edge
    ++full;
    if (sub_frame(r.render(b.frame), b.rect) == tex) ++recovered;
  }
  ASSERT_GT(full, 100u);
  EXPECT_GE(static_cast<double>(recovered), 0.99 * static_cast<double>(full));
}

TEST(Scene, IlluminationStepAddsDelta) {
  ScenarioConfig c = small_scene(0);
  c.noise_sigma = 0;
  c.frames = 10;
  c.illumination = {{5, 50}};
  const Scene s = generate_scene(c);
  for (std::size_t k = 0; k < s.frames[0].pixels().size(); ++k) {
    EXPECT_EQ(s.frames[4].pixels()[k], s.frames[0].pixels()[k]);
    EXPECT_EQ(s.frames[5].pixels()[k], std::min(255, s.frames[0].pixels()[k] + 50));
  }
}

TEST(Config, TextRoundTrip) {
  ScenarioConfig c = small_scene();
  c.illumination = {{400, 50}, {500, -20}};
  c.lanes = {40, 100};
  c.lane_speeds = {2.5};
  c.spawns = {{10, 0, 3.0, 27, 36, 0}, {30, 1, 2.25, 30, 40, -2}};
  c.markers = "10,100,50,35;75,100,50,35";
  std::istringstream in(c.to_text());
  EXPECT_EQ(ScenarioConfig::from_key_values(parse_key_values(in)), c);
}

TEST(Config, Validation) {
  EXPECT_NO_THROW(ScenarioConfig{}.validate());
  auto invalid = [](auto mutate) {
    ScenarioConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(invalid([](ScenarioConfig& c) { c.width = 10; }).validate(), ConfigError);
  EXPECT_THROW(invalid([](ScenarioConfig& c) { c.noise_sigma = -1; }).validate(), ConfigError);
  EXPECT_THROW(invalid([](ScenarioConfig& c) { c.lane_speeds = {0.0}; }).validate(), ConfigError);
  EXPECT_THROW(invalid([](ScenarioConfig& c) { c.illumination = {{3, 240}}; }).validate(), ConfigError);
  EXPECT_THROW(invalid([](ScenarioConfig& c) { c.spawns = {{0, 0, 3.0, 27, 36, -40}}; }).validate(), ConfigError);
  EXPECT_THROW(invalid([](ScenarioConfig& c) { c.spawns = {{0, 5, 3.0, 27, 36, 0}}; }).validate(), ConfigError);
  EXPECT_THROW(invalid([](ScenarioConfig& c) { c.markers = "0,0,10,10"; }).validate(), ConfigError);
  ScenarioConfig c;
  EXPECT_THROW(c.set("colour", "red"), ConfigError);
  EXPECT_THROW(c.set("illumination", "12"), ConfigError);
}

TEST(Texture, DeterministicAndHighContrast) {
  const Frame a = vehicle_texture(27, 36, 99);
  EXPECT_EQ(a, vehicle_texture(27, 36, 99));
  EXPECT_NE(a, vehicle_texture(27, 36, 100));
  const auto [lo, hi] = std::minmax_element(a.pixels().begin(), a.pixels().end());
  EXPECT_GE(*hi - *lo, 100);
}

TEST(TrainingSet, ShapesAndDeterminism) {
  const ScenarioConfig c = small_scene(10);
  const TrainingSet a = generate_training_set(c, 40, 60, 27, 36);
  const TrainingSet b = generate_training_set(c, 40, 60, 27, 36);
  ASSERT_EQ(a.positives.size(), 40u);
  ASSERT_EQ(a.negatives.size(), 60u);
  for (std::size_t i = 0; i < a.positives.size(); ++i) {
    EXPECT_EQ(a.positives[i].width(), 27);
    EXPECT_EQ(a.positives[i].height(), 36);
    EXPECT_EQ(frame_hash(a.positives[i]), frame_hash(b.positives[i]));
  }
  for (std::size_t i = 0; i < a.negatives.size(); ++i) EXPECT_EQ(frame_hash(a.negatives[i]), frame_hash(b.negatives[i]));
}

TEST(TrainingSet, UnperturbedPositiveIsTheVehicle) {
  ScenarioConfig c = small_scene(4);
  c.noise_sigma = 0;
  c.size_jitter = 0;
  const TrainingSet t = generate_training_set(c, 8, 1, c.vehicle_w, c.vehicle_h, 0.0);
  const SceneRenderer r(c);
  std::set<std::uint64_t> textures;
  for (std::size_t v = 0; v < r.vehicles().size(); ++v) textures.insert(frame_hash(r.texture(static_cast<int>(v))));
  for (const Frame& p : t.positives) EXPECT_TRUE(textures.count(frame_hash(p))) << "positive is not an exact vehicle crop";
}

TEST(TrainingSet, NegativesAvoidVehicles) {
  ScenarioConfig c = small_scene(12);
  c.noise_sigma = 0;
  const TrainingSet t = generate_training_set(c, 1, 200, 27, 36);
  // Vehicle trim and dark blocks never occur in the noiseless background, so a single such
  // pixel would reveal a crop that touches a vehicle.
  const SceneRenderer r(c);
  std::set<int> background_levels(r.background().pixels().begin(), r.background().pixels().end());
  std::set<int> vehicle_only;
  for (std::size_t v = 0; v < r.vehicles().size(); ++v)
    for (const int p : r.texture(static_cast<int>(v)).pixels())
      if (!background_levels.count(p)) vehicle_only.insert(p);
  ASSERT_FALSE(vehicle_only.empty());
  for (const Frame& n : t.negatives)
    for (const int p : n.pixels()) ASSERT_FALSE(vehicle_only.count(p));
}

TEST(NegativeSampler, DeterministicStream) {
  const ScenarioConfig c = small_scene(8);
  NegativeSampler a(c, 27, 36, 0.45, 30), b(c, 27, 36, 0.45, 30);
  for (int i = 0; i < 50; ++i) {
    const Frame x = a.next();
    EXPECT_EQ(x.width(), 27);
    EXPECT_EQ(x, b.next());
  }
}
