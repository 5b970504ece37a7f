#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "vehicount/imaging.hpp"

namespace vehicount {

using StateVector = Eigen::Matrix<double, 6, 1>;
using StateMatrix = Eigen::Matrix<double, 6, 6>;
using MeasurementNoise = Eigen::Matrix2d;

/// Component indices of the state vector (position in image px, speed px/s,
/// acceleration px/s^2, heading rad, turn rate rad/s).
enum StateIndex : int { kX = 0, kY = 1, kSpeed = 2, kAccel = 3, kHeading = 4, kTurnRate = 5 };

/// Headings use the mathematical convention on an image whose row axis points down:
/// 0 is motion to the right, pi/2 is motion up the image, 3*pi/2 straight down.
double normalize_angle(double phi);

/// Constant-turn-rate / constant-acceleration Euler step, heading not wrapped:
///   x += v t cos(phi),  y -= v t sin(phi),  v += a t,  phi += omega t.
StateVector transition(const StateVector& s, double t);
StateMatrix transition_jacobian(const StateVector& s, double t);

struct Measurement {
  double x = 0.0;
  double y = 0.0;
  Rect rect;

  static Measurement from_rect(const Rect& r) { return {r.center_x(), r.center_y(), r}; }
};

struct Track {
  std::int64_t id = 0;
  StateVector state = StateVector::Zero();
  StateMatrix covariance = StateMatrix::Identity();
  int frames_seen = 0;
  int misses = 0;
  double total_distance = 0.0;
  Rect last_rect;
  Eigen::Vector2d entry_position = Eigen::Vector2d::Zero();
  Eigen::Vector2d last_position = Eigen::Vector2d::Zero();  // last posterior (or measured) position
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;  // frame of the latest associated detection
  bool heading_valid = false;   // heading derived from observed motion by the EKF

  double x() const { return state(kX); }
  double y() const { return state(kY); }
  double heading() const { return state(kHeading); }
};

struct EkfNoise {
  StateVector process_per_second = (StateVector() << 1, 1, 4, 1, 0.01, 0.001).finished();
  Eigen::Vector2d measurement = Eigen::Vector2d(4, 4);
  StateVector initial = (StateVector() << 25, 25, 100, 25, 1, 0.1).finished();
};

/// P <- F P F^T + Q; Q is the total process noise for this step.
Track predict(Track track, double t, const StateMatrix& process_noise);

/// Position-only EKF update; re-symmetrises P and accumulates travelled distance.
Track update(Track track, const Measurement& z, const MeasurementNoise& r);

/// Sets speed and heading from the displacement since the last position over t seconds.
Track derive_kinematics(Track track, const Measurement& z, double t);

struct Association {
  std::vector<std::pair<std::int64_t, int>> matches;  // (track id, detection index), acceptance order
  std::vector<std::int64_t> unmatched_tracks;
  std::vector<int> unmatched_detections;
};

/// Greedy nearest-centroid matching inside a distance gate.
Association associate(std::span<const Track> tracks, std::span<const Measurement> detections, double gate);

enum class TrackerMode { kEkf, kNone };

struct TrackerParams {
  TrackerMode mode = TrackerMode::kEkf;
  EkfNoise noise;
  double gate = 60.0;
  int max_misses = 5;
};

/// Multi-vehicle tracker. Owns track lifecycles and must be fed frames in order.
///
/// With TrackerMode::kNone the state is not filtered: positions jump to the latest
/// associated centroid and no heading is available.
class Tracker {
 public:
  explicit Tracker(TrackerParams params);

  /// Advances by t seconds and consumes the detections of frame_index. Returns the tracks
  /// that ended in this step (more than max_misses consecutive misses).
  std::vector<Track> step(std::span<const Rect> detections, double t, std::int64_t frame_index);

  /// Ends every live track (end of stream).
  std::vector<Track> flush();

  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerParams& params() const { return params_; }

 private:
  Track spawn(const Measurement& z, std::int64_t frame_index);

  TrackerParams params_;
  std::vector<Track> tracks_;
  std::int64_t next_id_ = 1;
};

/// `frame_idx track_id x y v a phi omega frames_seen total_distance`
void write_track_log_line(std::ostream& os, std::int64_t frame_index, const Track& track);

}  // namespace vehicount
