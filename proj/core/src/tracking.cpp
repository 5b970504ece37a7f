#include "vehicount/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <tuple>

#include "vehicount/error.hpp"

namespace vehicount {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void symmetrize(StateMatrix& p) { p = 0.5 * (p + p.transpose()).eval(); }

// A negative speed is the same motion as a positive one with the heading reversed.
// Flipping (v, a) and rotating phi by pi is linear, so P transforms exactly.
void canonicalize(Track& track) {
  if (track.state(kSpeed) >= 0.0) return;
  track.state(kSpeed) = -track.state(kSpeed);
  track.state(kAccel) = -track.state(kAccel);
  track.state(kHeading) = normalize_angle(track.state(kHeading) + std::numbers::pi);
  StateMatrix j = StateMatrix::Identity();
  j(kSpeed, kSpeed) = -1.0;
  j(kAccel, kAccel) = -1.0;
  track.covariance = j * track.covariance * j.transpose();
}

}  // namespace

double normalize_angle(double phi) {
  double r = std::fmod(phi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative value can round up to exactly 2*pi.
  if (r >= kTwoPi) r = 0.0;
  return r;
}

StateVector transition(const StateVector& s, double t) {
  StateVector out = s;
  const double c = std::cos(s(kHeading));
  const double sn = std::sin(s(kHeading));
  out(kX) += s(kSpeed) * t * c;
  out(kY) -= s(kSpeed) * t * sn;
  out(kSpeed) += s(kAccel) * t;
  out(kHeading) += s(kTurnRate) * t;
  return out;
}

StateMatrix transition_jacobian(const StateVector& s, double t) {
  const double c = std::cos(s(kHeading));
  const double sn = std::sin(s(kHeading));
  StateMatrix f = StateMatrix::Identity();
  f(kX, kSpeed) = t * c;
  f(kX, kHeading) = -s(kSpeed) * t * sn;
  f(kY, kSpeed) = -t * sn;
  f(kY, kHeading) = -s(kSpeed) * t * c;
  f(kSpeed, kAccel) = t;
  f(kHeading, kTurnRate) = t;
  return f;
}

Track predict(Track track, double t, const StateMatrix& process_noise) {
  if (!(t > 0.0)) throw DomainError("predict: time step must be positive");
  const StateMatrix f = transition_jacobian(track.state, t);
  track.state = transition(track.state, t);
  track.state(kHeading) = normalize_angle(track.state(kHeading));
  track.covariance = f * track.covariance * f.transpose() + process_noise;
  symmetrize(track.covariance);
  canonicalize(track);
  return track;
}

Track update(Track track, const Measurement& z, const MeasurementNoise& r) {
  const Eigen::Matrix2d s = track.covariance.topLeftCorner<2, 2>() + r;
  const double det = s.determinant();
  if (!(std::abs(det) > 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff() * s.cwiseAbs().maxCoeff())))
    throw DomainError("update: singular innovation covariance");
  const Eigen::Matrix<double, 6, 2> k = track.covariance.leftCols<2>() * s.inverse();
  const Eigen::Vector2d innovation(z.x - track.state(kX), z.y - track.state(kY));
  track.state += k * innovation;

  StateMatrix i_kh = StateMatrix::Identity();
  i_kh.leftCols<2>() -= k;
  track.covariance = (i_kh * track.covariance).eval();
  symmetrize(track.covariance);
  track.state(kHeading) = normalize_angle(track.state(kHeading));
  canonicalize(track);

  const Eigen::Vector2d position(track.state(kX), track.state(kY));
  track.total_distance += (position - track.last_position).norm();
  track.last_position = position;
  track.last_rect = z.rect;
  track.frames_seen += 1;
  track.misses = 0;
  return track;
}

Track derive_kinematics(Track track, const Measurement& z, double t) {
  if (!(t > 0.0)) throw DomainError("derive_kinematics: time step must be positive");
  if (track.frames_seen < 1) throw DomainError("derive_kinematics: track has no prior position");
  const double d_col = z.x - track.last_position.x();
  const double d_row = z.y - track.last_position.y();
  const double distance = std::hypot(d_col, d_row);
  track.state(kSpeed) = distance / t;
  if (distance > 0.0) {
    track.state(kHeading) = normalize_angle(std::atan2(-d_row, d_col));
    track.heading_valid = true;
  }
  return track;
}

Association associate(std::span<const Track> tracks, std::span<const Measurement> detections, double gate) {
  if (!(gate > 0.0)) throw DomainError("associate: gate must be positive");
  struct Candidate {
    double distance;
    std::int64_t track_id;
    int detection;
  };
  std::vector<Candidate> candidates;
  for (const Track& t : tracks) {
    for (std::size_t d = 0; d < detections.size(); ++d) {
      const double dist = std::hypot(detections[d].x - t.x(), detections[d].y - t.y());
      if (dist <= gate) candidates.push_back({dist, t.id, static_cast<int>(d)});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.track_id, a.detection) < std::tie(b.distance, b.track_id, b.detection);
  });

  Association out;
  std::vector<std::int64_t> claimed_tracks;
  std::vector<bool> claimed_detections(detections.size(), false);
  for (const Candidate& c : candidates) {
    if (claimed_detections[static_cast<std::size_t>(c.detection)]) continue;
    if (std::find(claimed_tracks.begin(), claimed_tracks.end(), c.track_id) != claimed_tracks.end()) continue;
    claimed_detections[static_cast<std::size_t>(c.detection)] = true;
    claimed_tracks.push_back(c.track_id);
    out.matches.emplace_back(c.track_id, c.detection);
  }
  for (const Track& t : tracks)
    if (std::find(claimed_tracks.begin(), claimed_tracks.end(), t.id) == claimed_tracks.end())
      out.unmatched_tracks.push_back(t.id);
  for (std::size_t d = 0; d < detections.size(); ++d)
    if (!claimed_detections[d]) out.unmatched_detections.push_back(static_cast<int>(d));
  return out;
}

Tracker::Tracker(TrackerParams params) : params_(std::move(params)) {
  if (!(params_.gate > 0.0)) throw DomainError("tracker: gate must be positive");
  if (params_.max_misses < 0) throw DomainError("tracker: max_misses must be nonnegative");
}

Track Tracker::spawn(const Measurement& z, std::int64_t frame_index) {
  Track t;
  t.id = next_id_++;
  t.state.setZero();
  t.state(kX) = z.x;
  t.state(kY) = z.y;
  t.covariance = params_.noise.initial.asDiagonal();
  t.frames_seen = 1;
  t.last_rect = z.rect;
  t.entry_position = Eigen::Vector2d(z.x, z.y);
  t.last_position = t.entry_position;
  t.first_frame = frame_index;
  t.last_frame = frame_index;
  return t;
}

std::vector<Track> Tracker::step(std::span<const Rect> detections, double t, std::int64_t frame_index) {
  if (!(t > 0.0)) throw DomainError("tracker: time step must be positive");
  const bool ekf = params_.mode == TrackerMode::kEkf;
  if (ekf) {
    const StateMatrix q = (params_.noise.process_per_second * t).asDiagonal();
    for (Track& track : tracks_) track = predict(std::move(track), t, q);
  }

  std::vector<Measurement> z;
  z.reserve(detections.size());
  for (const Rect& r : detections) z.push_back(Measurement::from_rect(r));
  const Association assoc = associate(tracks_, z, params_.gate);

  const MeasurementNoise r = params_.noise.measurement.asDiagonal();
  for (const auto& [id, d] : assoc.matches) {
    auto it = std::find_if(tracks_.begin(), tracks_.end(), [id = id](const Track& tr) { return tr.id == id; });
    Track& track = *it;
    const Measurement& m = z[static_cast<std::size_t>(d)];
    if (ekf) {
      if (track.frames_seen == 1) track = derive_kinematics(std::move(track), m, t * (track.misses + 1));
      track = update(std::move(track), m, r);
    } else {
      const Eigen::Vector2d position(m.x, m.y);
      track.total_distance += (position - track.last_position).norm();
      track.last_position = position;
      track.state(kX) = m.x;
      track.state(kY) = m.y;
      track.last_rect = m.rect;
      track.frames_seen += 1;
      track.misses = 0;
    }
    track.last_frame = frame_index;
  }
  for (const std::int64_t id : assoc.unmatched_tracks) {
    auto it = std::find_if(tracks_.begin(), tracks_.end(), [id](const Track& tr) { return tr.id == id; });
    it->misses += 1;
  }

  std::vector<Track> finished;
  std::vector<Track> alive;
  alive.reserve(tracks_.size() + assoc.unmatched_detections.size());
  for (Track& track : tracks_) (track.misses > params_.max_misses ? finished : alive).push_back(std::move(track));
  for (const int d : assoc.unmatched_detections) alive.push_back(spawn(z[static_cast<std::size_t>(d)], frame_index));
  tracks_ = std::move(alive);
  return finished;
}

std::vector<Track> Tracker::flush() {
  std::vector<Track> out = std::move(tracks_);
  tracks_.clear();
  return out;
}

void write_track_log_line(std::ostream& os, std::int64_t frame_index, const Track& t) {
  os << frame_index << ' ' << t.id << ' ' << t.state(kX) << ' ' << t.state(kY) << ' ' << t.state(kSpeed) << ' '
     << t.state(kAccel) << ' ' << t.state(kHeading) << ' ' << t.state(kTurnRate) << ' ' << t.frames_seen << ' '
     << t.total_distance << '\n';
}

}  // namespace vehicount
