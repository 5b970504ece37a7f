#pragma once

#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vehicount/imaging.hpp"
#include "vehicount/tracking.hpp"

namespace vehicount {

/// Virtual marker: an image rectangle near the bottom of the frame, one per lane.
struct Marker {
  Rect rect;
  int lane = 0;

  friend bool operator==(const Marker&, const Marker&) = default;
};
using MarkerSet = std::vector<Marker>;

/// Throws DomainError unless markers are pairwise disjoint and each reaches the bottom third.
void validate_markers(std::span<const Marker> markers, int frame_w, int frame_h);

/// `x,y,w,h[,lane];...` (lane defaults to the marker's position in the list).
MarkerSet parse_markers(const std::string& text);
std::string format_markers(std::span<const Marker> markers);

enum class CountingMode { kBackgroundSubtraction, kFeature };

inline constexpr double kDefaultPhiMin = (1.0 / 8.0 + 1.0) * std::numbers::pi;
inline constexpr double kDefaultPhiMax = (7.0 / 8.0 + 1.0) * std::numbers::pi;

struct CountingPolicy {
  CountingMode mode = CountingMode::kBackgroundSubtraction;
  int tfc = 10;
  double phi_min = kDefaultPhiMin;
  double phi_max = kDefaultPhiMax;
  double distance_fraction = 0.2;
  bool require_marker_overlap = false;
};

/// phi (normalised to [0, 2pi)) inside the closed interval [phi_min, phi_max].
bool direction_in_interval(double phi, double phi_min = kDefaultPhiMin, double phi_max = kDefaultPhiMax);

struct CountDecision {
  bool counted = false;
  std::optional<int> marker;  // index into the marker set
};

/// Decides whether a finished track is a counted vehicle.
///
/// Background-subtraction mode: frames_seen > TFC, last rectangle overlaps a marker, and,
/// when the track carries an EKF heading, the heading lies in [phi_min, phi_max].
/// Feature mode: frames_seen > TFC and travelled distance > fraction * max(w, h); the
/// marker is the overlapped one (required when require_marker_overlap) or else the nearest.
CountDecision should_count(const Track& track, const CountingPolicy& policy, std::span<const Marker> markers,
                           int frame_w, int frame_h);

struct Accuracy {
  double percent = 0.0;
  long long rounded = 0;
};

/// (1 - (FP + FN) / GT) * 100, integer part rounded half away from zero.
Accuracy accuracy(long long fp, long long fn, long long gt);

struct CountEvent {
  std::int64_t frame = 0;
  int marker = 0;

  friend bool operator==(const CountEvent&, const CountEvent&) = default;
};

struct EventMatch {
  long long fp = 0;
  long long fn = 0;
  long long matched = 0;
};

/// Greedy nearest-in-time matching of counted to ground-truth events on the same marker.
EventMatch evaluate_counts(std::span<const CountEvent> counted, std::span<const CountEvent> truth, int tolerance);

struct CountingReport {
  std::vector<long long> per_marker;
  long long counted = 0;
  long long fp = 0;
  long long fn = 0;
  long long gt = 0;
  std::optional<Accuracy> accuracy;  // empty when gt == 0
  double duration_s = 0.0;           // footage length, for flow volume

  /// Counted vehicles per hour of footage.
  double flow_per_hour() const { return duration_s > 0 ? counted * 3600.0 / duration_s : 0.0; }
};

CountingReport make_report(std::span<const CountEvent> counted, std::span<const CountEvent> truth, int tolerance,
                           std::size_t marker_count, double duration_s);

/// `RESULT fp=<n> fn=<n> gt=<n> acc_real=<x.xx> acc_int=<n> counted=<n>`; accuracy fields
/// read `na` when gt == 0.
std::string result_line(const CountingReport& report);
void write_report(std::ostream& os, const CountingReport& report);

/// `frame_idx marker` per line.
void write_events(std::ostream& os, std::span<const CountEvent> events);
std::vector<CountEvent> read_events(std::istream& is);

}  // namespace vehicount
