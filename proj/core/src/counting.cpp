#include "vehicount/counting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <tuple>

#include "vehicount/error.hpp"

namespace vehicount {

void validate_markers(std::span<const Marker> markers, int frame_w, int frame_h) {
  const Rect bottom_third{0, frame_h - frame_h / 3, frame_w, std::max(1, frame_h / 3)};
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const Rect& r = markers[i].rect;
    if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0) throw DomainError("marker " + std::to_string(i) + " has an invalid rectangle");
    if (intersection_area(r, bottom_third) == 0)
      throw DomainError("marker " + std::to_string(i) + " does not reach the bottom third of the frame");
    for (std::size_t j = 0; j < i; ++j)
      if (intersection_area(r, markers[j].rect) > 0)
        throw DomainError("markers " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
  }
}

MarkerSet parse_markers(const std::string& text) {
  MarkerSet out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ';');) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<int> v;
    std::stringstream is(item);
    for (std::string tok; std::getline(is, tok, ',');) {
      try {
        std::size_t used = 0;
        v.push_back(std::stoi(tok, &used));
        if (tok.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError("bad marker entry '" + item + "'");
      }
    }
    if (v.size() != 4 && v.size() != 5) throw ConfigError("marker entries need x,y,w,h[,lane]: '" + item + "'");
    out.push_back(Marker{Rect{v[0], v[1], v[2], v[3]}, v.size() == 5 ? v[4] : static_cast<int>(out.size())});
  }
  return out;
}

std::string format_markers(std::span<const Marker> markers) {
  std::string s;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const Rect& r = markers[i].rect;
    if (i) s += ';';
    s += std::to_string(r.x) + ',' + std::to_string(r.y) + ',' + std::to_string(r.w) + ',' + std::to_string(r.h) + ',' +
         std::to_string(markers[i].lane);
  }
  return s;
}

bool direction_in_interval(double phi, double phi_min, double phi_max) {
  const double p = normalize_angle(phi);
  return p >= phi_min && p <= phi_max;
}

namespace {

std::optional<int> overlapping_marker(const Rect& r, std::span<const Marker> markers) {
  std::optional<int> best;
  long long best_area = 0;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const long long a = intersection_area(r, markers[i].rect);
    if (a > best_area) {
      best_area = a;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::optional<int> nearest_marker(const Rect& r, std::span<const Marker> markers) {
  std::optional<int> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const double d = std::hypot(r.center_x() - markers[i].rect.center_x(), r.center_y() - markers[i].rect.center_y());
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

CountDecision should_count(const Track& track, const CountingPolicy& policy, std::span<const Marker> markers,
                           int frame_w, int frame_h) {
  CountDecision out;
  if (track.frames_seen <= policy.tfc) return out;

  if (policy.mode == CountingMode::kBackgroundSubtraction) {
    const auto marker = overlapping_marker(track.last_rect, markers);
    if (!marker) return out;
    if (track.heading_valid && !direction_in_interval(track.heading(), policy.phi_min, policy.phi_max)) return out;
    out.counted = true;
    out.marker = marker;
    return out;
  }

  const double threshold = policy.distance_fraction * std::max(frame_w, frame_h);
  if (!(track.total_distance > threshold)) return out;
  if (policy.require_marker_overlap) {
    out.marker = overlapping_marker(track.last_rect, markers);
    out.counted = out.marker.has_value();
  } else {
    out.marker = nearest_marker(track.last_rect, markers);
    out.counted = true;
  }
  return out;
}

Accuracy accuracy(long long fp, long long fn, long long gt) {
  if (gt <= 0) throw DomainError("accuracy: ground truth count must be positive");
  if (fp < 0 || fn < 0) throw DomainError("accuracy: negative error counts");
  Accuracy a;
  a.percent = (1.0 - static_cast<double>(fp + fn) / static_cast<double>(gt)) * 100.0;
  a.rounded = round_half_away(a.percent);
  return a;
}

EventMatch evaluate_counts(std::span<const CountEvent> counted, std::span<const CountEvent> truth, int tolerance) {
  if (tolerance < 0) throw DomainError("evaluate_counts: negative tolerance");
  struct Pair {
    std::int64_t gap;
    std::size_t c;
    std::size_t g;
  };
  std::vector<Pair> pairs;
  for (std::size_t c = 0; c < counted.size(); ++c) {
    for (std::size_t g = 0; g < truth.size(); ++g) {
      if (counted[c].marker != truth[g].marker) continue;
      const std::int64_t gap = counted[c].frame > truth[g].frame ? counted[c].frame - truth[g].frame
                                                                 : truth[g].frame - counted[c].frame;
      if (gap <= tolerance) pairs.push_back({gap, c, g});
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return std::tie(a.gap, a.c, a.g) < std::tie(b.gap, b.c, b.g); });
  std::vector<bool> used_c(counted.size(), false);
  std::vector<bool> used_g(truth.size(), false);
  EventMatch m;
  for (const Pair& p : pairs) {
    if (used_c[p.c] || used_g[p.g]) continue;
    used_c[p.c] = used_g[p.g] = true;
    ++m.matched;
  }
  m.fp = static_cast<long long>(counted.size()) - m.matched;
  m.fn = static_cast<long long>(truth.size()) - m.matched;
  return m;
}

CountingReport make_report(std::span<const CountEvent> counted, std::span<const CountEvent> truth, int tolerance,
                           std::size_t marker_count, double duration_s) {
  CountingReport r;
  r.per_marker.assign(marker_count, 0);
  for (const CountEvent& e : counted)
    if (e.marker >= 0 && static_cast<std::size_t>(e.marker) < marker_count) ++r.per_marker[static_cast<std::size_t>(e.marker)];
  r.counted = static_cast<long long>(counted.size());
  const EventMatch m = evaluate_counts(counted, truth, tolerance);
  r.fp = m.fp;
  r.fn = m.fn;
  r.gt = static_cast<long long>(truth.size());
  if (r.gt > 0) r.accuracy = accuracy(r.fp, r.fn, r.gt);
  r.duration_s = duration_s;
  return r;
}

std::string result_line(const CountingReport& report) {
  std::string acc_real = "na";
  std::string acc_int = "na";
  if (report.accuracy) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", report.accuracy->percent);
    acc_real = buf;
    acc_int = std::to_string(report.accuracy->rounded);
  }
  return "RESULT fp=" + std::to_string(report.fp) + " fn=" + std::to_string(report.fn) + " gt=" +
         std::to_string(report.gt) + " acc_real=" + acc_real + " acc_int=" + acc_int +
         " counted=" + std::to_string(report.counted);
}

void write_report(std::ostream& os, const CountingReport& report) {
  os << "counted vehicles: " << report.counted << '\n';
  for (std::size_t i = 0; i < report.per_marker.size(); ++i) os << "  marker " << i << ": " << report.per_marker[i] << '\n';
  os << "FP / FN / GT: " << report.fp << " / " << report.fn << " / " << report.gt << '\n';
  if (report.accuracy) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f %% (%lld %%)", report.accuracy->percent, report.accuracy->rounded);
    os << "accuracy: " << buf << '\n';
  } else {
    os << "accuracy: undefined (no ground-truth vehicles)\n";
  }
  if (report.duration_s > 0) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f veh/h over %.1f s", report.flow_per_hour(), report.duration_s);
    os << "flow: " << buf << '\n';
  }
  os << result_line(report) << '\n';
}

void write_events(std::ostream& os, std::span<const CountEvent> events) {
  for (const CountEvent& e : events) os << e.frame << ' ' << e.marker << '\n';
}

std::vector<CountEvent> read_events(std::istream& is) {
  std::vector<CountEvent> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::stringstream ss(line);
    CountEvent e;
    if (!(ss >> e.frame >> e.marker)) throw FormatError("bad event line '" + line + "'");
    out.push_back(e);
  }
  return out;
}

}  // namespace vehicount
