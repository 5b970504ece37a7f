#include "vehicount/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include "vehicount/error.hpp"

namespace vehicount {

long long intersection_area(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.right(), b.right());
  const int y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return 0;
  return static_cast<long long>(x1 - x0) * (y1 - y0);
}

double intersection_over_union(const Rect& a, const Rect& b) {
  const long long inter = intersection_area(a, b);
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

Frame::Frame(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw DomainError("frame dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

Frame::Frame(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) throw DomainError("frame dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * height)
    throw DomainError("pixel count does not match frame dimensions");
}

IntegralImage::IntegralImage(const Frame& frame) : width_(frame.width()), height_(frame.height()) {
  if (width_ > kMaxDimension || height_ > kMaxDimension)
    throw DomainError("integral image supports frames up to 4096x4096");
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  table_.assign(stride * (static_cast<std::size_t>(height_) + 1), 0);
  for (int y = 0; y < height_; ++y) {
    std::uint32_t row = 0;
    const std::uint32_t* above = &table_[static_cast<std::size_t>(y) * stride];
    std::uint32_t* cur = &table_[static_cast<std::size_t>(y + 1) * stride];
    for (int x = 0; x < width_; ++x) {
      row += frame.at(x, y);
      cur[x + 1] = above[x + 1] + row;
    }
  }
}

IntegralImage integral(const Frame& frame) { return IntegralImage(frame); }

double block_mean(const IntegralImage& ii, const Rect& r) {
  if (!ii.contains(r)) throw DomainError("block_mean: rectangle out of bounds");
  return static_cast<double>(ii.sum(r)) / static_cast<double>(r.area());
}

long long round_half_away(double v) { return static_cast<long long>(std::round(v)); }

Frame downscale(const Frame& frame, int factor) {
  if (factor < 1) throw DomainError("downscale factor must be positive");
  if (frame.width() % factor != 0 || frame.height() % factor != 0)
    throw DomainError("downscale factor must divide both frame dimensions");
  if (factor == 1) return frame;
  const int ow = frame.width() / factor;
  const int oh = frame.height() / factor;
  const unsigned area = static_cast<unsigned>(factor) * factor;
  Frame out(ow, oh);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      unsigned sum = 0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) sum += frame.at(ox * factor + dx, oy * factor + dy);
      // Integer half-away rounding of sum / area (all terms nonnegative).
      out.at(ox, oy) = static_cast<std::uint8_t>((2 * sum + area) / (2 * area));
    }
  }
  return out;
}

Frame crop_resample(const Frame& frame, double x, double y, double w, double h, int out_w, int out_h,
                    Interpolation mode) {
  if (out_w < 1 || out_h < 1 || !(w > 0) || !(h > 0)) throw DomainError("crop_resample: empty size");
  if (x < 0 || y < 0 || x + w > frame.width() || y + h > frame.height())
    throw DomainError("crop_resample: source window out of bounds");
  Frame out(out_w, out_h);
  const double sx = w / out_w;
  const double sy = h / out_h;
  if (mode == Interpolation::kNearest) {
    for (int j = 0; j < out_h; ++j) {
      const int py = std::clamp(static_cast<int>(std::floor(y + (j + 0.5) * sy)), 0, frame.height() - 1);
      for (int i = 0; i < out_w; ++i)
        out.at(i, j) = frame.at(std::clamp(static_cast<int>(std::floor(x + (i + 0.5) * sx)), 0, frame.width() - 1), py);
    }
    return out;
  }
  for (int j = 0; j < out_h; ++j) {
    const double fy = std::clamp(y + (j + 0.5) * sy - 0.5, 0.0, frame.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, frame.height() - 1);
    const double ty = fy - y0;
    for (int i = 0; i < out_w; ++i) {
      const double fx = std::clamp(x + (i + 0.5) * sx - 0.5, 0.0, frame.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, frame.width() - 1);
      const double tx = fx - x0;
      const double top = frame.at(x0, y0) + tx * (frame.at(x1, y0) - frame.at(x0, y0));
      const double bottom = frame.at(x0, y1) + tx * (frame.at(x1, y1) - frame.at(x0, y1));
      out.at(i, j) = static_cast<std::uint8_t>(std::clamp<long long>(round_half_away(top + ty * (bottom - top)), 0, 255));
    }
  }
  return out;
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& data, std::size_t& pos) {
  for (;;) {
    while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (pos < data.size() && data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos])) && data[pos] != '#') ++pos;
  return data.substr(start, pos - start);
}

int parse_positive(const std::string& token, const char* what) {
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw FormatError(std::string("pgm: bad ") + what);
  const long v = std::stol(token);
  if (v < 1 || v > 1 << 20) throw FormatError(std::string("pgm: bad ") + what);
  return static_cast<int>(v);
}

}  // namespace

Frame load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  if (next_token(data, pos) != "P5") throw FormatError("pgm: wrong magic in " + path.string());
  const int w = parse_positive(next_token(data, pos), "width");
  const int h = parse_positive(next_token(data, pos), "height");
  const int maxval = parse_positive(next_token(data, pos), "maxval");
  if (maxval != 255) throw FormatError("pgm: unsupported maxval " + std::to_string(maxval));
  if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
    throw FormatError("pgm: truncated header in " + path.string());
  ++pos;

  const std::size_t need = static_cast<std::size_t>(w) * h;
  if (data.size() - pos < need) throw FormatError("pgm: truncated payload in " + path.string());
  std::vector<std::uint8_t> pixels(data.begin() + static_cast<std::ptrdiff_t>(pos),
                                   data.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return Frame(w, h, std::move(pixels));
}

void save_pgm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << frame.width() << ' ' << frame.height() << "\n255\n";
  const auto px = frame.pixels();
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::filesystem::path frame_path(const std::filesystem::path& dir, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%06zu.pgm", index);
  return dir / name;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t frame_hash(const Frame& frame) {
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(frame.width()), static_cast<std::uint32_t>(frame.height())};
  std::uint64_t h = fnv1a64({reinterpret_cast<const std::uint8_t*>(dims), sizeof(dims)});
  return fnv1a64(frame.pixels(), h);
}

}  // namespace vehicount
