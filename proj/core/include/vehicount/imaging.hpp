#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vehicount {

/// Axis-aligned pixel rectangle. (x, y) is the top-left corner.
struct Rect {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  int right() const { return x + w; }   // exclusive
  int bottom() const { return y + h; }  // exclusive
  long long area() const { return static_cast<long long>(w) * h; }
  double center_x() const { return x + w / 2.0; }
  double center_y() const { return y + h / 2.0; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Area of the intersection of two rectangles (0 when disjoint or only touching).
long long intersection_area(const Rect& a, const Rect& b);
double intersection_over_union(const Rect& a, const Rect& b);

/// 8-bit grayscale raster, row-major.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, std::uint8_t fill = 0);
  Frame(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  bool contains(const Rect& r) const {
    return r.x >= 0 && r.y >= 0 && r.w >= 1 && r.h >= 1 && r.right() <= width_ && r.bottom() <= height_;
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Summed-area table of a Frame with a zero first row and column.
/// Sums are exact in 32 bits for frames up to 4096x4096 (4096*4096*255 < 2^32).
class IntegralImage {
 public:
  static constexpr int kMaxDimension = 4096;

  IntegralImage() = default;
  explicit IntegralImage(const Frame& frame);

  /// Width and height of the source frame (the table is one larger in each direction).
  int width() const { return width_; }
  int height() const { return height_; }

  /// Sum of pixels with column < i and row < j.
  std::uint32_t at(int i, int j) const { return table_[static_cast<std::size_t>(j) * (width_ + 1) + i]; }

  /// Sum over a rectangle by four corner lookups. No bounds check.
  std::uint32_t sum(int x, int y, int w, int h) const {
    return at(x + w, y + h) - at(x, y + h) - at(x + w, y) + at(x, y);
  }
  std::uint32_t sum(const Rect& r) const { return sum(r.x, r.y, r.w, r.h); }

  bool contains(const Rect& r) const {
    return r.x >= 0 && r.y >= 0 && r.w >= 1 && r.h >= 1 && r.right() <= width_ && r.bottom() <= height_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint32_t> table_;
};

IntegralImage integral(const Frame& frame);

/// Arithmetic mean of the pixels in r. Throws DomainError when r leaves the image.
double block_mean(const IntegralImage& ii, const Rect& r);

/// Area-averaging downscale; each output pixel is the rounded mean of a factor x factor block.
Frame downscale(const Frame& frame, int factor);

enum class Interpolation { kBilinear, kNearest };

/// Resample of the source window (x, y, w, h) (real-valued, must lie inside the frame) to
/// out_w x out_h. Integer windows of the output size copy pixels exactly.
Frame crop_resample(const Frame& frame, double x, double y, double w, double h, int out_w, int out_h,
                    Interpolation mode = Interpolation::kBilinear);

/// Binary PGM (P5, maxval 255).
Frame load_pgm(const std::filesystem::path& path);
void save_pgm(const Frame& frame, const std::filesystem::path& path);

/// `frame_NNNNNN.pgm` inside dir.
std::filesystem::path frame_path(const std::filesystem::path& dir, std::size_t index);

/// Round half away from zero.
long long round_half_away(double v);

/// FNV-1a 64-bit over raw bytes; used for determinism fingerprints.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t frame_hash(const Frame& frame);

}  // namespace vehicount
