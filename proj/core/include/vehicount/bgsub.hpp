#pragma once

#include <cstdint>
#include <vector>

#include "vehicount/imaging.hpp"

namespace vehicount {

/// Binary foreground mask, 1 = foreground.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height) : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint8_t at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
  std::size_t count() const;

  /// 0/255 frame for debugging dumps.
  Frame to_frame() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Exponential running-average background estimate.
class BackgroundModel {
 public:
  explicit BackgroundModel(double learning_rate = 0.05);

  bool initialized() const { return !background_.empty(); }
  int width() const { return width_; }
  int height() const { return height_; }
  double learning_rate() const { return learning_rate_; }
  double at(int x, int y) const { return background_[static_cast<std::size_t>(y) * width_ + x]; }

  /// First call copies the frame; later calls blend B <- (1 - rate) * B + rate * frame.
  void update(const Frame& frame);

  /// Directly sets the estimate (used to seed tests and tools).
  void assign(int width, int height, std::vector<double> values);

  /// Background rounded to the nearest intensity.
  Frame rounded() const;

 private:
  double learning_rate_;
  int width_ = 0;
  int height_ = 0;
  std::vector<double> background_;
};

BackgroundModel update_background(BackgroundModel model, const Frame& frame);

/// mask(p) = 1 iff |frame(p) - B(p)| >= threshold.
Mask subtract(const BackgroundModel& model, const Frame& frame, double threshold);

/// Erosion then dilation with a (2r+1)^2 square. Pixels outside the image count as
/// foreground for erosion and background for dilation, so objects cut by the border
/// are not eroded from that side.
Mask morphological_open(const Mask& mask, int radius);

/// Tight bounding boxes of 8-connected components with at least min_area pixels,
/// sorted by (y, x) of the top-left corner.
std::vector<Rect> extract_blobs(const Mask& mask, int min_area);

}  // namespace vehicount
