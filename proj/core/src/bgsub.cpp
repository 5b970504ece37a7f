#include "vehicount/bgsub.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "vehicount/error.hpp"

namespace vehicount {

std::size_t Mask::count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

Frame Mask::to_frame() const {
  Frame f(width_, height_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) f.at(x, y) = at(x, y) ? 255 : 0;
  return f;
}

BackgroundModel::BackgroundModel(double learning_rate) : learning_rate_(learning_rate) {
  if (!(learning_rate > 0.0 && learning_rate < 1.0)) throw DomainError("background learning rate must be in (0, 1)");
}

void BackgroundModel::update(const Frame& frame) {
  if (!initialized()) {
    width_ = frame.width();
    height_ = frame.height();
    background_.assign(frame.pixels().begin(), frame.pixels().end());
    return;
  }
  if (frame.width() != width_ || frame.height() != height_) throw DomainError("background: frame size mismatch");
  const auto px = frame.pixels();
  const double keep = 1.0 - learning_rate_;
  for (std::size_t i = 0; i < background_.size(); ++i) background_[i] = keep * background_[i] + learning_rate_ * px[i];
}

void BackgroundModel::assign(int width, int height, std::vector<double> values) {
  if (width < 1 || height < 1 || values.size() != static_cast<std::size_t>(width) * height)
    throw DomainError("background: bad dimensions");
  for (const double v : values)
    if (!(v >= 0.0 && v <= 255.0)) throw DomainError("background: values must lie in [0, 255]");
  width_ = width;
  height_ = height;
  background_ = std::move(values);
}

Frame BackgroundModel::rounded() const {
  if (!initialized()) throw DomainError("background: model not initialised");
  Frame f(width_, height_);
  auto px = f.pixels();
  for (std::size_t i = 0; i < background_.size(); ++i) px[i] = static_cast<std::uint8_t>(round_half_away(background_[i]));
  return f;
}

BackgroundModel update_background(BackgroundModel model, const Frame& frame) {
  model.update(frame);
  return model;
}

Mask subtract(const BackgroundModel& model, const Frame& frame, double threshold) {
  if (!model.initialized()) throw DomainError("subtract: background model not initialised");
  if (frame.width() != model.width() || frame.height() != model.height()) throw DomainError("subtract: frame size mismatch");
  Mask mask(frame.width(), frame.height());
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x) mask.at(x, y) = std::abs(frame.at(x, y) - model.at(x, y)) >= threshold;
  return mask;
}

namespace {

// Separable square min/max filter; `border` is the value assumed outside the image.
Mask square_filter(const Mask& in, int radius, bool erode) {
  const int w = in.width();
  const int h = in.height();
  const std::uint8_t border = erode ? 1 : 0;
  Mask tmp(w, h);
  Mask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = erode ? 1 : 0;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int xx = x + dx;
        const std::uint8_t s = (xx < 0 || xx >= w) ? border : in.at(xx, y);
        v = erode ? std::min(v, s) : std::max(v, s);
      }
      tmp.at(x, y) = v;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = erode ? 1 : 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        const std::uint8_t s = (yy < 0 || yy >= h) ? border : tmp.at(x, yy);
        v = erode ? std::min(v, s) : std::max(v, s);
      }
      out.at(x, y) = v;
    }
  }
  return out;
}

}  // namespace

Mask morphological_open(const Mask& mask, int radius) {
  if (radius < 0) throw DomainError("morphological_open: negative radius");
  if (radius == 0) return mask;
  return square_filter(square_filter(mask, radius, true), radius, false);
}

std::vector<Rect> extract_blobs(const Mask& mask, int min_area) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::pair<int, int>> stack;
  std::vector<Rect> blobs;

  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!mask.at(x0, y0) || seen[static_cast<std::size_t>(y0) * w + x0]) continue;
      int min_x = x0, max_x = x0, min_y = y0, max_y = y0;
      long long area = 0;
      stack.assign(1, {x0, y0});
      seen[static_cast<std::size_t>(y0) * w + x0] = 1;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        ++area;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            auto& s = seen[static_cast<std::size_t>(ny) * w + nx];
            if (s || !mask.at(nx, ny)) continue;
            s = 1;
            stack.emplace_back(nx, ny);
          }
        }
      }
      if (area >= min_area) blobs.push_back(Rect{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1});
    }
  }
  std::stable_sort(blobs.begin(), blobs.end(),
                   [](const Rect& a, const Rect& b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
  return blobs;
}

}  // namespace vehicount
