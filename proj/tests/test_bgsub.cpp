#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "support.hpp"
#include "vehicount/bgsub.hpp"
#include "vehicount/error.hpp"

using namespace vehicount;

namespace {

BackgroundModel constant_model(int w, int h, double v, double rate = 0.05) {
  BackgroundModel m(rate);
  m.assign(w, h, std::vector<double>(static_cast<std::size_t>(w) * h, v));
  return m;
}

struct Component {
  Rect rect;
  long long pixels = 0;
};

// Iterative flood fill with 8-neighbourhood.
std::vector<Component> flood_fill_components(const Mask& m) {
  std::vector<int> label(static_cast<std::size_t>(m.width()) * m.height(), -1);
  std::vector<Component> out;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y) || label[static_cast<std::size_t>(y) * m.width() + x] >= 0) continue;
      const int id = static_cast<int>(out.size());
      int x0 = x, x1 = x, y0 = y, y1 = y;
      long long count = 0;
      std::vector<std::pair<int, int>> stack{{x, y}};
      label[static_cast<std::size_t>(y) * m.width() + x] = id;
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++count;
        x0 = std::min(x0, cx), x1 = std::max(x1, cx), y0 = std::min(y0, cy), y1 = std::max(y1, cy);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height() || !m.at(nx, ny)) continue;
            auto& l = label[static_cast<std::size_t>(ny) * m.width() + nx];
            if (l < 0) {
              l = id;
              stack.emplace_back(nx, ny);
            }
          }
      }
      out.push_back({{x0, y0, x1 - x0 + 1, y1 - y0 + 1}, count});
    }
  return out;
}

Mask random_mask(vctest::Gen& gen, int w, int h, int percent) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(x, y) = gen.integer(0, 99) < percent;
  return m;
}

}  // namespace

TEST(Background, FirstFrameInitializes) {
  vctest::Gen gen(61);
  const Frame f = gen.frame(7, 5);
  BackgroundModel m(0.2);
  EXPECT_FALSE(m.initialized());
  m.update(f);
  EXPECT_EQ(m.rounded(), f);
  for (int i = 0; i < 30; ++i) m = update_background(m, f);
  EXPECT_EQ(m.rounded(), f);
}

TEST(Background, SingleBlendStep) {
  BackgroundModel m = constant_model(4, 3, 0.0, 0.1);
  m.update(Frame(4, 3, 100));
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_NEAR(m.at(x, y), 10.0, 1e-12);
}

TEST(Background, GeometricSeries) {
  BackgroundModel m = constant_model(2, 2, 0.0, 0.1);
  for (int i = 0; i < 50; ++i) m.update(Frame(2, 2, 100));
  EXPECT_NEAR(m.at(1, 1), 100.0 * (1.0 - std::pow(0.9, 50)), 1e-9);
  EXPECT_NEAR(m.at(1, 1), 99.48, 0.01);
}

TEST(Background, ContractionProperty) {
  vctest::Gen gen(62);
  for (int trial = 0; trial < 50; ++trial) {
    const double rate = gen.real(0.01, 0.99);
    BackgroundModel m(rate);
    m.update(gen.frame(9, 6));
    const BackgroundModel before = m;
    const Frame f = gen.frame(9, 6);
    m.update(f);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 9; ++x) {
        const double expected = (1.0 - rate) * std::abs(before.at(x, y) - f.at(x, y));
        EXPECT_NEAR(std::abs(m.at(x, y) - f.at(x, y)), expected, 1e-12);
        EXPECT_GE(m.at(x, y), 0.0);
        EXPECT_LE(m.at(x, y), 255.0);
      }
  }
}

TEST(Background, Errors) {
  EXPECT_THROW(BackgroundModel(0.0), DomainError);
  EXPECT_THROW(BackgroundModel(1.0), DomainError);
  BackgroundModel m;
  m.update(Frame(4, 4));
  EXPECT_THROW(m.update(Frame(4, 5)), DomainError);
  EXPECT_THROW(subtract(m, Frame(5, 4), 10), DomainError);
  EXPECT_THROW(subtract(BackgroundModel{}, Frame(5, 4), 10), DomainError);
}

TEST(Subtract, Examples) {
  vctest::Gen gen(63);
  const Frame f = gen.frame(10, 8);
  BackgroundModel m;
  m.update(f);
  EXPECT_EQ(subtract(m, f, 1).count(), 0u);

  const BackgroundModel flat = constant_model(5, 5, 100.0);
  Frame g(5, 5, 100);
  g.at(2, 3) = 110;
  g.at(4, 4) = 109;
  const Mask mask = subtract(flat, g, 10);
  EXPECT_EQ(mask.at(2, 3), 1);
  EXPECT_EQ(mask.at(4, 4), 0);
  EXPECT_EQ(mask.count(), 1u);
}

TEST(Subtract, GlobalStepFlipsMask) {
  vctest::Gen gen(64);
  const Frame f = gen.frame(240, 135, 60, 200);
  BackgroundModel m;
  m.update(f);
  Frame lit = f;
  for (auto& p : lit.pixels()) p = static_cast<std::uint8_t>(p + 50);
  const Mask mask = subtract(m, lit, 10);
  EXPECT_GE(static_cast<double>(mask.count()) / (240.0 * 135.0), 0.99);
  EXPECT_EQ(mask.count(), 240u * 135u);
}

TEST(Subtract, SymmetricProperty) {
  vctest::Gen gen(65);
  for (int trial = 0; trial < 30; ++trial) {
    const Frame a = gen.frame(12, 9);
    const Frame b = gen.frame(12, 9);
    BackgroundModel ma, mb;
    ma.update(a);
    mb.update(b);
    const double th = gen.integer(1, 60);
    EXPECT_EQ(subtract(ma, b, th), subtract(mb, a, th));
  }
}

TEST(Open, Examples) {
  vctest::Gen gen(66);
  const Mask random = random_mask(gen, 20, 20, 50);
  EXPECT_EQ(morphological_open(random, 0), random);

  Mask dot(9, 9);
  dot.at(4, 4) = 1;
  EXPECT_EQ(morphological_open(dot, 1).count(), 0u);

  Mask square(20, 20);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 15; ++x) square.at(x, y) = 1;
  EXPECT_EQ(morphological_open(square, 1), square);

  EXPECT_THROW(morphological_open(square, -1), DomainError);
}

TEST(Open, BorderObjectsKeepTheirEdge) {
  Mask m(10, 10);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) m.at(x, y) = 1;
  EXPECT_EQ(morphological_open(m, 1), m);
}

TEST(Open, IsIdempotentAndAntiExtensive) {
  vctest::Gen gen(67);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask m = random_mask(gen, 30, 25, gen.integer(30, 80));
    const int r = gen.integer(1, 2);
    const Mask o = morphological_open(m, r);
    EXPECT_EQ(morphological_open(o, r), o);
    for (int y = 0; y < 25; ++y)
      for (int x = 0; x < 30; ++x) EXPECT_LE(o.at(x, y), m.at(x, y));
  }
}

TEST(Blobs, Examples) {
  Mask m(20, 20);
  for (int y = 3; y < 10; ++y)
    for (int x = 4; x < 9; ++x) m.at(x, y) = 1;
  const auto one = extract_blobs(m, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], (Rect{4, 3, 5, 7}));

  Mask diag(6, 6);
  diag.at(1, 1) = 1;
  diag.at(2, 2) = 1;
  const auto d = extract_blobs(diag, 1);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], (Rect{1, 1, 2, 2}));

  EXPECT_TRUE(extract_blobs(diag, 3).empty());
}

TEST(Blobs, MatchFloodFillOracle) {
  vctest::Gen gen(68);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask m = random_mask(gen, 64, 64, gen.integer(10, 55));
    const int min_area = gen.integer(1, 6);
    std::vector<Rect> expected;
    for (const auto& c : flood_fill_components(m))
      if (c.pixels >= min_area) expected.push_back(c.rect);
    std::sort(expected.begin(), expected.end(), [](const Rect& a, const Rect& b) {
      return std::tie(a.y, a.x, a.w, a.h) < std::tie(b.y, b.x, b.w, b.h);
    });
    auto got = extract_blobs(m, min_area);
    // Only the (y, x) order is specified; compare as sorted lists.
    std::sort(got.begin(), got.end(), [](const Rect& a, const Rect& b) {
      return std::tie(a.y, a.x, a.w, a.h) < std::tie(b.y, b.x, b.w, b.h);
    });
    ASSERT_EQ(got, expected);
  }
}

TEST(Blobs, SortedAndTight) {
  vctest::Gen gen(69);
  const Mask m = random_mask(gen, 64, 64, 35);
  const auto blobs = extract_blobs(m, 1);
  for (std::size_t i = 1; i < blobs.size(); ++i)
    EXPECT_LE(std::tie(blobs[i - 1].y, blobs[i - 1].x), std::tie(blobs[i].y, blobs[i].x));
  for (const Rect& r : blobs) {
    auto any = [&](int x0, int y0, int x1, int y1) {
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
          if (m.at(x, y)) return true;
      return false;
    };
    EXPECT_TRUE(any(r.x, r.y, r.right() - 1, r.y));
    EXPECT_TRUE(any(r.x, r.bottom() - 1, r.right() - 1, r.bottom() - 1));
    EXPECT_TRUE(any(r.x, r.y, r.x, r.bottom() - 1));
    EXPECT_TRUE(any(r.right() - 1, r.y, r.right() - 1, r.bottom() - 1));
  }
}

TEST(Mask, DebugFrame) {
  Mask m(2, 1);
  m.at(1, 0) = 1;
  EXPECT_EQ(m.to_frame(), Frame(2, 1, {0, 255}));
}
