#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "support.hpp"
#include "vehicount/error.hpp"
#include "vehicount/imaging.hpp"

using namespace vehicount;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::uint64_t naive_sum(const Frame& f, const Rect& r) {
  std::uint64_t s = 0;
  for (int y = r.y; y < r.bottom(); ++y)
    for (int x = r.x; x < r.right(); ++x) s += f.at(x, y);
  return s;
}

}  // namespace

TEST(Frame, RejectsBadDimensions) {
  EXPECT_THROW(Frame(0, 3), DomainError);
  EXPECT_THROW(Frame(2, 2, std::vector<std::uint8_t>(3)), DomainError);
}

TEST(Pgm, DecodesTwoByTwo) {
  vctest::TempDir dir("pgm");
  const auto p = dir.path() / "a.pgm";
  write_bytes(p, std::string("P5\n2 2\n255\n") + std::string("\x00\x40\x80\xff", 4));
  const Frame f = load_pgm(p);
  EXPECT_EQ(f, Frame(2, 2, {0, 64, 128, 255}));
}

TEST(Pgm, ToleratesHeaderComments) {
  vctest::TempDir dir("pgm");
  const auto p = dir.path() / "c.pgm";
  write_bytes(p, std::string("P5 # comment\n# another\n2 1 255\n") + std::string("\x07\x08", 2));
  EXPECT_EQ(load_pgm(p), Frame(2, 1, {7, 8}));
}

TEST(Pgm, Errors) {
  vctest::TempDir dir("pgm");
  EXPECT_THROW(load_pgm(dir.path() / "missing.pgm"), IoError);

  write_bytes(dir.path() / "p6.pgm", "P6\n2 2\n255\n0123456789AB");
  EXPECT_THROW(load_pgm(dir.path() / "p6.pgm"), FormatError);

  write_bytes(dir.path() / "short.pgm", std::string("P5\n2 2\n255\n") + std::string("\x00\x01\x02", 3));
  EXPECT_THROW(load_pgm(dir.path() / "short.pgm"), FormatError);

  write_bytes(dir.path() / "deep.pgm", "P5\n1 1\n65535\n\x00\x00");
  EXPECT_THROW(load_pgm(dir.path() / "deep.pgm"), FormatError);

  EXPECT_THROW(save_pgm(Frame(1, 1), dir.path() / "no" / "such" / "dir" / "x.pgm"), IoError);
}

TEST(Pgm, SinglePixelFile) {
  vctest::TempDir dir("pgm");
  const auto p = dir.path() / "one.pgm";
  save_pgm(Frame(1, 1, {0}), p);
  std::ifstream in(p, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_FALSE(bytes.empty());
  EXPECT_EQ(bytes.back(), '\0');
  EXPECT_EQ(bytes.substr(0, 2), "P5");
  EXPECT_EQ(load_pgm(p), Frame(1, 1, {0}));
}

TEST(Pgm, RoundTripProperty) {
  vctest::Gen gen(11);
  vctest::TempDir dir("pgm");
  for (int i = 0; i < 20; ++i) {
    const Frame f = gen.frame(gen.integer(1, 40), gen.integer(1, 40));
    const auto p = dir.path() / ("f" + std::to_string(i) + ".pgm");
    save_pgm(f, p);
    EXPECT_EQ(load_pgm(p), f);
  }
}

TEST(FramePath, ZeroPadded) {
  EXPECT_EQ(frame_path("d", 7).filename().string(), "frame_000007.pgm");
  EXPECT_EQ(frame_path("d", 123456).filename().string(), "frame_123456.pgm");
}

TEST(Integral, SmallCases) {
  const IntegralImage ones(Frame(3, 3, 1));
  EXPECT_EQ(ones.at(3, 3), 9u);
  const IntegralImage single(Frame(1, 1, {200}));
  EXPECT_EQ(single.at(1, 1), 200u);
  EXPECT_EQ(single.at(0, 1), 0u);
  EXPECT_EQ(single.at(1, 0), 0u);
}

TEST(Integral, EverySubRectOfFourByFour) {
  vctest::Gen gen(1);
  const Frame f = gen.frame(4, 4);
  const IntegralImage ii(f);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int h = 1; y + h <= 4; ++h)
        for (int w = 1; x + w <= 4; ++w) EXPECT_EQ(ii.sum(x, y, w, h), naive_sum(f, {x, y, w, h}));
}

TEST(Integral, RandomRectsProperty) {
  vctest::Gen gen(2);
  for (int frame = 0; frame < 10; ++frame) {
    const Frame f = gen.frame(32, 32);
    const IntegralImage ii(f);
    for (int i = 0; i <= ii.width(); ++i) EXPECT_EQ(ii.at(i, 0), 0u);
    for (int j = 0; j <= ii.height(); ++j) EXPECT_EQ(ii.at(0, j), 0u);
    for (int j = 0; j <= 32; ++j)
      for (int i = 0; i < 32; ++i) {
        EXPECT_LE(ii.at(i, j), ii.at(i + 1, j));
        EXPECT_LE(ii.at(j, i), ii.at(j, i + 1));
      }
    for (int k = 0; k < 100; ++k) {
      const Rect r = gen.rect_in(32, 32);
      ASSERT_EQ(ii.sum(r), naive_sum(f, r));
    }
  }
}

TEST(Integral, LargestFrameIsExact) {
  const IntegralImage ii(Frame(4096, 4096, 255));
  EXPECT_EQ(ii.at(4096, 4096), 4096ull * 4096ull * 255ull);
  EXPECT_THROW(IntegralImage(Frame(4097, 1)), DomainError);
}

TEST(BlockMean, Examples) {
  const IntegralImage c(Frame(5, 5, 7));
  EXPECT_DOUBLE_EQ(block_mean(c, {1, 1, 3, 3}), 7.0);

  vctest::Gen gen(3);
  const Frame f = gen.frame(5, 5);
  const IntegralImage ii(f);
  EXPECT_DOUBLE_EQ(block_mean(ii, {2, 3, 1, 1}), f.at(2, 3));
  double s = 0;
  for (int y = 1; y < 3; ++y)
    for (int x = 1; x < 4; ++x) s += f.at(x, y);
  EXPECT_DOUBLE_EQ(block_mean(ii, {1, 1, 3, 2}), s / 6.0);

  EXPECT_THROW(block_mean(ii, {3, 3, 3, 3}), DomainError);
  EXPECT_THROW(block_mean(ii, {-1, 0, 1, 1}), DomainError);
}

TEST(Downscale, FullHdToDetectionResolution) {
  const Frame f = downscale(Frame(1920, 1080, 90), 8);
  EXPECT_EQ(f.width(), 240);
  EXPECT_EQ(f.height(), 135);
  EXPECT_EQ(f, Frame(240, 135, 90));
}

TEST(Downscale, BlockMeansByHand) {
  // 2x2 blocks: {0,1,4,5} -> 2.5 -> 3; {2,3,6,7} -> 4.5 -> 5; {8,9,12,13} -> 10.5 -> 11; {10,11,14,15} -> 12.5 -> 13.
  std::vector<std::uint8_t> px(16);
  for (int i = 0; i < 16; ++i) px[i] = static_cast<std::uint8_t>(i);
  EXPECT_EQ(downscale(Frame(4, 4, px), 2), Frame(2, 2, {3, 5, 11, 13}));
}

TEST(Downscale, Errors) {
  EXPECT_THROW(downscale(Frame(5, 4), 2), DomainError);
  EXPECT_THROW(downscale(Frame(4, 4), 0), DomainError);
}

TEST(Downscale, CompositionProperty) {
  vctest::Gen gen(4);
  for (int i = 0; i < 20; ++i) {
    const Frame f = gen.frame(4 * gen.integer(1, 12), 4 * gen.integer(1, 12));
    const Frame a = downscale(downscale(f, 2), 2);
    const Frame b = downscale(f, 4);
    ASSERT_EQ(a.width(), b.width());
    for (std::size_t k = 0; k < a.pixels().size(); ++k) EXPECT_LE(std::abs(a.pixels()[k] - b.pixels()[k]), 1);
  }
}

TEST(CropResample, IntegerWindowCopiesPixels) {
  vctest::Gen gen(5);
  const Frame f = gen.frame(20, 20);
  for (auto mode : {Interpolation::kBilinear, Interpolation::kNearest}) {
    const Frame c = crop_resample(f, 3, 4, 6, 5, 6, 5, mode);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) EXPECT_EQ(c.at(x, y), f.at(3 + x, 4 + y));
  }
  EXPECT_THROW(crop_resample(f, 16, 0, 6, 5, 6, 5), DomainError);
}

TEST(CropResample, NearestUpscaleRepeatsPixels) {
  const Frame f(2, 1, {10, 200});
  EXPECT_EQ(crop_resample(f, 0, 0, 2, 1, 4, 1, Interpolation::kNearest), Frame(4, 1, {10, 10, 200, 200}));
}

TEST(Rounding, HalfAwayFromZero) {
  EXPECT_EQ(round_half_away(2.5), 3);
  EXPECT_EQ(round_half_away(-2.5), -3);
  EXPECT_EQ(round_half_away(2.4999), 2);
}

TEST(RectGeometry, OverlapAndIou) {
  EXPECT_EQ(intersection_area({0, 0, 2, 2}, {2, 0, 2, 2}), 0);
  EXPECT_EQ(intersection_area({0, 0, 4, 4}, {2, 2, 4, 4}), 4);
  EXPECT_DOUBLE_EQ(intersection_over_union({0, 0, 4, 4}, {2, 2, 4, 4}), 4.0 / 28.0);
}
