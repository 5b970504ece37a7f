#include "vehicount/features.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "vehicount/error.hpp"

namespace vehicount {

RankTable::RankTable() { bins_.fill(kRankedCodes); }

RankTable::RankTable(const std::array<std::uint8_t, 256>& bins) : bins_(bins) {
  for (const auto b : bins_)
    if (b >= kRankBins) throw DomainError("rank table bin out of range");
}

void RankTable::write(std::ostream& os) const {
  for (int code = 0; code < 256; ++code) os << code << ' ' << static_cast<int>(bins_[code]) << '\n';
}

RankTable RankTable::read(std::istream& is) {
  std::array<std::uint8_t, 256> bins{};
  for (int expected = 0; expected < 256; ++expected) {
    int code = -1;
    int bin = -1;
    if (!(is >> code >> bin)) throw FormatError("rank table: truncated");
    if (code != expected || bin < 0 || bin >= kRankBins) throw FormatError("rank table: bad line for code " + std::to_string(expected));
    bins[code] = static_cast<std::uint8_t>(bin);
  }
  return RankTable(bins);
}

void RankTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write(out);
}

RankTable RankTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read(in);
}

LbpCode lbp_code(const Frame& frame, int x, int y) {
  if (x < 1 || y < 1 || x > frame.width() - 2 || y > frame.height() - 2)
    throw DomainError("lbp_code: site on the image border");
  const std::uint8_t c = frame.at(x, y);
  LbpCode code = 0;
  code |= static_cast<LbpCode>((frame.at(x - 1, y - 1) >= c) << 7);
  code |= static_cast<LbpCode>((frame.at(x, y - 1) >= c) << 6);
  code |= static_cast<LbpCode>((frame.at(x + 1, y - 1) >= c) << 5);
  code |= static_cast<LbpCode>((frame.at(x + 1, y) >= c) << 4);
  code |= static_cast<LbpCode>((frame.at(x + 1, y + 1) >= c) << 3);
  code |= static_cast<LbpCode>((frame.at(x, y + 1) >= c) << 2);
  code |= static_cast<LbpCode>((frame.at(x - 1, y + 1) >= c) << 1);
  code |= static_cast<LbpCode>(frame.at(x - 1, y) >= c);
  return code;
}

LbpCode mb_lbp_code(const IntegralImage& ii, int x, int y, BlockGeometry g) {
  if (g.cell_w < 1 || g.cell_h < 1) throw DomainError("mb_lbp_code: empty cell geometry");
  if (!ii.contains(Rect{x, y, g.footprint_w(), g.footprint_h()}))
    throw DomainError("mb_lbp_code: footprint out of bounds");
  return mb_lbp_code_unchecked(ii, x, y, g.cell_w, g.cell_h);
}

int circular_transitions(LbpCode code) {
  const auto rotated = static_cast<std::uint8_t>((code << 1) | (code >> 7));
  return std::popcount(static_cast<unsigned>(code ^ rotated));
}

bool is_uniform(LbpCode code) { return circular_transitions(code) <= 2; }

namespace {

std::array<std::uint8_t, 256> make_uniform_lut() {
  std::array<std::uint8_t, 256> lut{};
  int next = 0;
  for (int code = 0; code < 256; ++code)
    lut[code] = is_uniform(static_cast<LbpCode>(code)) ? static_cast<std::uint8_t>(next++) : 58;
  return lut;
}

}  // namespace

int uniform_bin(LbpCode code) {
  static const auto lut = make_uniform_lut();
  return lut[code];
}

Histogram lbp_histogram(const Frame& frame, const Rect& region) {
  if (!frame.contains(region)) throw DomainError("lbp_histogram: region out of bounds");
  if (region.w < 3 || region.h < 3) throw DomainError("lbp_histogram: region has no interior site");
  Histogram hist(kUniformBins, 0);
  for (int y = region.y + 1; y < region.bottom() - 1; ++y)
    for (int x = region.x + 1; x < region.right() - 1; ++x) ++hist[uniform_bin(lbp_code(frame, x, y))];
  return hist;
}

RankTable build_rank_table(const CodeCounts& counts) {
  std::array<int, 256> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return counts[a] > counts[b]; });
  if (counts[order[0]] == 0) throw DomainError("build_rank_table: no codes observed");

  std::array<std::uint8_t, 256> bins{};
  bins.fill(kRankedCodes);
  // Only observed codes earn a dedicated bin.
  for (int rank = 0; rank < kRankedCodes && counts[order[rank]] > 0; ++rank)
    bins[order[rank]] = static_cast<std::uint8_t>(rank);
  return RankTable(bins);
}

long long mb_lbp_site_count(const Rect& region, BlockGeometry g) {
  const long long nx = region.w - g.footprint_w() + 1;
  const long long ny = region.h - g.footprint_h() + 1;
  return (nx > 0 && ny > 0) ? nx * ny : 0;
}

namespace {

void check_region(const IntegralImage& ii, const Rect& region, BlockGeometry g, const char* who) {
  if (g.cell_w < 1 || g.cell_h < 1) throw DomainError(std::string(who) + ": empty cell geometry");
  if (!ii.contains(region)) throw DomainError(std::string(who) + ": region out of bounds");
  if (mb_lbp_site_count(region, g) == 0) throw DomainError(std::string(who) + ": region too small for footprint");
}

}  // namespace

void accumulate_mb_lbp_codes(const IntegralImage& ii, const Rect& region, BlockGeometry g, CodeCounts& counts) {
  check_region(ii, region, g, "accumulate_mb_lbp_codes");
  const int last_x = region.right() - g.footprint_w();
  const int last_y = region.bottom() - g.footprint_h();
  for (int y = region.y; y <= last_y; ++y)
    for (int x = region.x; x <= last_x; ++x) ++counts[mb_lbp_code_unchecked(ii, x, y, g.cell_w, g.cell_h)];
}

Histogram mb_lbp_histogram(const IntegralImage& ii, const Rect& region, BlockGeometry g, const RankTable& rt) {
  check_region(ii, region, g, "mb_lbp_histogram");
  Histogram hist(kRankBins, 0);
  const int last_x = region.right() - g.footprint_w();
  const int last_y = region.bottom() - g.footprint_h();
  for (int y = region.y; y <= last_y; ++y)
    for (int x = region.x; x <= last_x; ++x) ++hist[rt.bin(mb_lbp_code_unchecked(ii, x, y, g.cell_w, g.cell_h))];
  return hist;
}

}  // namespace vehicount
