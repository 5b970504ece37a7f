#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "vehicount/imaging.hpp"

namespace vehicount {

/// 8-bit local binary pattern. Bit 7 is the top-left neighbour, then clockwise:
/// TL, T, TR, R, BR, B, BL, L (bit 0). A bit is set when neighbour >= centre.
using LbpCode = std::uint8_t;

/// Size of one of the nine cells of an MB-LBP operator.
struct BlockGeometry {
  int cell_w = 1;
  int cell_h = 1;

  int footprint_w() const { return 3 * cell_w; }
  int footprint_h() const { return 3 * cell_h; }

  friend bool operator==(const BlockGeometry&, const BlockGeometry&) = default;
};

inline constexpr int kUniformBins = 59;
inline constexpr int kRankBins = 64;
inline constexpr int kRankedCodes = kRankBins - 1;

/// Occurrence counts of each of the 256 codes.
using CodeCounts = std::array<std::uint64_t, 256>;

/// Maps an MB-LBP code to one of 64 histogram bins: the 63 most frequent codes own
/// bins 0..62 (by decreasing frequency, ties to the lower code), the rest share bin 63.
class RankTable {
 public:
  RankTable();  // every code -> bin 63
  explicit RankTable(const std::array<std::uint8_t, 256>& bins);

  std::uint8_t bin(LbpCode code) const { return bins_[code]; }
  const std::array<std::uint8_t, 256>& bins() const { return bins_; }

  /// 256 lines of `code bin`, ascending code.
  void write(std::ostream& os) const;
  static RankTable read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static RankTable load(const std::filesystem::path& path);

  friend bool operator==(const RankTable&, const RankTable&) = default;

 private:
  std::array<std::uint8_t, 256> bins_{};
};

using Histogram = std::vector<std::uint32_t>;

/// Plain 3x3 LBP at (x, y); requires a one-pixel margin.
LbpCode lbp_code(const Frame& frame, int x, int y);

/// MB-LBP with the 3x3 cell grid anchored at top-left (x, y).
LbpCode mb_lbp_code(const IntegralImage& ii, int x, int y, BlockGeometry g);

/// Unchecked MB-LBP evaluation; caller guarantees the footprint is inside the image.
/// All nine cells share one area, so comparing sums is comparing means exactly.
inline LbpCode mb_lbp_code_unchecked(const IntegralImage& ii, int x, int y, int cw, int ch) {
  const std::uint32_t c = ii.sum(x + cw, y + ch, cw, ch);
  const int x1 = x + cw;
  const int x2 = x + 2 * cw;
  const int y1 = y + ch;
  const int y2 = y + 2 * ch;
  LbpCode code = 0;
  code |= static_cast<LbpCode>((ii.sum(x, y, cw, ch) >= c) << 7);
  code |= static_cast<LbpCode>((ii.sum(x1, y, cw, ch) >= c) << 6);
  code |= static_cast<LbpCode>((ii.sum(x2, y, cw, ch) >= c) << 5);
  code |= static_cast<LbpCode>((ii.sum(x2, y1, cw, ch) >= c) << 4);
  code |= static_cast<LbpCode>((ii.sum(x2, y2, cw, ch) >= c) << 3);
  code |= static_cast<LbpCode>((ii.sum(x1, y2, cw, ch) >= c) << 2);
  code |= static_cast<LbpCode>((ii.sum(x, y2, cw, ch) >= c) << 1);
  code |= static_cast<LbpCode>(ii.sum(x, y1, cw, ch) >= c);
  return code;
}

/// Number of 0/1 transitions around the circular 8-bit string.
int circular_transitions(LbpCode code);
bool is_uniform(LbpCode code);

/// Bin of `code` in the 59-bin uniform histogram (ascending uniform code order, 58 = non-uniform).
int uniform_bin(LbpCode code);

/// 59-bin uniform-pattern histogram over the interior sites of region.
Histogram lbp_histogram(const Frame& frame, const Rect& region);

RankTable build_rank_table(const CodeCounts& counts);

/// Adds every stride-1 MB-LBP code of geometry g inside region to counts.
void accumulate_mb_lbp_codes(const IntegralImage& ii, const Rect& region, BlockGeometry g, CodeCounts& counts);

/// Number of footprint positions of g inside region (0 when it does not fit).
long long mb_lbp_site_count(const Rect& region, BlockGeometry g);

/// 64-bin rank histogram of stride-1 MB-LBP codes inside region.
Histogram mb_lbp_histogram(const IntegralImage& ii, const Rect& region, BlockGeometry g, const RankTable& rt);

}  // namespace vehicount
