#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "vehicount/imaging.hpp"

namespace vctest {

// Small seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  bool coin() { return integer(0, 1) == 1; }

  vehicount::Frame frame(int w, int h, int lo = 0, int hi = 255) {
    vehicount::Frame f(w, h);
    for (auto& p : f.pixels()) p = static_cast<std::uint8_t>(integer(lo, hi));
    return f;
  }

  // Random rectangle fully inside a w x h image with sides at least min_side.
  vehicount::Rect rect_in(int w, int h, int min_side = 1) {
    const int rw = integer(min_side, w);
    const int rh = integer(min_side, h);
    return {integer(0, w - rw), integer(0, h - rh), rw, rh};
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("vehicount_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace vctest
