#pragma once

#include <array>

namespace vctest {

// Reference counting results: (FP, FN, GT) and the reported integer accuracy.
struct ReferenceRow {
  const char* setting;
  long long fp, fn, gt;
  long long accuracy;
};

// Background subtraction (without and with EKF), then the feature cascade.
inline constexpr std::array<ReferenceRow, 18> kReferenceRows{{
    {"bgsub th=10 tfc=15", 4, 2, 133, 95},
    {"bgsub th=10 tfc=30", 2, 6, 133, 94},
    {"bgsub th=8 tfc=15", 5, 6, 133, 92},
    {"bgsub th=8 tfc=20", 5, 8, 133, 90},
    {"bgsub+ekf th=10 tfc=10", 4, 4, 133, 94},
    {"bgsub+ekf th=10 tfc=30", 3, 6, 133, 93},
    {"bgsub+ekf th=8 tfc=10", 4, 6, 133, 92},
    {"bgsub+ekf th=8 tfc=30", 4, 8, 133, 91},
    {"feature s=20 mhr=0.995 mcc=2 tfc=8", 0, 6, 133, 95},
    {"feature s=20 mhr=0.999875 mcc=5 tfc=3", 0, 7, 133, 95},
    {"feature s=20 mhr=0.999875 mcc=5 tfc=15", 0, 7, 133, 95},
    {"feature s=20 mhr=0.995 mcc=2 tfc=3", 3, 5, 133, 94},
    {"feature 480x270 s=20 mhr=0.995 mcc=5 tfc=3", 3, 6, 133, 93},
    {"feature+ekf s=20 mhr=0.995 mcc=2 tfc=3", 0, 9, 133, 93},
    {"feature+ekf s=20 mhr=0.995 mcc=2 tfc=8", 0, 9, 133, 93},
    {"feature+ekf s=20 mhr=0.995 mcc=2 tfc=15", 0, 9, 133, 93},
    {"feature+ekf s=20 mhr=0.999875 mcc=5 tfc=3", 0, 9, 133, 93},
    {"feature+ekf s=20 mhr=0.999875 mcc=5 tfc=8", 0, 9, 133, 93},
}};

}  // namespace vctest
