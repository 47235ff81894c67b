#pragma once

// Nested-loop coincidence counters. Slow on purpose: they share nothing with
// the streaming engine except the bin convention.

#include <cstdint>
#include <map>
#include <vector>

#include "rydloss/correlator.hpp"

namespace oracle {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// counts[m][k]: pairs with (t_b - t_a - mT) in [kΔτ, (k+1)Δτ), -K ≤ k < K.
inline std::map<int, std::map<int, std::uint64_t>> pairs(const std::vector<std::int64_t>& a,
                                                         const std::vector<std::int64_t>& b,
                                                         const rydloss::CorrelatorConfig& c) {
  std::map<int, std::map<int, std::uint64_t>> out;
  const int K = c.half_bins();
  for (auto ta : a)
    for (auto tb : b)
      for (int m = -4; m <= 4; ++m) {
        const auto k = floor_div(tb - ta - m * c.block, c.bin);
        if (k >= -K && k < K) ++out[m][static_cast<int>(k)];
      }
  return out;
}

/// counts for one offset pair (m, n): key k1 * 100000 + k2 (shifted to positive).
inline std::map<std::pair<int, int>, std::uint64_t> triples(const std::vector<std::int64_t>& t1,
                                                            const std::vector<std::int64_t>& t2,
                                                            const std::vector<std::int64_t>& t3,
                                                            const rydloss::CorrelatorConfig& c, int m,
                                                            int n) {
  std::map<std::pair<int, int>, std::uint64_t> out;
  const int K = c.half_bins();
  for (auto a : t1)
    for (auto b : t2) {
      const auto k1 = floor_div(b - a - m * c.block, c.bin);
      if (k1 < -K || k1 >= K) continue;
      for (auto d : t3) {
        const auto k2 = floor_div(d - a - n * c.block, c.bin);
        if (k2 >= -K && k2 < K) ++out[{static_cast<int>(k1), static_cast<int>(k2)}];
      }
    }
  return out;
}

}  // namespace oracle
