#pragma once

#include <random>
#include <vector>

#include "billiards/billiard_core.hpp"
#include "billiards/geometry.hpp"

namespace testing_support {

using billiards::BoundaryCurve;
using billiards::PhasePoint;

inline std::vector<PhasePoint> random_points(const BoundaryCurve& c, int n, double rmax, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> us(0.0, c.perimeter), ur(-rmax, rmax);
  std::vector<PhasePoint> out(n);
  for (auto& p : out) {
    const double s = us(rng);
    p = {s, ur(rng)};
  }
  return out;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing_support
