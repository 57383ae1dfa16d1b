#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "billiards/attractor.hpp"
#include "billiards/billiard_core.hpp"
#include "billiards/geometry.hpp"
#include "billiards/orbit_analysis.hpp"
#include "support.hpp"

using namespace billiards;
using testing_support::random_points;

namespace {

struct Table {
  const char* name;
  BoundaryCurve c;
  std::vector<double> axes;  // s0 of the reflection symmetries, as fractions of P
};

const std::vector<Table>& tables() {
  static const std::vector<Table> t = {
      {"ellipse 2:1", make_ellipse({2.0, 1.0}), {0.0, 0.25}},
      {"ellipse e=0.3", make_ellipse(EllipseSpec::from_eccentricity(0.3)), {0.0, 0.25}},
      {"oval", make_flattened_oval(4), {0.0, 0.25}},
      {"fourier", make_fourier_perturbed({2.0, 1.0}, {{3, 0.02, 0.0}}), {0.0}},
  };
  return t;
}

PhasePoint reflect(const BoundaryCurve& c, double s0, PhasePoint p) { return {c.wrap_s(2 * s0 - p.s), -p.r}; }

double phase_gap(const BoundaryCurve& c, PhasePoint a, PhasePoint b) {
  return std::max(std::abs(periodic_diff(a.s, b.s, c.perimeter)), std::abs(a.r - b.r));
}

// area enclosed by the image of the boundary of [s0, s1] x [r0, r1], with s lifted continuously
double image_area(const BoundaryCurve& c, const DissipationProfile& d, double s0, double s1, double r0, double r1,
                  int per_edge) {
  std::vector<Vec2> poly;
  auto edge = [&](PhasePoint a, PhasePoint b) {
    for (int i = 0; i < per_edge; ++i) {
      const double t = double(i) / per_edge;
      const PhasePoint p{a.s + t * (b.s - a.s), a.r + t * (b.r - a.r)};
      const Step st = step_dissipative_ex(c, d, p);
      poly.push_back({p.s + st.ds, st.p.r});
    }
  };
  edge({s0, r0}, {s1, r0});
  edge({s1, r0}, {s1, r1});
  edge({s1, r1}, {s0, r1});
  edge({s0, r1}, {s0, r0});
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

}  // namespace

TEST(Properties, SymmetryCommutesWithTheMap) {
  for (const auto& t : tables()) {
    for (double lam : {0.3, 0.9}) {
      const auto d = DissipationProfile::constant(lam);
      for (double frac : t.axes) {
        const double s0 = frac * t.c.perimeter;
        double worst = 0.0;
        for (const auto& p : random_points(t.c, 1000, 0.999, 11)) {
          const auto lhs = reflect(t.c, s0, step_dissipative(t.c, d, p));
          const auto rhs = step_dissipative(t.c, d, reflect(t.c, s0, p));
          worst = std::max(worst, phase_gap(t.c, lhs, rhs));
        }
        EXPECT_LT(worst, 1e-9) << t.name << " axis " << frac << " lambda " << lam;
      }
    }
  }
}

TEST(Properties, ImageLiesInContractedAnnulus) {
  for (const auto& t : tables())
    for (double lam : {0.05, 0.5, 0.95}) {
      const auto d = DissipationProfile::constant(lam);
      double top = 0.0;
      for (const auto& p : random_points(t.c, 2000, 1.0 - 1e-12, 12))
        top = std::max(top, std::abs(step_dissipative(t.c, d, p).r));
      EXPECT_LE(top, lam) << t.name;
      // the whole band is reached: grazing shots land near +-lambda
      EXPECT_GT(top, 0.99 * lam) << t.name;
    }
}

TEST(Properties, InverseUndoesTheMap) {
  for (const auto& t : tables())
    for (double lam : {0.1, 0.6, 0.99}) {
      const auto d = DissipationProfile::constant(lam);
      double worst = 0.0;
      for (const auto& p : random_points(t.c, 500, 0.999, 13))
        worst = std::max(worst, phase_gap(t.c, step_inverse(t.c, d, step_dissipative(t.c, d, p)), p));
      EXPECT_LT(worst, 1e-9) << t.name << " " << lam;
    }
}

TEST(Properties, ConstantDissipationScalesArea) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& t : tables())
    for (double lam : {0.2, 0.8}) {
      const auto d = DissipationProfile::constant(lam);
      for (int k = 0; k < 4; ++k) {
        const double s0 = u(rng) * t.c.perimeter, w = 0.05 * t.c.perimeter * (1 + u(rng));
        const double r0 = -0.8 + 1.2 * u(rng), h = 0.05 + 0.1 * u(rng);
        const double a = image_area(t.c, d, s0, s0 + w, r0, r0 + h, 2000);
        EXPECT_NEAR(a / (w * h), lam, 1e-4 * lam) << t.name;
      }
    }
}

TEST(Properties, VariableDissipationAreaWithinBounds) {
  const auto& c = tables()[0].c;
  const double P = c.perimeter;
  const auto d = DissipationProfile::variable([P](double s, double) { return 0.5 + 0.2 * std::sin(2 * std::numbers::pi * s / P); }, P);
  const auto rep = validate_dissipation(d, c);
  for (double s0 : {0.0, 0.3 * P, 0.6 * P}) {
    const double a = image_area(c, d, s0, s0 + 0.1 * P, -0.2, 0.1, 2000);
    const double m = 0.1 * P * 0.3;
    EXPECT_LE(a, rep.max_quantity * m * (1 + 1e-4));
    EXPECT_GE(a, rep.min_quantity * m * (1 - 1e-4));
  }
}

TEST(Properties, TwoPeriodicSpectraMatchClosedForms) {
  for (const auto& t : tables()) {
    const auto scan = find_two_periodic(t.c);
    ASSERT_FALSE(scan.orbits.empty()) << t.name;
    for (const auto& o : scan.orbits)
      for (double lam : {0.2, 0.5, 0.9}) {
        const auto d = DissipationProfile::constant(lam);
        const Mat2 M = two_step_jacobian(t.c, d, o, 0);
        const double scale = std::max(1.0, std::abs(M.trace()));
        EXPECT_NEAR(M.det(), lam * lam, 1e-8 * scale) << t.name;
        EXPECT_NEAR(M.trace(), (1 + lam) * (1 + lam) * o.k12 - 2 * lam, 1e-6 * scale) << t.name;
        const auto e = eigen_of(M);
        const double prod = e.complex ? e.modulus * e.modulus : e.mu1 * e.mu2;
        EXPECT_NEAR(prod, lam * lam, 1e-8 * scale) << t.name;
        // bounce independence of the spectrum
        EXPECT_NEAR(two_step_jacobian(t.c, d, o, 1).trace(), M.trace(), 1e-6 * scale) << t.name;
      }
  }
}

TEST(Properties, JacobianDeterminantAlongOrbits) {
  for (const auto& t : tables()) {
    const double lam = 0.7;
    const auto d = DissipationProfile::constant(lam);
    PhasePoint p{0.1 * t.c.perimeter, 0.3};
    double logdet = 0.0;
    for (int n = 0; n < 50; ++n) {
      logdet += std::log(jacobian(t.c, d, p).det());
      p = step_dissipative(t.c, d, p);
    }
    EXPECT_NEAR(logdet, 50 * std::log(lam), 1e-8) << t.name;
  }
}

TEST(Properties, SymmetricTablesHaveSymmetricAttractors) {
  // the grid inherits the reflection about s = 0 up to one cell
  const auto& c = tables()[0].c;
  GridOptions go;
  go.threads = 4;
  const auto g = birkhoff_trim(iterate_annulus(c, DissipationProfile::constant(0.5), 256, 256, 20, go));
  long unmatched = 0;
  for (int col = 0; col < g.columns; ++col)
    for (int row = 0; row < g.rows; ++row) {
      if (!g.at(col, row)) continue;
      const int mc = g.columns - 1 - col, mr = g.rows - 1 - row;
      bool found = false;
      for (int dc = -1; dc <= 1 && !found; ++dc)
        for (int dr = -1; dr <= 1 && !found; ++dr)
          if (mr + dr >= 0 && mr + dr < g.rows && g.at(g.wrap_col(mc + dc), mr + dr)) found = true;
      unmatched += !found;
    }
  EXPECT_EQ(unmatched, 0);
}

TEST(Properties, OccupiedSetStaysInImageBand) {
  // the outer approximation never leaves the cells meeting |r| <= lambda
  const auto& c = tables()[1].c;
  GridOptions go;
  go.threads = 4;
  for (double lam : {0.1, 0.4, 0.7}) {
    const auto g = iterate_annulus(c, DissipationProfile::constant(lam), 128, 128, 4, go);
    for (int col = 0; col < g.columns; ++col)
      for (int row = 0; row < g.rows; ++row)
        if (g.at(col, row)) {
          const double lo = -1.0 + row * g.cell_dr(), hi = lo + g.cell_dr();
          EXPECT_LT(lo, lam + 1e-12);
          EXPECT_GT(hi, -lam - 1e-12);
        }
  }
}
