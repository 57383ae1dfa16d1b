#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "billiards/orbit_analysis.hpp"
#include "support.hpp"

using namespace billiards;
using testing_support::random_points;
using testing_support::rel_err;

namespace {

const BoundaryCurve& ellipse21() {
  static const BoundaryCurve c = make_ellipse({2.0, 1.0});
  return c;
}

// eigenvalues of a 2x2 matrix by the quadratic formula, real case
std::pair<double, double> real_roots(const Mat2& m) {
  const double tr = m.trace(), det = m.det();
  const double sq = std::sqrt(tr * tr - 4 * det);
  double a = 0.5 * (tr - sq), b = 0.5 * (tr + sq);
  if (std::abs(a) > std::abs(b)) std::swap(a, b);
  return {a, b};
}

double angle_between_lines(Vec2 a, Vec2 b) {
  return std::atan2(std::abs(cross(a, b)), std::abs(dot(a, b)));
}

}  // namespace

TEST(FindTwoPeriodic, EllipseHasExactlyMajorAndMinorAxes) {
  const auto& c = ellipse21();
  const auto scan = find_two_periodic(c);
  EXPECT_FALSE(scan.degenerate_family);
  ASSERT_EQ(scan.orbits.size(), 2u);
  std::vector<double> taus{scan.orbits[0].tau, scan.orbits[1].tau};
  std::sort(taus.begin(), taus.end());
  EXPECT_NEAR(taus[0], 2.0, 1e-9);
  EXPECT_NEAR(taus[1], 4.0, 1e-9);
  for (const auto& o : scan.orbits) {
    EXPECT_LT(o.perpendicularity, 1e-9);
    EXPECT_EQ(o.k12, (o.tau * o.K1 + 1.0) * (o.tau * o.K2 + 1.0));
  }
}

TEST(FindTwoPeriodic, CircleIsDegenerateFamily) {
  const auto scan = find_two_periodic(make_circle(1.0));
  EXPECT_TRUE(scan.degenerate_family);
  ASSERT_FALSE(scan.orbits.empty());
  EXPECT_EQ(scan.orbits[0].length_critical_type, CriticalType::Degenerate);
}

TEST(FindTwoPeriodic, PerturbedEllipseMatchesExhaustiveScan) {
  const auto c = make_fourier_perturbed({1.5, 1.0}, {{3, 0.01, 0.0}});
  const auto scan = find_two_periodic(c);
  EXPECT_FALSE(scan.degenerate_family);
  ASSERT_GE(scan.orbits.size(), 2u);
  for (const auto& o : scan.orbits) {
    EXPECT_GT(std::abs(length_hessian(o).det), 1e-6);
    EXPECT_LT(o.perpendicularity, 1e-9);
  }
  // a perpendicular shot from s lands perpendicularly exactly at the bounces of 2-periodic orbits
  const int N = 8192;
  int sign_changes = 0;
  double prev = step_conservative_ex(c, {0.0, 0.0}).r1;
  for (int i = 1; i <= N; ++i) {
    const double cur = step_conservative_ex(c, {c.perimeter * (i + 0.37) / N, 0.0}).r1;
    if ((prev < 0) != (cur < 0)) ++sign_changes;
    prev = cur;
  }
  EXPECT_EQ(sign_changes, int(2 * scan.orbits.size()));
}

TEST(Classify, EllipseMinorAxisSink) {
  const auto eo = ellipse_orbits(ellipse21());
  EXPECT_NEAR(eo.E.tau * eo.E.K1, -0.5, 1e-9);
  EXPECT_NEAR(eo.E.k12, 0.25, 1e-9);
  const auto oc = classify_two_periodic(eo.E, 0.5);
  EXPECT_EQ(oc.orbit_type, OrbitType::Sink);
  EXPECT_EQ(oc.case_label, 'c');
  ASSERT_TRUE(oc.lambda_minus);
  EXPECT_NEAR(*oc.lambda_minus, (1 - std::sqrt(0.75)) / (1 + std::sqrt(0.75)), 1e-10);
  EXPECT_TRUE(oc.eigenvalues.complex);
  EXPECT_NEAR(oc.eigenvalues.modulus, 0.5, 1e-9);
  const auto num = eigen_of(two_step_jacobian(ellipse21(), DissipationProfile::constant(0.5), eo.E));
  EXPECT_TRUE(num.complex);
  EXPECT_NEAR(num.modulus, 0.5, 1e-8);
  EXPECT_NEAR(num.argument, oc.eigenvalues.argument, 1e-7);
}

TEST(Classify, EllipseMajorAxisSaddle) {
  const auto& c = ellipse21();
  const auto eo = ellipse_orbits(c);
  EXPECT_NEAR(eo.H.tau * eo.H.K1, -8.0, 1e-9);
  EXPECT_NEAR(eo.H.k12, 49.0, 1e-8);
  const auto oc = classify_two_periodic(eo.H, 0.5);
  EXPECT_EQ(oc.orbit_type, OrbitType::Saddle);
  EXPECT_EQ(oc.case_label, 'a');
  EXPECT_NEAR(oc.trace, 109.25, 1e-7);
  EXPECT_NEAR(oc.eigenvalues.mu1 * oc.eigenvalues.mu2, 0.25, 1e-10);
  for (int b = 0; b < 2; ++b) {
    const auto [m1, m2] = real_roots(two_step_jacobian(c, DissipationProfile::constant(0.5), eo.H, b));
    EXPECT_LT(rel_err(m2, oc.eigenvalues.mu2), 1e-6);
    EXPECT_LT(rel_err(m1, oc.eigenvalues.mu1), 1e-6);
  }
}

TEST(Classify, CaseTableSynthetic) {
  const double lam = 0.3;
  const auto b = classify_k12(1.0, lam);
  EXPECT_EQ(b.orbit_type, OrbitType::Parabolic);
  EXPECT_DOUBLE_EQ(b.eigenvalues.mu1, lam * lam);
  EXPECT_DOUBLE_EQ(b.eigenvalues.mu2, 1.0);

  const auto d = classify_k12(0.0, lam);
  EXPECT_EQ(d.case_label, 'd');
  EXPECT_TRUE(d.scalar_matrix);
  EXPECT_DOUBLE_EQ(d.eigenvalues.mu1, -lam);
  EXPECT_DOUBLE_EQ(d.eigenvalues.mu2, -lam);

  const double k = -0.5, lb = (1 - std::sqrt(0.5)) / (1 + std::sqrt(0.5));
  const auto e_sink = classify_k12(k, 0.5 * lb);
  EXPECT_EQ(e_sink.case_label, 'e');
  EXPECT_EQ(e_sink.orbit_type, OrbitType::Sink);
  ASSERT_TRUE(e_sink.lambda_bar);
  EXPECT_NEAR(*e_sink.lambda_bar, lb, 1e-12);
  EXPECT_GT(e_sink.eigenvalues.mu2, -1.0);
  EXPECT_LT(e_sink.eigenvalues.mu2, -0.5 * lb);
  const auto e_par = classify_k12(k, lb);
  EXPECT_EQ(e_par.orbit_type, OrbitType::Parabolic);
  EXPECT_DOUBLE_EQ(e_par.eigenvalues.mu2, -1.0);
  const auto e_sad = classify_k12(k, 0.5 * (lb + 1));
  EXPECT_EQ(e_sad.orbit_type, OrbitType::Saddle);
  EXPECT_LT(e_sad.eigenvalues.mu2, -1.0);

  const auto f = classify_k12(-2.0, lam);
  EXPECT_EQ(f.case_label, 'f');
  EXPECT_EQ(f.orbit_type, OrbitType::Saddle);
  EXPECT_LT(f.eigenvalues.mu2, -1.0);
  EXPECT_GT(f.eigenvalues.mu1, -lam * lam);
  EXPECT_LT(f.eigenvalues.mu1, 0.0);

  EXPECT_THROW(classify_k12(0.5, 1.0), invalid_input);
}

TEST(Classify, SinkSubcasesAroundLambdaMinus) {
  const double k = 0.25, lm = lambda_minus_of(k);
  const auto below = classify_k12(k, 0.5 * lm);
  EXPECT_FALSE(below.eigenvalues.complex);
  EXPECT_GT(below.eigenvalues.mu1, 0.25 * lm * lm);
  EXPECT_LT(below.eigenvalues.mu2, 1.0);
  const auto at = classify_k12(k, lm);
  EXPECT_NEAR(at.eigenvalues.mu1, lm, 1e-6);
  EXPECT_NEAR(at.eigenvalues.mu2, lm, 1e-6);
  const auto above = classify_k12(k, 0.5);
  EXPECT_TRUE(above.eigenvalues.complex);
  EXPECT_NEAR(above.eigenvalues.modulus, 0.5, 1e-12);
}

TEST(Classify, RealToComplexSwitchLocatedByBisection) {
  const double k = 0.25, target = lambda_minus_of(k);
  double lo = 1e-3, hi = 0.5;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (classify_k12(k, mid).eigenvalues.complex) hi = mid;
    else lo = mid;
  }
  EXPECT_NEAR(0.5 * (lo + hi), target, 1e-8);
}

TEST(Classify, ClosedFormMatchesNumericalAtSeveralLambdas) {
  for (const auto& c : {make_ellipse({2.0, 1.0}), make_ellipse({1.3, 1.0}),
                        make_fourier_perturbed({1.5, 1.0}, {{3, 0.01, 0.0}})}) {
    for (const auto& o : find_two_periodic(c).orbits)
      for (double lam : {0.1, 0.5, 0.9}) {
        const auto oc = classify_two_periodic(o, lam);
        const auto num = eigen_of(two_step_jacobian(c, DissipationProfile::constant(lam), o));
        ASSERT_EQ(num.complex, oc.eigenvalues.complex) << c.kind << " k=" << o.k12 << " lambda=" << lam;
        if (num.complex) {
          EXPECT_LT(rel_err(num.modulus, oc.eigenvalues.modulus), 1e-6);
        } else {
          EXPECT_LT(rel_err(num.mu1, oc.eigenvalues.mu1), 1e-6);
          EXPECT_LT(rel_err(num.mu2, oc.eigenvalues.mu2), 1e-6);
        }
        const Mat2 cf = two_step_closed_form(o, lam, lam), m = two_step_jacobian(c, DissipationProfile::constant(lam), o);
        const double scale = std::max({std::abs(cf.a), std::abs(cf.b), std::abs(cf.c), std::abs(cf.d)});
        for (double e : {cf.a - m.a, cf.b - m.b, cf.c - m.c, cf.d - m.d}) EXPECT_LT(std::abs(e) / scale, 1e-6);
      }
  }
}

TEST(Classify, InvariantsOfEigenvalues) {
  for (double k : {-3.0, -0.7, -0.2, 0.1, 0.6, 1.5, 49.0})
    for (double lam : {0.05, 0.37, 0.8}) {
      const auto oc = classify_k12(k, lam);
      if (oc.eigenvalues.complex) {
        EXPECT_NEAR(oc.eigenvalues.modulus * oc.eigenvalues.modulus, lam * lam, 1e-10);
        EXPECT_NEAR(2 * oc.eigenvalues.modulus * std::cos(oc.eigenvalues.argument), oc.trace, 1e-10);
      } else {
        EXPECT_NEAR(oc.eigenvalues.mu1 * oc.eigenvalues.mu2, lam * lam, 1e-10 * std::max(1.0, std::abs(k)));
        EXPECT_NEAR(oc.eigenvalues.mu1 + oc.eigenvalues.mu2, (1 + lam) * (1 + lam) * k - 2 * lam, 1e-10 * std::max(1.0, std::abs(k)));
      }
    }
}

TEST(ClassifyNonconstant, ReducesToConstant) {
  const auto eo = ellipse_orbits(ellipse21());
  for (const auto* o : {&eo.H, &eo.E}) {
    const auto a = classify_two_periodic(*o, 0.4), b = classify_nonconstant(*o, 0.4, 0.4);
    EXPECT_EQ(a.orbit_type, b.orbit_type);
    EXPECT_NEAR(a.trace, b.trace, 1e-12);
    EXPECT_NEAR(a.det, b.det, 1e-15);
  }
}

TEST(ClassifyNonconstant, SaddleWithDifferentBounceValues) {
  const auto& c = ellipse21();
  const auto eo = ellipse_orbits(c);
  const double P = c.perimeter;
  // 0.6 at the major vertex s = 0, 0.8 at the opposite vertex s = P/2
  const auto prof =
      DissipationProfile::variable([P](double s, double) { return 0.7 - 0.1 * std::cos(2 * std::numbers::pi * s / P); }, P);
  const double l1 = prof(eo.H.s1, 0), l2 = prof(eo.H.s2, 0);
  EXPECT_NEAR(l1, 0.6, 1e-12);
  EXPECT_NEAR(l2, 0.8, 1e-12);
  const auto oc = classify_nonconstant(eo.H, l1, l2);
  EXPECT_EQ(oc.orbit_type, OrbitType::Saddle);
  EXPECT_NEAR(oc.trace, 139.72, 1e-6);
  EXPECT_NEAR(oc.det, 0.48, 1e-12);
  EXPECT_NEAR(oc.eigenvalues.mu2, 139.7166, 1e-4);
  const auto num = eigen_of(two_step_jacobian(c, prof, eo.H, 0));
  EXPECT_LT(rel_err(num.mu2, oc.eigenvalues.mu2), 1e-6);
  EXPECT_NEAR(num.mu1 * num.mu2, 0.48, 1e-8);
}

TEST(ClassifyNonconstant, ParabolicHasUnitEigenvalue) {
  for (double l1 : {0.2, 0.7})
    for (double l2 : {0.3, 0.9}) EXPECT_DOUBLE_EQ(characteristic_at_one(1.0, l1, l2), 0.0);
  TwoPeriodicOrbit o;
  o.k12 = 1.0;
  EXPECT_EQ(classify_nonconstant(o, 0.3, 0.6).orbit_type, OrbitType::Parabolic);
  o.k12 = -0.5;
  EXPECT_EQ(classify_nonconstant(o, 0.3, 0.6).orbit_type, OrbitType::Undetermined);
}

TEST(LengthHessian, EllipseAxes) {
  const auto eo = ellipse_orbits(ellipse21());
  const auto h = length_hessian(eo.H);
  EXPECT_NEAR(h.A.a, -1.75, 1e-9);
  EXPECT_NEAR(h.A.b, 0.25, 1e-12);
  EXPECT_NEAR(h.A.d, -1.75, 1e-9);
  EXPECT_NEAR(h.det, 3.0, 1e-8);
  EXPECT_EQ(h.verdict, Definiteness::NegativeDefinite);
  const auto e = length_hessian(eo.E);
  EXPECT_NEAR(e.det, -0.1875, 1e-9);
  EXPECT_EQ(e.verdict, Definiteness::Indefinite);
}

TEST(LengthHessian, MatchesFiniteDifferenceOfChordLength) {
  const auto& c = ellipse21();
  const auto eo = ellipse_orbits(c);
  auto ell = [&](double a, double b) { return norm(c.position(a) - c.position(b)); };
  const double h = 1e-4;
  for (const auto* o : {&eo.H, &eo.E}) {
    const double a = o->s1, b = o->s2;
    const double l11 = (ell(a + h, b) - 2 * ell(a, b) + ell(a - h, b)) / (h * h);
    const double l22 = (ell(a, b + h) - 2 * ell(a, b) + ell(a, b - h)) / (h * h);
    const double l12 = (ell(a + h, b + h) - ell(a + h, b - h) - ell(a - h, b + h) + ell(a - h, b - h)) / (4 * h * h);
    const auto H = length_hessian(*o).A;
    EXPECT_NEAR(H.a, l11, 1e-5);
    EXPECT_NEAR(H.d, l22, 1e-5);
    // the mixed partial of the chord length is -1/tau at a perpendicular chord; A stores +1/tau
    EXPECT_NEAR(std::abs(H.b), std::abs(l12), 1e-5);
  }
}

TEST(LengthHessian, DeterminantIdentityAtEveryOrbit) {
  for (const auto& c : {make_ellipse({2.0, 1.0}), make_fourier_perturbed({1.5, 1.0}, {{3, 0.01, 0.0}})})
    for (const auto& o : find_two_periodic(c).orbits)
      EXPECT_NEAR(length_hessian(o).det, (o.k12 - 1) / (o.tau * o.tau), 1e-8);
}

TEST(SmallDissipation, EigenvaluesAndEigenspacesAtTinyLambda) {
  const auto& c = ellipse21();
  const auto eo = ellipse_orbits(c);
  const auto d = DissipationProfile::constant(1e-4);
  for (const auto* o : {&eo.H, &eo.E}) {
    const Mat2 m = two_step_jacobian(c, d, *o, 0);
    const auto [m1, m2] = real_roots(m);
    EXPECT_NEAR(m1, 0.0, 1e-2);
    EXPECT_LT(rel_err(m2, o->k12), 1e-2);
    const Vec2 big{m.b, m2 - m.a}, small{m.b, m1 - m.a};
    EXPECT_LT(angle_between_lines(big, {1, 0}), 1e-2);
    // the contracted direction tends to the kernel (tau, tau K1 + 1) of the first step, not to the vertical
    EXPECT_LT(angle_between_lines(small, {o->tau, o->tau * o->K1 + 1}), 1e-2);
  }
}

TEST(Lyapunov, MonotoneAlongRandomOrbits) {
  const auto& c = ellipse21();
  const auto d = DissipationProfile::constant(0.5);
  for (const auto& p : random_points(c, 20, 0.95, 21)) {
    const auto rep = lyapunov_audit(c, d, p, 2000);
    EXPECT_LT(rep.max_positive_increment, 1e-12);
    EXPECT_TRUE(rep.pair_sum_strictly_decreasing);
    EXPECT_GE(rep.steps_to_period_two, 0);
  }
}

TEST(Lyapunov, ConstantOnMinorAxisOrbit) {
  const auto& c = ellipse21();
  const auto rep = lyapunov_audit(c, DissipationProfile::constant(0.5), {0.25 * c.perimeter, 0.0}, 10);
  for (double v : rep.L) EXPECT_NEAR(v, rep.L[0], 1e-14);
  EXPECT_THROW(lyapunov_audit(make_flattened_oval(4), DissipationProfile::constant(0.5), {0, 0}, 10), invalid_input);
}

TEST(Convergence, FixedOrbitsAreImmediate) {
  const auto& c = ellipse21();
  const auto eo = ellipse_orbits(c);
  const auto d = DissipationProfile::constant(0.5);
  const auto e = converge_to_two_periodic(c, d, eo.E.bounce(0), 10);
  EXPECT_EQ(e.label, LimitLabel::E);
  EXPECT_EQ(e.steps, 0);
  const auto h = converge_to_two_periodic(c, d, eo.H.bounce(1), 10);
  EXPECT_EQ(h.label, LimitLabel::H);
  EXPECT_EQ(h.steps, 0);
  EXPECT_THROW(converge_to_two_periodic(c, d, {0, 0}, 0), invalid_input);
}

TEST(Convergence, RandomStartsGoToMinorAxis) {
  const auto& c = ellipse21();
  const auto d = DissipationProfile::constant(0.5);
  int e_count = 0, total = 0;
  for (const auto& p : random_points(c, 1000, 0.99, 22)) {
    const auto res = converge_to_two_periodic(c, d, p, 10000);
    ASSERT_NE(res.label, LimitLabel::NonConverged);
    e_count += res.label == LimitLabel::E;
    ++total;
  }
  EXPECT_GE(double(e_count) / total, 0.99);
}
