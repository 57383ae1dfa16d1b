// Reference values frozen from 30-digit evaluations (tools/oracle_values.py) and
// closed forms stated with the theory; no value here comes from this library.
#include <gtest/gtest.h>

#include <cmath>

#include "billiards/attractor.hpp"
#include "billiards/geometry.hpp"
#include "billiards/orbit_analysis.hpp"

using namespace billiards;

namespace ref {
constexpr double perimeter_ellipse_2_1 = 9.68844822054767619842850319639;
constexpr double perimeter_ellipse_e03 = 6.1393338596929961665812141499;
constexpr double perimeter_ellipse_1_09 = 5.9731604325248287448200487129;
constexpr double perimeter_oval4 = 6.70715226023175940630529761384;
constexpr double fourier_abs_K_at_0 = 2.04728950403690888119953863898;
constexpr double fourier_abs_K_at_half = 1.94710537276134943773427738442;
constexpr double saddle_mu2 = 109.247711622547630530773616496;
constexpr double sink_re = -0.21875;
constexpr double sink_im = 0.449609205310567457024759818515266;
constexpr double lambda_minus_quarter = 0.0717967697244908258902146339765;
constexpr double lambda_bar_minus_half = 0.171572875253809902396622551581;
constexpr double cone_bound_e03 = 0.00194978461629690473948468786727;
}  // namespace ref

TEST(Oracle, EllipsePerimeters) {
  EXPECT_NEAR(make_ellipse({2.0, 1.0}).perimeter, ref::perimeter_ellipse_2_1, 1e-12);
  EXPECT_NEAR(make_ellipse(EllipseSpec::from_eccentricity(0.3)).perimeter, ref::perimeter_ellipse_e03, 1e-12);
  EXPECT_NEAR(make_ellipse({1.0, 0.9}).perimeter, ref::perimeter_ellipse_1_09, 1e-12);
}

TEST(Oracle, FlattenedOvalPerimeter) {
  EXPECT_NEAR(make_flattened_oval(4).perimeter, ref::perimeter_oval4, 1e-10);
}

TEST(Oracle, EllipseVertexCurvatures) {
  const auto c = make_ellipse({2.0, 1.0});
  EXPECT_NEAR(c.curvature(0.0), -2.0, 1e-9);
  EXPECT_NEAR(c.curvature(0.25 * c.perimeter), -0.25, 1e-9);
  EXPECT_NEAR(c.max_abs_curvature, 2.0, 1e-9);
}

TEST(Oracle, FourierPerturbedCurvature) {
  const auto c = make_fourier_perturbed({2.0, 1.0}, {{3, 0.02, 0.0}});
  EXPECT_NEAR(c.curvature(0.0), -ref::fourier_abs_K_at_0, 1e-7);
  EXPECT_NEAR(c.curvature(0.5 * c.perimeter), -ref::fourier_abs_K_at_half, 1e-7);
}

TEST(Oracle, PinchedThresholdFromEccentricity) {
  // max tau K = 2 (e^2 - 1), attained on the minor axis
  for (auto [a1, a2] : {std::pair{1.0, std::sqrt(1 - 0.09)}, std::pair{1.0, 0.9}, std::pair{2.0, 1.0}}) {
    const double e2 = 1 - a2 * a2 / (a1 * a1);
    const auto cert = check_pinched(make_ellipse({a1, a2}));
    EXPECT_NEAR(cert.max_tau_K, 2 * (e2 - 1), 1e-9);
    EXPECT_EQ(cert.passes, 2 * (e2 - 1) < -1);
  }
}

TEST(Oracle, EllipseTwoPeriodicChords) {
  const auto o = ellipse_orbits(make_ellipse({2.0, 1.0}));
  EXPECT_NEAR(o.H.tau, 4.0, 1e-10);
  EXPECT_NEAR(o.E.tau, 2.0, 1e-10);
  EXPECT_NEAR(o.H.k12, 49.0, 1e-8);
  EXPECT_NEAR(o.E.k12, 0.25, 1e-10);
}

TEST(Oracle, SaddleAndSinkEigenvalues) {
  const auto o = ellipse_orbits(make_ellipse({2.0, 1.0}));
  const auto h = classify_two_periodic(o.H, 0.5);
  ASSERT_FALSE(h.eigenvalues.complex);
  EXPECT_NEAR(std::max(h.eigenvalues.mu1, h.eigenvalues.mu2), ref::saddle_mu2, 1e-9 * ref::saddle_mu2);
  EXPECT_NEAR(h.eigenvalues.mu1 * h.eigenvalues.mu2, 0.25, 1e-12);
  const auto e = classify_two_periodic(o.E, 0.5);
  ASSERT_TRUE(e.eigenvalues.complex);
  EXPECT_NEAR(e.eigenvalues.modulus * std::cos(e.eigenvalues.argument), ref::sink_re, 1e-10);
  EXPECT_NEAR(std::abs(e.eigenvalues.modulus * std::sin(e.eigenvalues.argument)), ref::sink_im, 1e-10);
  EXPECT_NEAR(e.eigenvalues.modulus, 0.5, 1e-10);
}

TEST(Oracle, BifurcationThresholds) {
  EXPECT_NEAR(lambda_minus_of(0.25), ref::lambda_minus_quarter, 1e-16);
  EXPECT_NEAR(lambda_bar_of(-0.5), ref::lambda_bar_minus_half, 1e-16);
  const auto o = ellipse_orbits(make_ellipse({2.0, 1.0}));
  const auto e = classify_two_periodic(o.E, 0.5);
  ASSERT_TRUE(e.lambda_minus.has_value());
  EXPECT_NEAR(*e.lambda_minus, ref::lambda_minus_quarter, 1e-10);
}

TEST(Oracle, CharacteristicPolynomialAtOne) {
  // chi(1) = (1 + l1)(1 + l2)(1 - k)
  EXPECT_NEAR(characteristic_at_one(1.0, 0.3, 0.7), 0.0, 1e-15);
  EXPECT_NEAR(characteristic_at_one(49.0, 0.6, 0.8), 1.6 * 1.8 * (1 - 49.0), 1e-12);
  EXPECT_NEAR(characteristic_at_one(0.25, 0.5, 0.5), 2.25 * 0.75, 1e-15);
}

TEST(Oracle, LengthHessianDeterminant) {
  // det A = (k - 1) / tau^2
  const auto o = ellipse_orbits(make_ellipse({2.0, 1.0}));
  EXPECT_NEAR(length_hessian(o.H).det, 3.0, 1e-8);
  EXPECT_NEAR(length_hessian(o.E).det, -0.1875, 1e-8);
}

TEST(Oracle, ConeFieldDissipationBound) {
  const auto c = make_ellipse(EllipseSpec::from_eccentricity(0.3));
  const auto cf = make_cone_field(c, check_pinched(c));
  EXPECT_NEAR(cf.c0, (-1 - 2 * (0.09 - 1)) / 2, 1e-9);
  EXPECT_NEAR(cf.delta0, 2.1, 1e-9);
  EXPECT_GT(cf.lambda1, ref::cone_bound_e03);
  EXPECT_NEAR(cf.lambda_max_certified, ref::cone_bound_e03, 1e-9 * ref::cone_bound_e03 + 1e-14);
}
