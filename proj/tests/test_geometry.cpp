#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "billiards/geometry.hpp"
#include "support.hpp"

using namespace billiards;
using std::numbers::pi;

namespace {

double analytic_ellipse_curvature(double a1, double a2, Vec2 x) {
  const double q = x.x * x.x / (a1 * a1 * a1 * a1) + x.y * x.y / (a2 * a2 * a2 * a2);
  return -1.0 / (a1 * a1 * a2 * a2 * std::pow(q, 1.5));
}

}  // namespace

TEST(Ellipse, UnitCircleHasConstantCurvatureAndPerimeter) {
  const auto c = make_ellipse({1.0, 1.0}, 1024);
  EXPECT_NEAR(c.perimeter, 2 * pi, 1e-12);
  for (double K : c.curvatures) EXPECT_NEAR(K, -1.0, 1e-10);
  EXPECT_EQ(c.kind, "circle");
}

TEST(Ellipse, VertexCurvatures) {
  const auto c = make_ellipse({2.0, 1.0});
  const double P = c.perimeter;
  EXPECT_NEAR(c.curvature(0.0), -2.0, 1e-9);
  EXPECT_NEAR(c.curvature(0.5 * P), -2.0, 1e-9);
  EXPECT_NEAR(c.curvature(0.25 * P), -0.25, 1e-9);
  EXPECT_NEAR(c.curvature(0.75 * P), -0.25, 1e-9);
  EXPECT_NEAR(c.position(0.25 * P).y, 1.0, 1e-12);
}

TEST(Ellipse, CurvatureMatchesClosedFormAtAllSamples) {
  const auto c = make_ellipse({2.0, 1.0});
  for (int i = 0; i < c.sample_count; ++i) {
    const double K = analytic_ellipse_curvature(2.0, 1.0, c.positions[i]);
    EXPECT_LT(testing_support::rel_err(c.curvatures[i], K), 1e-7) << "sample " << i;
  }
}

TEST(Ellipse, RejectsDegenerateAxes) {
  EXPECT_THROW(make_ellipse({1.0, 0.0}), invalid_input);
  EXPECT_THROW(make_ellipse({1.0, 2.0}), invalid_input);
  EXPECT_THROW(make_ellipse({1.0, 1.0}, 32), invalid_input);
  EXPECT_THROW(EllipseSpec::from_eccentricity(1.0), invalid_input);
}

TEST(Ellipse, EccentricityRoundTrip) {
  const auto s = EllipseSpec::from_eccentricity(0.3, 2.0);
  EXPECT_NEAR(s.eccentricity(), 0.3, 1e-15);
  EXPECT_NEAR(EllipseSpec({1.0, 0.9}).eccentricity(), std::sqrt(0.19), 1e-15);
}

TEST(BoundaryInvariants, UniformArclengthUnitTangentsAndOneTurn) {
  for (const auto& c : {make_ellipse({2.0, 1.0}), make_flattened_oval(4), make_flattened_oval(6),
                        make_fourier_perturbed({2.0, 1.0}, {{3, 0.02, 0.0}})}) {
    SCOPED_TRACE(c.kind);
    double turn = 0.0;
    for (int i = 0; i < c.sample_count; ++i) {
      const int j = (i + 1) % c.sample_count;
      const double gap = norm(c.positions[j] - c.positions[i]);
      EXPECT_NEAR(gap, c.spacing, 1e-9 * c.perimeter);  // chord <= arc, second-order close
      EXPECT_NEAR(norm(c.tangents[i]), 1.0, 1e-9);
      turn += std::atan2(cross(c.tangents[i], c.tangents[j]), dot(c.tangents[i], c.tangents[j]));
    }
    EXPECT_NEAR(turn, 2 * pi, 1e-9);
    EXPECT_NEAR(c.spacing * c.sample_count, c.perimeter, 1e-12);
  }
}

TEST(BoundaryInvariants, ArclengthParameterHasUnitSpeed) {
  const auto c = make_ellipse({2.0, 1.0});
  const double h = 1e-5;
  for (int k = 0; k < 37; ++k) {
    const double s = c.perimeter * (k + 0.3) / 37;
    const double speed = norm(c.position(s + h) - c.position(s - h)) / (2 * h);
    EXPECT_NEAR(speed, 1.0, 1e-8);
  }
}

TEST(FlattenedOval, HasFlatPointsAndStaysConvex) {
  for (int m : {4, 6}) {
    const auto c = make_flattened_oval(m);
    double kmin = 1e300, kmax = -1e300;
    for (double K : c.curvatures) {
      kmin = std::min(kmin, std::abs(K));
      kmax = std::max(kmax, K);
    }
    EXPECT_LT(kmin, 1e-6);
    EXPECT_LE(kmax, 0.0);
    EXPECT_FALSE(c.strongly_convex);
    if (m == 4) EXPECT_EQ(c.flat_samples, 2);
    else EXPECT_EQ(c.flat_samples % 2, 0);  // the higher-order flat points spread over a symmetric run of samples
  }
}

TEST(FlattenedOval, RejectsOddOrSmallDegree) {
  EXPECT_THROW(make_flattened_oval(3), invalid_input);
  EXPECT_THROW(make_flattened_oval(2), invalid_input);
}

TEST(FlattenedOval, NotPinched) {
  const auto cert = check_pinched(make_flattened_oval(4));
  EXPECT_FALSE(cert.passes);
  EXPECT_GE(cert.max_tau_K, -1.0);
}

TEST(FourierPerturbed, RejectsLossOfConvexity) {
  EXPECT_THROW(make_fourier_perturbed({1.0, 1.0}, {{5, 0.2, 0.0}}), invalid_input);
  EXPECT_NO_THROW(make_fourier_perturbed({1.0, 1.0}, {{5, 0.01, 0.0}}));
}

TEST(Chord, CircleDiameterAndInscribedChord) {
  const double R = 1.7;
  const auto c = make_circle(R);
  for (double s : {0.0, 1.0, 5.5}) {
    const auto ch = chord(c, s, 0.0);
    EXPECT_NEAR(ch.tau, 2 * R, 1e-10);
    EXPECT_NEAR(periodic_diff(ch.s_next, s + pi * R, c.perimeter), 0.0, 1e-9);
    for (double phi : {-1.2, -0.4, 0.3, 1.4}) EXPECT_NEAR(chord(c, s, phi).tau, 2 * R * std::cos(phi), 1e-10);
  }
}

TEST(Chord, EllipseMinorAxis) {
  const auto c = make_ellipse({2.0, 1.0});
  const auto ch = chord(c, 0.25 * c.perimeter, 0.0);
  EXPECT_NEAR(ch.tau, 2.0, 1e-10);
  const Vec2 x = c.position(ch.s_next);
  EXPECT_NEAR(x.x, 0.0, 1e-9);
  EXPECT_NEAR(x.y, -1.0, 1e-9);
}

TEST(Chord, EndpointLiesOnRay) {
  const auto c = make_fourier_perturbed({1.5, 1.0}, {{3, 0.02, 0.4}});
  for (const auto& p : testing_support::random_points(c, 200, 0.99, 11)) {
    const auto ch = chord_r(c, p.s, p.r);
    const auto L = c.local(p.s);
    const Vec2 v = nu_of(p.r) * perp(L.T) - p.r * L.T;
    const Vec2 d = c.position(ch.s_next) - L.x;
    EXPECT_NEAR(cross(v, d), 0.0, 1e-10);
    EXPECT_GT(dot(v, d), 0.0);
    EXPECT_NEAR(norm(d), ch.tau, 1e-10);
  }
}

TEST(Chord, RejectsTangentialShot) {
  const auto c = make_circle(1.0);
  EXPECT_THROW(chord(c, 0.0, pi / 2), invalid_input);
  EXPECT_THROW(chord_r(c, 0.0, -1.0), invalid_input);
}

TEST(Pinched, Circle) {
  const auto cert = check_pinched(make_circle(1.0));
  EXPECT_TRUE(cert.passes);
  EXPECT_NEAR(cert.max_tau_K, -2.0, 1e-9);
  EXPECT_NEAR(cert.margin, 1.0, 1e-9);
}

TEST(Pinched, SlightlyEccentricEllipsePasses) {
  EXPECT_TRUE(check_pinched(make_ellipse({1.0, 0.9})).passes);
}

TEST(Pinched, TwoToOneEllipseFails) {
  const auto cert = check_pinched(make_ellipse({2.0, 1.0}));
  EXPECT_FALSE(cert.passes);
  EXPECT_NEAR(cert.max_tau_K, -0.5, 1e-9);
}

TEST(Pinched, TauKIncreasesFromMajorToMinorVertex) {
  const auto c = make_ellipse(EllipseSpec::from_eccentricity(0.6));
  double prev = -1e300;
  for (int i = 0; i <= 256; ++i) {
    const double s = 0.25 * c.perimeter * i / 256;
    const double v = chord_r(c, s, 0.0).tau * c.curvature(s);
    EXPECT_GE(v, prev - 1e-12);
    prev = v;
  }
}

TEST(Diameter, EllipseIsMajorAxis) { EXPECT_NEAR(diameter(make_ellipse({2.0, 1.0})), 4.0, 1e-9); }
