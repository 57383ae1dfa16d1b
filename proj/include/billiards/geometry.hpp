// Convex billiard tables: arclength-uniform boundary samples, chords and the
// pinched-curvature test.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "jet.hpp"

namespace billiards {

struct EllipseSpec {
  double a1 = 1.0;  // semi-major
  double a2 = 1.0;  // semi-minor

  double eccentricity() const { return std::sqrt(a1 * a1 - a2 * a2) / a1; }
  void validate() const {
    if (!(a2 > 0.0) || !(a1 >= a2) || !std::isfinite(a1))
      throw invalid_input("ellipse: need a1 >= a2 > 0");
  }
  static EllipseSpec from_eccentricity(double e, double a1 = 1.0) {
    if (!(e >= 0.0 && e < 1.0)) throw invalid_input("ellipse: eccentricity must lie in [0,1)");
    return {a1, a1 * std::sqrt(1.0 - e * e)};
  }
};

struct FourierMode {
  int k = 0;
  double eps = 0.0;
  double phase = 0.0;
};

// Boundary sampled on a uniform arclength grid, counterclockwise, s = 0 at
// samples[0]. Curvature is stored with the convex-negative sign.
struct BoundaryCurve {
  std::string kind;
  int sample_count = 0;
  double perimeter = 0.0;
  double spacing = 0.0;
  int interpolation_order = 5;
  std::vector<Vec2> positions;
  std::vector<Vec2> tangents;
  std::vector<double> curvatures;
  std::vector<double> curvature_slopes;  // dK/ds
  bool strongly_convex = false;
  int flat_samples = 0;
  double max_abs_curvature = 0.0;
  std::optional<EllipseSpec> ellipse;

  struct Local {
    Vec2 x;
    Vec2 T;
    double K;
  };

  double wrap_s(double s) const { return wrap(s, perimeter); }

  // position, unit tangent and curvature at arbitrary arclength
  Local local(double s) const {
    int i;
    double u;
    locate(s, i, u);
    int j = (i + 1 == sample_count) ? 0 : i + 1;
    const double h = spacing;
    const Vec2 p0 = positions[i], p1 = positions[j];
    const Vec2 m0 = h * tangents[i], m1 = h * tangents[j];
    const Vec2 a0 = (-h * h * curvatures[i]) * perp(tangents[i]);
    const Vec2 a1 = (-h * h * curvatures[j]) * perp(tangents[j]);
    const double u2 = u * u, u3 = u2 * u, u4 = u3 * u, u5 = u4 * u;
    const double H0 = 1 - 10 * u3 + 15 * u4 - 6 * u5;
    const double H1 = u - 6 * u3 + 8 * u4 - 3 * u5;
    const double H2 = 0.5 * (u2 - 3 * u3 + 3 * u4 - u5);
    const double H3 = 0.5 * (u3 - 2 * u4 + u5);
    const double H4 = -4 * u3 + 7 * u4 - 3 * u5;
    const double H5 = 10 * u3 - 15 * u4 + 6 * u5;
    const double D0 = -30 * u2 + 60 * u3 - 30 * u4;
    const double D1 = 1 - 18 * u2 + 32 * u3 - 15 * u4;
    const double D2 = 0.5 * (2 * u - 9 * u2 + 12 * u3 - 5 * u4);
    const double D3 = 0.5 * (3 * u2 - 8 * u3 + 5 * u4);
    const double D4 = -12 * u2 + 28 * u3 - 15 * u4;
    const double D5 = 30 * u2 - 60 * u3 + 30 * u4;
    Local out;
    out.x = H0 * p0 + H1 * m0 + H2 * a0 + H3 * a1 + H4 * m1 + H5 * p1;
    Vec2 d = D0 * p0 + D1 * m0 + D2 * a0 + D3 * a1 + D4 * m1 + D5 * p1;
    out.T = (1.0 / norm(d)) * d;
    out.K = cubic(curvatures[i], curvatures[j], h * curvature_slopes[i], h * curvature_slopes[j], u);
    return out;
  }

  Vec2 position(double s) const { return local(s).x; }
  Vec2 tangent(double s) const { return local(s).T; }
  double curvature(double s) const {
    int i;
    double u;
    locate(s, i, u);
    int j = (i + 1 == sample_count) ? 0 : i + 1;
    return cubic(curvatures[i], curvatures[j], spacing * curvature_slopes[i], spacing * curvature_slopes[j], u);
  }
  double curvature_slope(double s) const {
    int i;
    double u;
    locate(s, i, u);
    int j = (i + 1 == sample_count) ? 0 : i + 1;
    const double h = spacing;
    const double y0 = curvatures[i], y1 = curvatures[j], m0 = h * curvature_slopes[i], m1 = h * curvature_slopes[j];
    const double u2 = u * u;
    double d = (6 * u2 - 6 * u) * y0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * y1 + (3 * u2 - 2 * u) * m1;
    return d / h;
  }

 private:
  void locate(double s, int& i, double& u) const {
    double t = wrap_s(s) / spacing;
    i = int(t);
    if (i >= sample_count) i = sample_count - 1;
    u = t - i;
  }
  static double cubic(double y0, double y1, double m0, double m1, double u) {
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * y1 + (u3 - u2) * m1;
  }
};

namespace detail {

template <std::size_t N>
Jet<N - 1> differentiate(const Jet<N>& a) {
  Jet<N - 1> r;
  for (std::size_t k = 1; k < N; ++k) r.c[k - 1] = double(k) * a.c[k];
  return r;
}

struct ParamSample {
  Vec2 x;
  double speed;
  Vec2 T;
  double K;     // signed, negative when convex
  double dKdt;  // derivative in the curve parameter
};

// Evaluates a parametric curve given as a generic callable t -> (x(t), y(t)).
template <class Curve>
ParamSample param_eval(const Curve& c, double t) {
  using J5 = Jet<5>;
  using J3 = Jet<3>;
  auto [X, Y] = c(J5::variable(t));
  Jet<4> X1 = differentiate(X), Y1 = differentiate(Y);
  J3 X2 = differentiate(X1), Y2 = differentiate(Y1);
  J3 x1, y1;
  for (int k = 0; k < 3; ++k) {
    x1.c[k] = X1.c[k];
    y1.c[k] = Y1.c[k];
  }
  J3 sp2 = x1 * x1 + y1 * y1;
  J3 sp = sqrt(sp2);
  J3 kappa = (x1 * Y2 - y1 * X2) / (sp2 * sp);
  ParamSample out;
  out.x = {X.c[0], Y.c[0]};
  out.speed = sp.c[0];
  out.T = {x1.c[0] / sp.c[0], y1.c[0] / sp.c[0]};
  out.K = -kappa.c[0];
  out.dKdt = -kappa.c[1];
  return out;
}

template <class Curve>
double speed_at(const Curve& c, double t) {
  auto [X, Y] = c(Jet<2>::variable(t));
  return std::hypot(X.c[1], Y.c[1]);
}

// Gauss-Legendre 8-point nodes and weights on [-1, 1]
inline const std::array<double, 8>& gl_nodes() {
  static const std::array<double, 8> n = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                          -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                          0.7966664774136267,  0.9602898564975363};
  return n;
}
inline const std::array<double, 8>& gl_weights() {
  static const std::array<double, 8> w = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                          0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                          0.2223810344533745, 0.1012285362903763};
  return w;
}

template <class Curve>
double arc_integral(const Curve& c, double a, double b) {
  const double m = 0.5 * (a + b), r = 0.5 * (b - a);
  double s = 0.0;
  for (int k = 0; k < 8; ++k) s += gl_weights()[k] * speed_at(c, m + r * gl_nodes()[k]);
  return s * r;
}

// Resamples a closed counterclockwise parametric curve on t in [0, 2 pi) to
// uniform arclength.
template <class Curve>
BoundaryCurve build_curve(const Curve& c, int sample_count, std::string kind) {
  if (sample_count < 64) throw invalid_input("boundary: sample_count must be >= 64");
  const double two_pi = 2.0 * std::numbers::pi;
  const int panels = std::max(1024, 4 * sample_count);
  const double dt = two_pi / panels;
  std::vector<double> cum(panels + 1, 0.0);
  for (int k = 0; k < panels; ++k) cum[k + 1] = cum[k] + arc_integral(c, k * dt, (k + 1) * dt);
  BoundaryCurve bc;
  bc.kind = std::move(kind);
  bc.sample_count = sample_count;
  bc.perimeter = cum[panels];
  bc.spacing = bc.perimeter / sample_count;
  bc.positions.resize(sample_count);
  bc.tangents.resize(sample_count);
  bc.curvatures.resize(sample_count);
  bc.curvature_slopes.resize(sample_count);
  int panel = 0;
  for (int i = 0; i < sample_count; ++i) {
    const double target = i * bc.spacing;
    while (panel + 1 < panels && cum[panel + 1] <= target) ++panel;
    const double ta = panel * dt;
    double t = ta + dt * (target - cum[panel]) / (cum[panel + 1] - cum[panel]);
    for (int it = 0; it < 30; ++it) {
      const double f = cum[panel] + arc_integral(c, ta, t) - target;
      const double step = f / speed_at(c, t);
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    ParamSample ps = param_eval(c, t);
    bc.positions[i] = ps.x;
    bc.tangents[i] = ps.T;
    bc.curvatures[i] = ps.K;
    bc.curvature_slopes[i] = ps.dKdt / ps.speed;
  }
  bc.strongly_convex = true;
  for (int i = 0; i < sample_count; ++i) {
    bc.max_abs_curvature = std::max(bc.max_abs_curvature, std::abs(bc.curvatures[i]));
    if (std::abs(bc.curvatures[i]) < 1e-6) ++bc.flat_samples;
    if (!(bc.curvatures[i] < 0.0)) bc.strongly_convex = false;
  }
  return bc;
}

}  // namespace detail

inline BoundaryCurve make_ellipse(const EllipseSpec& spec, int sample_count = 4096) {
  spec.validate();
  const double a1 = spec.a1, a2 = spec.a2;
  auto c = [a1, a2](auto t) {
    using std::cos, std::sin;
    return std::pair{a1 * cos(t), a2 * sin(t)};
  };
  BoundaryCurve bc = detail::build_curve(c, sample_count, a1 == a2 ? "circle" : "ellipse");
  bc.ellipse = spec;
  return bc;
}

inline BoundaryCurve make_circle(double radius, int sample_count = 4096) {
  return make_ellipse({radius, radius}, sample_count);
}

// x^m/a^m + y^2/b^2 = 1: two flat points at (0, +-b); s = 0 sits on the upper one.
inline BoundaryCurve make_flattened_oval(int flatness_degree, int sample_count = 4096, double a = 1.0,
                                         double b = 1.0) {
  if (flatness_degree < 4 || flatness_degree % 2 != 0)
    throw invalid_input("flattened oval: degree must be an even integer >= 4");
  if (!(a > 0 && b > 0)) throw invalid_input("flattened oval: axes must be positive");
  const int m = flatness_degree;
  auto c = [m, a, b](auto t) {
    using T = decltype(t);
    using std::cos, std::sin;
    T th = t + T(0.5 * std::numbers::pi);
    T ct = cos(th), st = sin(th);
    T A = ipow(ct * T(1.0 / a), m);
    T B = st * st * T(1.0 / (b * b));
    // solve rho^(m/2) A + rho B = 1 for rho = radius^2
    double rho0 = 1.0 / (B.c[0] + 1e-300);
    rho0 = std::min(rho0, std::max(a, b) * std::max(a, b));
    for (int it = 0; it < 100; ++it) {
      double F = std::pow(rho0, m / 2) * A.c[0] + rho0 * B.c[0] - 1.0;
      double dF = (m / 2) * std::pow(rho0, m / 2 - 1) * A.c[0] + B.c[0];
      double step = F / dF;
      rho0 -= step;
      if (std::abs(step) < 1e-16 * rho0) break;
    }
    T rho(rho0);
    for (int it = 0; it < 6; ++it) {
      T F = ipow(rho, m / 2) * A + rho * B - T(1.0);
      T dF = T(double(m / 2)) * ipow(rho, m / 2 - 1) * A + B;
      rho = rho - F / dF;
    }
    T r = sqrt(rho);
    return std::pair{r * ct, r * st};
  };
  return detail::build_curve(c, sample_count, "flattened_oval");
}

// Radially perturbed ellipse r(theta) = base(theta) (1 + sum eps_k cos(k theta + psi_k)).
inline BoundaryCurve make_fourier_perturbed(const EllipseSpec& spec, const std::vector<FourierMode>& modes,
                                            int sample_count = 4096) {
  spec.validate();
  const double a1 = spec.a1, a2 = spec.a2;
  auto c = [a1, a2, modes](auto t) {
    using T = decltype(t);
    using std::cos, std::sin;
    T ct = cos(t), st = sin(t);
    T base = T(a1 * a2) / sqrt(T(a2 * a2) * ct * ct + T(a1 * a1) * st * st);
    T f(1.0);
    for (const auto& md : modes) f = f + T(md.eps) * cos(T(double(md.k)) * t + T(md.phase));
    T r = base * f;
    return std::pair{r * ct, r * st};
  };
  BoundaryCurve bc = detail::build_curve(c, sample_count, "fourier_perturbed");
  if (!bc.strongly_convex) throw invalid_input("fourier perturbation destroys convexity");
  return bc;
}

struct ChordResult {
  double s_next = 0.0;  // lifted: s < s_next < s + P
  double tau = 0.0;
  int iterations = 0;
};

// Second intersection of the ray leaving Y(s) with direction
// nu N - r T (N inward normal, T tangent, nu = sqrt(1 - r^2)).
inline ChordResult chord_r(const BoundaryCurve& c, double s, double r) {
  if (!(std::abs(r) < 1.0)) throw invalid_input("chord: tangential shot");
  const double P = c.perimeter;
  const auto L0 = c.local(s);
  const double nu = std::sqrt((1.0 - r) * (1.0 + r));
  const Vec2 v = nu * perp(L0.T) - r * L0.T;
  // g(t) = cross(v, Y(t) - Y(s)) is negative just after s and positive just before s + P
  double lo = s, hi = s + P;
  double t = s + P * (0.5 + std::asin(r) / std::numbers::pi);
  t = std::clamp(t, s + 1e-3 * c.spacing, s + P - 1e-3 * c.spacing);
  ChordResult res;
  for (int it = 0; it < 200; ++it) {
    res.iterations = it + 1;
    const auto L = c.local(t);
    const double g = cross(v, L.x - L0.x);
    const double dg = cross(v, L.T);
    if (g < 0) lo = t;
    else hi = t;
    double tn = (dg > 0) ? t - g / dg : 0.5 * (lo + hi);
    if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
    const double step = std::abs(tn - t);
    t = tn;
    if (step < 1e-12 || hi - lo < 1e-13 * P) {
      res.s_next = t;
      res.tau = norm(c.position(t) - L0.x);
      return res;
    }
  }
  throw non_convergence("chord: root finder did not converge (bracket [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "])");
}

inline ChordResult chord(const BoundaryCurve& c, double s, double phi) {
  if (!(std::abs(phi) < 0.5 * std::numbers::pi)) throw invalid_input("chord: tangential shot");
  return chord_r(c, s, std::sin(phi));
}

struct DkCertificate {
  double max_tau_K = 0.0;
  double margin = 0.0;
  bool passes = false;
  int samples = 0;
  double argmax_s = 0.0;
  std::string reason;
};

inline DkCertificate check_pinched(const BoundaryCurve& c, int n_samples = 512) {
  DkCertificate cert;
  cert.samples = n_samples;
  if (!c.strongly_convex) {
    cert.max_tau_K = 0.0;
    cert.margin = -1.0;
    cert.passes = false;
    cert.reason = "curve is not strongly convex";
    return cert;
  }
  cert.max_tau_K = -1e300;
  for (int i = 0; i < n_samples; ++i) {
    const double s = c.perimeter * i / n_samples;
    const double v = chord_r(c, s, 0.0).tau * c.curvature(s);
    if (v > cert.max_tau_K) {
      cert.max_tau_K = v;
      cert.argmax_s = s;
    }
  }
  cert.margin = -1.0 - cert.max_tau_K;
  cert.passes = cert.max_tau_K < -1.0;
  if (!cert.passes) cert.reason = "some osculating circle center lies outside the table";
  return cert;
}

// Diameter of the table; attained by a chord perpendicular at its start.
inline double diameter(const BoundaryCurve& c, int n_samples = 1024) {
  double d = 0.0;
  for (int i = 0; i < n_samples; ++i) d = std::max(d, chord_r(c, c.perimeter * i / n_samples, 0.0).tau);
  return d;
}

}  // namespace billiards
