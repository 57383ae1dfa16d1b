// Conservative and dissipative billiard maps, inverses, Jacobians and the
// validity / twist certificates.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"
#include "geometry.hpp"

namespace billiards {

// (s, r) with s arclength and r the sine of the angle between the outgoing
// direction and the inward normal. The outgoing direction is nu N - r T, so
// r -> -1 shoots forward along the tangent and r -> +1 goes once around.
struct PhasePoint {
  double s = 0.0;
  double r = 0.0;
};

inline double nu_of(double r) { return std::sqrt(std::max(0.0, (1.0 - r) * (1.0 + r))); }

constexpr double kBoundaryClamp = 1e-12;

struct DissipationProfile {
  enum class Kind { Constant, Variable };
  Kind kind = Kind::Constant;
  double value = 1.0;
  std::function<double(double, double)> fn;
  std::function<double(double, double)> fn_ds;  // optional analytic partials
  std::function<double(double, double)> fn_dr;
  double fd_step = 1e-6;
  double sup_value = 1.0;  // upper bound of lambda, used for image bounds
  std::string description;

  static DissipationProfile constant(double lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw invalid_input("dissipation: constant lambda must lie in (0, 1]");
    DissipationProfile d;
    d.kind = Kind::Constant;
    d.value = lambda;
    d.sup_value = lambda;
    d.description = "constant " + std::to_string(lambda);
    return d;
  }

  static DissipationProfile variable(std::function<double(double, double)> f, double perimeter,
                                     std::function<double(double, double)> ds = {},
                                     std::function<double(double, double)> dr = {}) {
    DissipationProfile d;
    d.kind = Kind::Variable;
    d.fn = std::move(f);
    d.fn_ds = std::move(ds);
    d.fn_dr = std::move(dr);
    d.sup_value = 0.0;
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j <= 64; ++j) d.sup_value = std::max(d.sup_value, d.fn(perimeter * i / 64.0, -1.0 + j / 32.0));
    d.description = "variable";
    return d;
  }

  bool is_constant() const { return kind == Kind::Constant; }

  double operator()(double s, double r) const { return is_constant() ? value : fn(s, r); }

  double d_s(double s, double r) const {
    if (is_constant()) return 0.0;
    if (fn_ds) return fn_ds(s, r);
    return richardson([&](double h) { return (fn(s + h, r) - fn(s - h, r)) / (2 * h); });
  }
  double d_r(double s, double r) const {
    if (is_constant()) return 0.0;
    if (fn_dr) return fn_dr(s, r);
    return richardson([&](double h) { return (fn(s, r + h) - fn(s, r - h)) / (2 * h); });
  }

 private:
  template <class D>
  double richardson(D diff) const {
    const double d1 = diff(fd_step), d2 = diff(0.5 * fd_step);
    return (4.0 * d2 - d1) / 3.0;
  }
};

// Full record of one bounce.
struct Step {
  PhasePoint p;            // image, s reduced to [0, P)
  double ds = 0.0;         // lifted displacement in [0, P]
  double tau = 0.0;
  double r1 = 0.0;         // conservative outgoing sine before dissipation
  double K0 = 0.0, K1 = 0.0;
  double nu0 = 1.0, nu1 = 1.0;
  bool boundary = false;   // |r| at the clamp, point left in place
};

inline Step step_conservative_ex(const BoundaryCurve& c, PhasePoint p) {
  Step st;
  const double P = c.perimeter;
  if (std::abs(p.r) >= 1.0 - kBoundaryClamp) {
    st.p = {c.wrap_s(p.s), p.r > 0 ? 1.0 : -1.0};
    st.r1 = st.p.r;
    st.ds = p.r > 0 ? P : 0.0;
    st.boundary = true;
    st.nu0 = st.nu1 = 0.0;
    return st;
  }
  const auto L0 = c.local(p.s);
  const double nu = nu_of(p.r);
  ChordResult ch = chord_r(c, p.s, p.r);
  const auto L1 = c.local(ch.s_next);
  Vec2 u = L1.x - L0.x;
  const double tau = norm(u);
  u = (1.0 / tau) * u;
  st.r1 = std::clamp(-dot(u, L1.T), -1.0, 1.0);
  st.p = {c.wrap_s(ch.s_next), st.r1};
  st.ds = ch.s_next - p.s;
  st.tau = tau;
  st.K0 = L0.K;
  st.K1 = L1.K;
  st.nu0 = nu;
  st.nu1 = nu_of(st.r1);
  return st;
}

inline PhasePoint step_conservative(const BoundaryCurve& c, PhasePoint p) { return step_conservative_ex(c, p).p; }

inline Step step_dissipative_ex(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint p) {
  Step st = step_conservative_ex(c, p);
  st.p.r = d(st.p.s, st.r1) * st.r1;
  return st;
}

inline PhasePoint step_dissipative(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint p) {
  return step_dissipative_ex(c, d, p).p;
}

// Solves lambda(s, x) x = r for x, the fiber map being increasing.
inline double undo_dissipation(const DissipationProfile& d, double s, double r) {
  if (d.is_constant()) {
    const double x = r / d.value;
    if (!(std::abs(x) < 1.0)) throw out_of_image("inverse step: point outside the image annulus");
    return x;
  }
  auto F = [&](double x) { return d(s, x) * x - r; };
  if (!(F(-1.0) < 0.0 && F(1.0) > 0.0)) throw out_of_image("inverse step: point outside the image annulus");
  double lo = -1.0, hi = 1.0, x = r;
  for (int it = 0; it < 200; ++it) {
    const double f = F(x);
    if (f < 0) lo = x;
    else hi = x;
    const double df = d.d_r(s, x) * x + d(s, x);
    double xn = (df > 0) ? x - f / df : 0.5 * (lo + hi);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) < 1e-15) return xn;
    x = xn;
  }
  return x;
}

struct InverseStep {
  PhasePoint p;
  double ds = 0.0;  // lifted displacement in [-P, 0]
};

// f^{-1} = I o f_1 o I after undoing the fiber contraction, I(s, r) = (s, -r).
inline InverseStep step_inverse_ex(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint p) {
  const double r1 = undo_dissipation(d, p.s, p.r);
  Step st = step_conservative_ex(c, {p.s, -r1});
  InverseStep out;
  out.p = {st.p.s, -st.p.r};
  out.ds = st.ds - c.perimeter;
  return out;
}

inline PhasePoint step_inverse(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint p) {
  return step_inverse_ex(c, d, p).p;
}

struct JacobianFactors {
  double tau, K, K_next, nu, nu_next, r1;
};

inline Mat2 conservative_jacobian(const JacobianFactors& f) {
  const double tau = f.tau, K = f.K, K1 = f.K_next, nu = f.nu, nu1 = f.nu_next;
  return {-(tau * K + nu) / nu1, tau / (nu * nu1), tau * K * K1 + K * nu1 + K1 * nu, -(tau * K1 + nu1) / nu};
}

inline JacobianFactors factors_of(const Step& st) { return {st.tau, st.K0, st.K1, st.nu0, st.nu1, st.r1}; }

inline Mat2 jacobian_from_step(const DissipationProfile& d, const Step& st) {
  Mat2 J = conservative_jacobian(factors_of(st));
  const double s1 = st.p.s, r1 = st.r1;
  const Mat2 H{1.0, 0.0, d.d_s(s1, r1) * r1, d.d_r(s1, r1) * r1 + d(s1, r1)};
  return H * J;
}

inline Mat2 jacobian(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint p) {
  Step st = step_dissipative_ex(c, d, p);
  if (st.boundary) throw invalid_input("jacobian: point on the boundary circles");
  return jacobian_from_step(d, st);
}

// Central-difference Jacobian of the dissipative map (lifted in s).
inline Mat2 jacobian_fd(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint p, double h = 1e-6) {
  auto F = [&](double s, double r) {
    Step st = step_dissipative_ex(c, d, {s, r});
    return Vec2{s + st.ds, st.p.r};
  };
  Vec2 sp = F(p.s + h, p.r), sm = F(p.s - h, p.r);
  Vec2 rp = F(p.s, p.r + h), rm = F(p.s, p.r - h);
  return {(sp.x - sm.x) / (2 * h), (rp.x - rm.x) / (2 * h), (sp.y - sm.y) / (2 * h), (rp.y - rm.y) / (2 * h)};
}

struct DissipationReport {
  double min_quantity = 0.0;
  double max_quantity = 0.0;
  bool passes = false;
};

// Checks 0 < d_r lambda * r + lambda < 1 on a grid.
inline DissipationReport validate_dissipation(const DissipationProfile& d, const BoundaryCurve& c,
                                              int grid_resolution = 128) {
  DissipationReport rep;
  rep.min_quantity = std::numeric_limits<double>::infinity();
  rep.max_quantity = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_resolution; ++i) {
    const double s = c.perimeter * i / grid_resolution;
    for (int j = 0; j <= grid_resolution; ++j) {
      const double r = -1.0 + 2.0 * j / grid_resolution;
      const double q = d.d_r(s, r) * r + d(s, r);
      rep.min_quantity = std::min(rep.min_quantity, q);
      rep.max_quantity = std::max(rep.max_quantity, q);
    }
  }
  rep.passes = rep.min_quantity > 0.0 && rep.max_quantity < 1.0;
  return rep;
}

struct TwistCertificate {
  double min_upper_right_entry = 0.0;
  double max_tilt_ratio = 0.0;      // sup |b| / a for (a, b) the image of the vertical
  double beta = 0.0;                 // image of the vertical within pi/2 - beta of horizontal
  double max_nu_over_tau = 0.0;
  double proof_bound = 0.0;          // sup lambda (diam K0 + 1) sup(nu'/tau)
  bool passes = false;
};

inline TwistCertificate twist_certificate(const BoundaryCurve& c, const DissipationProfile& d, int n_s = 200,
                                          int n_r = 200) {
  TwistCertificate tc;
  tc.min_upper_right_entry = std::numeric_limits<double>::infinity();
  const double rmax = 1.0 - 1e-4;
  for (int i = 0; i < n_s; ++i) {
    const double s = c.perimeter * i / n_s;
    for (int j = 0; j < n_r; ++j) {
      const double r = -rmax + 2.0 * rmax * j / (n_r - 1);
      Step st = step_dissipative_ex(c, d, {s, r});
      Mat2 J = jacobian_from_step(d, st);
      tc.min_upper_right_entry = std::min(tc.min_upper_right_entry, J.b);
      if (J.b > 0) tc.max_tilt_ratio = std::max(tc.max_tilt_ratio, std::abs(J.d) / J.b);
      tc.max_nu_over_tau = std::max(tc.max_nu_over_tau, st.nu1 / st.tau);
    }
  }
  const double diam = diameter(c);
  tc.proof_bound = d.sup_value * (diam * c.max_abs_curvature + 1.0) * tc.max_nu_over_tau;
  tc.beta = std::atan2(1.0, tc.max_tilt_ratio);
  tc.passes = tc.min_upper_right_entry > 0.0 && std::isfinite(tc.max_tilt_ratio) && tc.beta > 0.0;
  return tc;
}

// Partial derivatives of the chord length l(s, s').
struct ChordGradient {
  double d1 = 0.0, d2 = 0.0, length = 0.0;
};

inline ChordGradient chord_gradient(const BoundaryCurve& c, double s, double s_next) {
  const auto A = c.local(s), B = c.local(s_next);
  Vec2 u = B.x - A.x;
  const double l = norm(u);
  u = (1.0 / l) * u;
  return {-dot(u, A.T), dot(u, B.T), l};
}

struct ActionResidual {
  std::vector<double> stationarity_residuals;
  double max_residual = 0.0;
};

// |d1 l(S_i, S_{i+1}) + a d2 l(S_{i-1}, S_i)| at interior indices.
inline ActionResidual action_residual(const BoundaryCurve& c, const std::vector<PhasePoint>& orbit, double a) {
  if (orbit.size() < 3) throw invalid_input("action residual: orbit needs at least 3 points");
  ActionResidual res;
  for (std::size_t i = 1; i + 1 < orbit.size(); ++i) {
    const double d1 = chord_gradient(c, orbit[i].s, orbit[i + 1].s).d1;
    const double d2 = chord_gradient(c, orbit[i - 1].s, orbit[i].s).d2;
    const double v = std::abs(d1 + a * d2);
    res.stationarity_residuals.push_back(v);
    res.max_residual = std::max(res.max_residual, v);
  }
  return res;
}

// Forward orbit; lifted_s accumulates displacements.
struct Orbit {
  std::vector<PhasePoint> points;
  std::vector<double> lifted_s;
  std::vector<double> taus;
};

inline Orbit iterate(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint p, int n) {
  Orbit o;
  o.points.reserve(n + 1);
  o.lifted_s.reserve(n + 1);
  o.points.push_back(p);
  o.lifted_s.push_back(p.s);
  o.taus.push_back(0.0);
  for (int k = 0; k < n; ++k) {
    Step st = step_dissipative_ex(c, d, p);
    p = st.p;
    o.points.push_back(p);
    o.lifted_s.push_back(o.lifted_s.back() + st.ds);
    o.taus.push_back(st.tau);
  }
  return o;
}

}  // namespace billiards
