// Period-two orbits (perpendicular chords), their eigenvalue classification,
// and the ellipse Lyapunov / convergence audits.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "billiard_core.hpp"
#include "common.hpp"
#include "geometry.hpp"

namespace billiards {

enum class CriticalType { Max, Saddle, Degenerate };

inline const char* to_string(CriticalType t) {
  switch (t) {
    case CriticalType::Max: return "max";
    case CriticalType::Saddle: return "saddle";
    default: return "degenerate";
  }
}

struct TwoPeriodicOrbit {
  double s1 = 0.0, s2 = 0.0;
  double tau = 0.0;
  double K1 = 0.0, K2 = 0.0;
  double k12 = 0.0;
  Mat2 hessian;
  CriticalType length_critical_type = CriticalType::Degenerate;
  double perpendicularity = 0.0;  // |d1 l| + |d2 l|

  PhasePoint bounce(int i) const { return {i == 0 ? s1 : s2, 0.0}; }

  static TwoPeriodicOrbit from_chord(const BoundaryCurve& c, double s1, double s2) {
    TwoPeriodicOrbit o;
    o.s1 = c.wrap_s(s1);
    o.s2 = c.wrap_s(s2);
    auto g = chord_gradient(c, o.s1, o.s2);
    o.tau = g.length;
    o.perpendicularity = std::abs(g.d1) + std::abs(g.d2);
    o.K1 = c.curvature(o.s1);
    o.K2 = c.curvature(o.s2);
    o.k12 = (o.tau * o.K1 + 1.0) * (o.tau * o.K2 + 1.0);
    o.hessian = {o.K1 + 1.0 / o.tau, 1.0 / o.tau, 1.0 / o.tau, o.K2 + 1.0 / o.tau};
    const double dA = o.hessian.det();
    if (std::abs(dA) < 1e-10) o.length_critical_type = CriticalType::Degenerate;
    else if (dA > 0 && o.hessian.a < 0) o.length_critical_type = CriticalType::Max;
    else o.length_critical_type = CriticalType::Saddle;
    return o;
  }
};

// Hessian of l(s1, s2) at a general chord.
inline Mat2 chord_hessian(const BoundaryCurve& c, double s1, double s2) {
  const auto A = c.local(s1), B = c.local(s2);
  Vec2 u = B.x - A.x;
  const double l = norm(u);
  u = (1.0 / l) * u;
  const double uT1 = dot(u, A.T), uT2 = dot(u, B.T);
  const double h11 = (1.0 - uT1 * uT1) / l + A.K * dot(u, perp(A.T));
  const double h22 = (1.0 - uT2 * uT2) / l - B.K * dot(u, perp(B.T));
  const double h12 = -(dot(A.T, B.T) - uT1 * uT2) / l;
  return {h11, h12, h12, h22};
}

struct TwoPeriodicScan {
  std::vector<TwoPeriodicOrbit> orbits;
  bool degenerate_family = false;
  int seeds_failed = 0;
};

inline TwoPeriodicScan find_two_periodic(const BoundaryCurve& c, int grid_resolution = 64) {
  TwoPeriodicScan scan;
  const double P = c.perimeter;
  for (int i = 0; i < grid_resolution; ++i) {
    for (int j = 0; j < grid_resolution; ++j) {
      double s1 = P * i / grid_resolution;
      double s2 = s1 + 0.5 * P + P * (j - grid_resolution / 2) / grid_resolution;
      if (j == 0) continue;  // s2 = s1 is not a chord
      bool ok = false;
      for (int it = 0; it < 80; ++it) {
        auto g = chord_gradient(c, s1, s2);
        if (!(g.length > 1e-6)) break;
        if (std::abs(g.d1) + std::abs(g.d2) < 1e-13) {
          ok = true;
          break;
        }
        Mat2 H = chord_hessian(c, s1, s2);
        // pseudo-inverse step through the symmetric eigen decomposition
        const double tr = H.trace(), det = H.det();
        const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
        const double e1 = 0.5 * tr + disc, e2 = 0.5 * tr - disc;
        const double emax = std::max(std::abs(e1), std::abs(e2));
        double dx = 0.0, dy = 0.0;
        for (double e : {e1, e2}) {
          if (std::abs(e) <= 1e-10 * emax) continue;
          Vec2 v = std::abs(H.b) > 1e-300 ? Vec2{H.b, e - H.a} : (std::abs(e - H.a) < std::abs(e - H.d) ? Vec2{1, 0} : Vec2{0, 1});
          v = (1.0 / norm(v)) * v;
          const double proj = (v.x * g.d1 + v.y * g.d2) / e;
          dx -= proj * v.x;
          dy -= proj * v.y;
        }
        const double step = std::hypot(dx, dy);
        if (step > 0.05 * P) {
          dx *= 0.05 * P / step;
          dy *= 0.05 * P / step;
        }
        s1 += dx;
        s2 += dy;
        if (std::abs(dx) + std::abs(dy) < 1e-15 * P) {
          ok = std::abs(g.d1) + std::abs(g.d2) < 1e-10;
          break;
        }
      }
      if (!ok) {
        ++scan.seeds_failed;
        continue;
      }
      double a = c.wrap_s(s1), b = c.wrap_s(s2);
      if (a > b) std::swap(a, b);
      auto o = TwoPeriodicOrbit::from_chord(c, a, b);
      if (!(o.tau > 1e-6) || std::abs(periodic_diff(a, b, P)) < 1e-6 * P) continue;
      if (o.length_critical_type == CriticalType::Degenerate) {
        if (!scan.degenerate_family) scan.orbits.push_back(o);
        scan.degenerate_family = true;
        continue;
      }
      bool dup = false;
      auto near = [P](double x, double y) { return std::abs(periodic_diff(x, y, P)) < 1e-6 * P; };
      for (const auto& q : scan.orbits)
        if ((near(q.s1, o.s1) && near(q.s2, o.s2)) || (near(q.s1, o.s2) && near(q.s2, o.s1))) dup = true;
      if (!dup) scan.orbits.push_back(o);
    }
  }
  std::sort(scan.orbits.begin(), scan.orbits.end(), [](const auto& x, const auto& y) { return x.s1 < y.s1; });
  return scan;
}

enum class OrbitType { Saddle, Sink, Parabolic, Undetermined };

inline const char* to_string(OrbitType t) {
  switch (t) {
    case OrbitType::Saddle: return "saddle";
    case OrbitType::Sink: return "sink";
    case OrbitType::Parabolic: return "parabolic";
    default: return "undetermined";
  }
}

// Real pair (mu1, mu2) with |mu1| <= |mu2|, or a complex pair stored as
// modulus and argument of the root with non-negative imaginary part.
struct EigenPair {
  bool complex = false;
  double mu1 = 0.0, mu2 = 0.0;
  double modulus = 0.0, argument = 0.0;
};

inline EigenPair eigen_from_trace_det(double tr, double det, std::optional<double> disc_override = {}) {
  const double disc = disc_override ? *disc_override : tr * tr - 4.0 * det;
  EigenPair e;
  if (disc >= 0.0) {
    const double sq = std::sqrt(disc);
    const double big = 0.5 * (tr + (tr >= 0 ? sq : -sq));
    const double small = big != 0.0 ? det / big : 0.0;
    e.mu1 = small;
    e.mu2 = big;
    if (std::abs(e.mu1) > std::abs(e.mu2)) std::swap(e.mu1, e.mu2);
    e.modulus = std::abs(e.mu2);
  } else {
    e.complex = true;
    e.modulus = std::sqrt(det);
    e.argument = std::atan2(0.5 * std::sqrt(-disc), 0.5 * tr);
    e.mu1 = e.mu2 = 0.5 * tr;
  }
  return e;
}

inline EigenPair eigen_of(const Mat2& m) { return eigen_from_trace_det(m.trace(), m.det()); }

struct OrbitClassification {
  OrbitType orbit_type = OrbitType::Undetermined;
  EigenPair eigenvalues;
  std::optional<double> lambda_minus;
  std::optional<double> lambda_bar;
  char case_label = '?';
  double trace = 0.0, det = 0.0;
  bool scalar_matrix = false;  // Df^2 = -lambda id
};

inline double lambda_minus_of(double k) { return (1.0 - std::sqrt(1.0 - k)) / (1.0 + std::sqrt(1.0 - k)); }
inline double lambda_bar_of(double k) { return (1.0 - std::sqrt(-k)) / (1.0 + std::sqrt(-k)); }

inline OrbitClassification classify_k12(double k, double lambda, double tol = 1e-12) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw invalid_input("classification: lambda must lie in (0,1)");
  OrbitClassification oc;
  const double q = (1 + lambda) * (1 + lambda) * k;
  oc.trace = q - 2 * lambda;
  oc.det = lambda * lambda;
  oc.eigenvalues = eigen_from_trace_det(oc.trace, oc.det, (q - 4 * lambda) * q);
  if (k > 1 + tol) {
    oc.case_label = 'a';
    oc.orbit_type = OrbitType::Saddle;
  } else if (std::abs(k - 1) <= tol) {
    oc.case_label = 'b';
    oc.orbit_type = OrbitType::Parabolic;
    oc.eigenvalues = {false, lambda * lambda, 1.0, 1.0, 0.0};
  } else if (k > tol) {
    oc.case_label = 'c';
    oc.orbit_type = OrbitType::Sink;
    oc.lambda_minus = lambda_minus_of(k);
  } else if (std::abs(k) <= tol) {
    oc.case_label = 'd';
    oc.orbit_type = OrbitType::Sink;
    oc.scalar_matrix = true;
    oc.eigenvalues = {false, -lambda, -lambda, lambda, 0.0};
  } else if (k > -1 - tol && std::abs(k + 1) > tol) {
    oc.case_label = 'e';
    const double lb = lambda_bar_of(k);
    oc.lambda_bar = lb;
    if (std::abs(lambda - lb) <= tol) {
      oc.orbit_type = OrbitType::Parabolic;
      oc.eigenvalues = {false, -lambda * lambda, -1.0, 1.0, 0.0};
    } else {
      oc.orbit_type = lambda < lb ? OrbitType::Sink : OrbitType::Saddle;
    }
  } else {
    oc.case_label = 'f';
    oc.orbit_type = OrbitType::Saddle;
  }
  return oc;
}

inline OrbitClassification classify_two_periodic(const TwoPeriodicOrbit& o, double lambda) {
  return classify_k12(o.k12, lambda);
}

inline OrbitClassification classify_nonconstant(const TwoPeriodicOrbit& o, double lambda1, double lambda2,
                                                 double tol = 1e-12) {
  if (!(lambda1 > 0 && lambda1 < 1 && lambda2 > 0 && lambda2 < 1))
    throw invalid_input("classification: lambda values must lie in (0,1)");
  OrbitClassification oc;
  const double k = o.k12;
  oc.trace = (1 + lambda1) * (1 + lambda2) * k - (lambda1 + lambda2);
  oc.det = lambda1 * lambda2;
  oc.eigenvalues = eigen_of(Mat2{oc.trace, -oc.det, 1.0, 0.0});
  if (k < -tol) {
    oc.orbit_type = OrbitType::Undetermined;
    oc.case_label = '?';
  } else if (std::abs(k - 1) <= tol) {
    oc.orbit_type = OrbitType::Parabolic;
    oc.case_label = 'b';
  } else if (k > 1) {
    oc.orbit_type = OrbitType::Saddle;
    oc.case_label = 'a';
  } else {
    oc.orbit_type = OrbitType::Sink;
    oc.case_label = std::abs(k) <= tol ? 'd' : 'c';
  }
  return oc;
}

// Characteristic polynomial of Df^2 at 1 for bounce values lambda1, lambda2.
inline double characteristic_at_one(double k, double lambda1, double lambda2) {
  return (1 + lambda1) * (1 + lambda2) * (1 - k);
}

// Df^2 at the first bounce, assembled from the Jacobian op along the orbit.
inline Mat2 two_step_jacobian(const BoundaryCurve& c, const DissipationProfile& d, const TwoPeriodicOrbit& o,
                              int bounce = 0) {
  PhasePoint p = o.bounce(bounce);
  Step st = step_dissipative_ex(c, d, p);
  Mat2 J1 = jacobian_from_step(d, st);
  Step st2 = step_dissipative_ex(c, d, st.p);
  Mat2 J2 = jacobian_from_step(d, st2);
  return J2 * J1;
}

// Closed-form Df^2 at the first bounce from tau, K1, K2.
inline Mat2 two_step_closed_form(const TwoPeriodicOrbit& o, double lambda1, double lambda2) {
  const double t = o.tau, k = o.k12;
  const Mat2 A{-(t * o.K1 + 1), t, lambda2 * (k - 1) / t, -lambda2 * (t * o.K2 + 1)};
  const Mat2 B{-(t * o.K2 + 1), t, lambda1 * (k - 1) / t, -lambda1 * (t * o.K1 + 1)};
  return B * A;
}

enum class Definiteness { NegativeDefinite, PositiveDefinite, Indefinite, Degenerate };

struct LengthHessian {
  Mat2 A;
  double det = 0.0;
  Definiteness verdict = Definiteness::Degenerate;
};

inline LengthHessian length_hessian(const TwoPeriodicOrbit& o) {
  LengthHessian h;
  h.A = {o.K1 + 1.0 / o.tau, 1.0 / o.tau, 1.0 / o.tau, o.K2 + 1.0 / o.tau};
  h.det = h.A.det();
  if (std::abs(h.det) < 1e-10) h.verdict = Definiteness::Degenerate;
  else if (h.det < 0) h.verdict = Definiteness::Indefinite;
  else h.verdict = h.A.a < 0 ? Definiteness::NegativeDefinite : Definiteness::PositiveDefinite;
  return h;
}

// The two period-two orbits of an ellipse with s = 0 at the major vertex:
// H along the major axis, E along the minor axis.
struct EllipseOrbits {
  TwoPeriodicOrbit H, E;
};

inline EllipseOrbits ellipse_orbits(const BoundaryCurve& c) {
  if (!c.ellipse) throw invalid_input("ellipse orbits: curve is not an ellipse");
  const double P = c.perimeter;
  return {TwoPeriodicOrbit::from_chord(c, 0.0, 0.5 * P), TwoPeriodicOrbit::from_chord(c, 0.25 * P, 0.75 * P)};
}

inline double phase_distance(const BoundaryCurve& c, PhasePoint a, PhasePoint b) {
  return std::hypot(periodic_diff(a.s, b.s, c.perimeter), a.r - b.r);
}

// (x, v): foot point and outgoing unit direction.
inline std::pair<Vec2, Vec2> to_position_velocity(const BoundaryCurve& c, PhasePoint p) {
  const auto L = c.local(p.s);
  const double nu = nu_of(p.r);
  return {L.x, nu * perp(L.T) - p.r * L.T};
}

struct LyapunovReport {
  std::vector<double> L;
  double max_positive_increment = 0.0;
  bool pair_sum_strictly_decreasing = true;  // L + L o f before reaching the period-two set
  int steps_to_period_two = -1;              // first index within 1e-6 of the period-two set
  double max_positive_increment_minus_zeta = 0.0;
  int zeta_degenerate_count = 0;
};

inline LyapunovReport lyapunov_audit(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint start,
                                     int n_steps) {
  if (!c.ellipse) throw invalid_input("lyapunov audit: curve is not an ellipse");
  const double a1 = c.ellipse->a1, a2 = c.ellipse->a2;
  const auto eo = ellipse_orbits(c);
  const PhasePoint II[4] = {eo.H.bounce(0), eo.H.bounce(1), eo.E.bounce(0), eo.E.bounce(1)};
  LyapunovReport rep;
  rep.L.reserve(n_steps + 1);
  std::vector<double> zeta;
  PhasePoint p = start;
  for (int k = 0; k <= n_steps; ++k) {
    auto [x, v] = to_position_velocity(c, p);
    rep.L.push_back(x.x * v.x / (a1 * a1) + x.y * v.y / (a2 * a2));
    const double cr = cross(x, v);
    const double z = a1 * a1 * v.y * v.y + a2 * a2 * v.x * v.x - cr * cr;
    if (std::abs(z - a1 * a1) < 1e-12 || std::abs(z - a2 * a2) < 1e-12) ++rep.zeta_degenerate_count;
    zeta.push_back(z);
    if (rep.steps_to_period_two < 0) {
      for (const auto& q : II)
        if (phase_distance(c, p, q) < 1e-6) rep.steps_to_period_two = k;
    }
    if (k < n_steps) p = step_dissipative(c, d, p);
  }
  for (int k = 0; k < n_steps; ++k) {
    rep.max_positive_increment = std::max(rep.max_positive_increment, rep.L[k + 1] - rep.L[k]);
    rep.max_positive_increment_minus_zeta = std::max(rep.max_positive_increment_minus_zeta, zeta[k] - zeta[k + 1]);
  }
  const int horizon = rep.steps_to_period_two < 0 ? n_steps : rep.steps_to_period_two;
  for (int k = 0; k + 2 <= horizon && k + 2 <= n_steps; ++k) {
    const double a = rep.L[k] + rep.L[k + 1], b = rep.L[k + 1] + rep.L[k + 2];
    if (!(b < a)) rep.pair_sum_strictly_decreasing = false;
  }
  return rep;
}

enum class LimitLabel { E, H, NonConverged };

inline const char* to_string(LimitLabel l) {
  switch (l) {
    case LimitLabel::E: return "E";
    case LimitLabel::H: return "H";
    default: return "non-converged";
  }
}

struct ConvergenceResult {
  LimitLabel label = LimitLabel::NonConverged;
  int steps = 0;
};

inline ConvergenceResult converge_to_two_periodic(const BoundaryCurve& c, const DissipationProfile& d,
                                                  PhasePoint start, int n_max, double tol = 1e-6) {
  if (!c.ellipse) throw invalid_input("convergence: curve is not an ellipse");
  if (n_max < 1) throw invalid_input("convergence: n_max must be >= 1");
  const auto eo = ellipse_orbits(c);
  PhasePoint p = start;
  for (int k = 0; k <= n_max; ++k) {
    for (int b = 0; b < 2; ++b) {
      if (phase_distance(c, p, eo.E.bounce(b)) < tol) return {LimitLabel::E, k};
      if (phase_distance(c, p, eo.H.bounce(b)) < tol) return {LimitLabel::H, k};
    }
    if (k < n_max) p = step_dissipative(c, d, p);
  }
  return {LimitLabel::NonConverged, n_max};
}

}  // namespace billiards
