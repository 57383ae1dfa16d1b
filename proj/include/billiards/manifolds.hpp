// Stable and unstable manifolds of saddle 2-periodic points, homoclinic
// crossings and Hausdorff distances between planar point sets.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "billiard_core.hpp"
#include "common.hpp"
#include "geometry.hpp"
#include "orbit_analysis.hpp"

namespace billiards {

// ---------------------------------------------------------------- Hausdorff

// Nearest-neighbour queries on a bucket grid; x optionally periodic.
class PointGrid {
 public:
  PointGrid(const std::vector<Vec2>& pts, double cell, std::optional<double> x_period = {})
      : pts_(pts), h_(cell), period_(x_period) {
    if (pts.empty()) throw invalid_input("point grid: empty set");
    if (!(cell > 0)) throw invalid_input("point grid: cell size must be positive");
    for (std::size_t i = 0; i < pts.size(); ++i) buckets_[key(cx(pts[i].x), cy(pts[i].y))].push_back(i);
  }

  double distance(Vec2 q) const {
    double best = std::numeric_limits<double>::infinity();
    const long qx = cx(q.x), qy = cy(q.y);
    constexpr long kMaxRing = 64;
    for (long ring = 0; ring <= kMaxRing; ++ring) {
      if (best <= (ring - 1) * h_) return best;
      for (long dx = -ring; dx <= ring; ++dx)
        for (long dy = -ring; dy <= ring; ++dy) {
          if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
          auto it = buckets_.find(key(wrapx(qx + dx), qy + dy));
          if (it == buckets_.end()) continue;
          for (std::size_t i : it->second) best = std::min(best, dist(q, pts_[i]));
        }
    }
    if (best <= kMaxRing * h_) return best;
    for (auto p : pts_) best = std::min(best, dist(q, p));
    return best;
  }

 private:
  long ncols() const { return period_ ? std::max(1L, long(std::ceil(*period_ / h_))) : 0; }
  long cx(double x) const {
    if (period_) return long(std::floor(wrap(x, *period_) / h_)) % ncols();
    return long(std::floor(x / h_));
  }
  long cy(double y) const { return long(std::floor(y / h_)); }
  long wrapx(long c) const {
    if (!period_) return c;
    const long n = ncols();
    return ((c % n) + n) % n;
  }
  static long long key(long x, long y) { return (static_cast<long long>(x) << 32) ^ (y & 0xffffffffLL); }
  double dist(Vec2 a, Vec2 b) const {
    const double dx = period_ ? periodic_diff(a.x, b.x, *period_) : a.x - b.x;
    return std::hypot(dx, a.y - b.y);
  }

  std::vector<Vec2> pts_;
  double h_;
  std::optional<double> period_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

inline double directed_hausdorff(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                                 std::optional<double> x_period = {}, double cell = 0.0) {
  if (a.empty() || b.empty()) throw invalid_input("hausdorff: empty set");
  if (!(cell > 0)) {
    double xmin = b[0].x, xmax = xmin, ymin = b[0].y, ymax = ymin;
    for (auto p : b) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    const double extent = std::hypot(xmax - xmin, ymax - ymin);
    cell = extent > 0 ? extent / std::sqrt(double(b.size())) : 1.0;
  }
  PointGrid grid(b, cell, x_period);
  double m = 0.0;
  for (auto p : a) m = std::max(m, grid.distance(p));
  return m;
}

inline double hausdorff_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                                 std::optional<double> x_period = {}) {
  return std::max(directed_hausdorff(a, b, x_period), directed_hausdorff(b, a, x_period));
}

// ---------------------------------------------------------------- branches

enum class BranchKind { Stable, Unstable };

inline const char* to_string(BranchKind k) { return k == BranchKind::Stable ? "stable" : "unstable"; }

struct LocalManifolds {
  PhasePoint saddle;
  int bounce = 0;
  Mat2 jacobian;  // Df^2 at the saddle
  double mu_stable = 0.0, mu_unstable = 0.0;
  Vec2 e_stable, e_unstable;  // unit eigenvectors
  double delta = 0.0;
  std::array<std::array<PhasePoint, 2>, 2> unstable_segment, stable_segment;  // [side][end]
  int period = 2;  // iterate used for growth: f^2, or f^4 for negative eigenvalues
  bool stable_segment_clipped = false;
};

struct ManifoldBranch {
  TwoPeriodicOrbit parent;
  int bounce = 0;
  BranchKind kind = BranchKind::Unstable;
  int side = +1;
  std::vector<PhasePoint> polyline;  // s wrapped to [0, P)
  double arclength = 0.0;
  Vec2 eigen_direction;
  double eigenvalue = 0.0;
  bool truncated = false;    // point or arclength budget exhausted
  bool clipped = false;      // left the image annulus under backward iteration
  std::optional<int> sink_index;  // into the sink list passed to the grower
  double terminal_sink_distance = std::numeric_limits<double>::infinity();
  int pieces = 0;
  int period = 2;
  std::vector<std::size_t> piece_starts;  // polyline index where each piece begins
  std::vector<double> params;  // piece + t; the growth map sends parameter u to u + 1

  std::vector<Vec2> points() const {
    std::vector<Vec2> v;
    v.reserve(polyline.size());
    for (auto p : polyline) v.push_back({p.s, p.r});
    return v;
  }
};

namespace detail {

inline Vec2 unit_eigenvector(const Mat2& m, double mu) {
  // (m - mu I) v = 0
  Vec2 a{m.b, mu - m.a}, b{mu - m.d, m.c};
  Vec2 v = norm(a) >= norm(b) ? a : b;
  const double n = norm(v);
  if (!(n > 0)) return {1.0, 0.0};
  v = (1.0 / n) * v;
  if (v.x < 0 || (v.x == 0 && v.y < 0)) v = -v;
  return v;
}

}  // namespace detail

inline LocalManifolds local_manifolds(const BoundaryCurve& c, const DissipationProfile& d, const TwoPeriodicOrbit& o,
                                      int bounce = 0, double delta_fraction = 1e-3) {
  LocalManifolds lm;
  lm.bounce = bounce;
  lm.saddle = o.bounce(bounce);
  lm.jacobian = two_step_jacobian(c, d, o, bounce);
  const EigenPair e = eigen_of(lm.jacobian);
  if (e.complex || !(std::abs(e.mu2) > 1.0 && std::abs(e.mu1) < 1.0))
    throw invalid_input("manifolds: 2-periodic orbit is not a saddle");
  lm.mu_stable = e.mu1;
  lm.mu_unstable = e.mu2;
  lm.e_stable = detail::unit_eigenvector(lm.jacobian, e.mu1);
  lm.e_unstable = detail::unit_eigenvector(lm.jacobian, e.mu2);
  lm.period = (e.mu2 < 0 || e.mu1 < 0) ? 4 : 2;
  lm.delta = delta_fraction * c.perimeter;
  const double P = c.perimeter;
  // endpoints: linear seeds at delta |mu|^-3 pushed 3 times by f^2 (or f^-2)
  for (int side = 0; side < 2; ++side) {
    const double sg = side == 0 ? 1.0 : -1.0;
    for (int u = 0; u < 2; ++u) {
      const Vec2 e = u == 0 ? lm.e_unstable : lm.e_stable;
      const double mu = u == 0 ? std::abs(lm.mu_unstable) : 1.0 / std::abs(lm.mu_stable);
      const double len = lm.delta * std::pow(mu, -3.0);
      PhasePoint q{lm.saddle.s + sg * len * e.x, lm.saddle.r + sg * len * e.y};
      for (int k = 0; k < 6; ++k) {
        if (u == 0) {
          q = step_dissipative(c, d, q);
          continue;
        }
        // the stable manifold may leave the image annulus; keep the last point inside
        try {
          q = step_inverse(c, d, q);
        } catch (const out_of_image&) {
          lm.stable_segment_clipped = true;
          break;
        }
      }
      q.s = wrap(q.s, P);
      auto& seg = u == 0 ? lm.unstable_segment : lm.stable_segment;
      seg[side] = {lm.saddle, q};
    }
  }
  return lm;
}

struct GrowOptions {
  double target_arclength = 50.0;
  long max_points = 400000;
  double max_spacing = 1e-3;
  double max_turn = 0.1;
  int initial_samples = 16;
  int pre_iterations = 1;  // corrections applied to the linear seed
  int max_pieces = 400;
  double sink_radius = 1e-4;
  int sink_run = 50;
  double clip_r = 1.0 - 1e-6;
  double min_parameter_gap = 1e-9;
  double min_turn_length = 1e-7;  // shorter segments are not refined for turning
};

namespace detail {

struct Tracer {
  const BoundaryCurve& c;
  const DissipationProfile& d;
  const LocalManifolds& lm;
  BranchKind kind;
  int side;
  GrowOptions opt;

  double factor() const {
    const double mu = kind == BranchKind::Unstable ? std::abs(lm.mu_unstable) : 1.0 / std::abs(lm.mu_stable);
    return lm.period == 4 ? mu * mu : mu;
  }

  // One application of the growth map (f^period forward, or backward).
  std::optional<PhasePoint> apply(PhasePoint p) const {
    for (int k = 0; k < lm.period; ++k) {
      if (kind == BranchKind::Unstable) {
        p = step_dissipative(c, d, p);
      } else {
        try {
          p = step_inverse(c, d, p);
        } catch (const out_of_image&) {
          return std::nullopt;
        }
        if (std::abs(p.r) >= opt.clip_r) return std::nullopt;
      }
    }
    return p;
  }

  // Point of the branch with parameter t in [piece, piece+1].
  std::optional<PhasePoint> point(int piece, double t) const {
    const Vec2 e = kind == BranchKind::Unstable ? lm.e_unstable : lm.e_stable;
    const double sigma = lm.delta * std::pow(factor(), t - 1.0 - opt.pre_iterations);
    PhasePoint p{lm.saddle.s + side * sigma * e.x, lm.saddle.r + side * sigma * e.y};
    for (int k = 0; k < piece + opt.pre_iterations; ++k) {
      auto q = apply(p);
      if (!q) return std::nullopt;
      p = *q;
    }
    p.s = wrap(p.s, c.perimeter);
    return p;
  }
};

}  // namespace detail

inline ManifoldBranch grow_branch(const BoundaryCurve& c, const DissipationProfile& d, const TwoPeriodicOrbit& o,
                                  const LocalManifolds& lm, BranchKind kind, int side,
                                  const std::vector<PhasePoint>& sinks = {}, GrowOptions opt = {}) {
  ManifoldBranch br;
  br.parent = o;
  br.bounce = lm.bounce;
  br.kind = kind;
  br.side = side;
  br.eigen_direction = kind == BranchKind::Unstable ? lm.e_unstable : lm.e_stable;
  br.eigenvalue = kind == BranchKind::Unstable ? lm.mu_unstable : lm.mu_stable;
  br.period = lm.period;
  detail::Tracer tr{c, d, lm, kind, side, opt};
  const double P = c.perimeter;
  auto dist = [&](PhasePoint a, PhasePoint b) { return std::hypot(periodic_diff(a.s, b.s, P), a.r - b.r); };
  auto dir = [&](PhasePoint a, PhasePoint b) { return Vec2{periodic_diff(b.s, a.s, P), b.r - a.r}; };

  br.polyline.push_back({wrap(lm.saddle.s, P), lm.saddle.r});
  br.params.push_back(-std::numeric_limits<double>::infinity());
  int sink_streak = 0;
  std::optional<int> streak_sink;
  bool stop = false;

  auto near_sink = [&](PhasePoint p) -> std::optional<int> {
    for (std::size_t i = 0; i < sinks.size(); ++i)
      if (dist(p, sinks[i]) < opt.sink_radius) return int(i);
    return std::nullopt;
  };

  auto push_point = [&](PhasePoint p, double u) {
    const PhasePoint last = br.polyline.back();
    br.arclength += dist(last, p);
    br.polyline.push_back(p);
    br.params.push_back(u);
    auto si = near_sink(p);
    if (si && si == streak_sink) ++sink_streak;
    else {
      sink_streak = si ? 1 : 0;
      streak_sink = si;
    }
    if (sink_streak >= opt.sink_run) {
      br.sink_index = streak_sink;
      stop = true;
    }
    if (long(br.polyline.size()) >= opt.max_points || br.arclength >= opt.target_arclength) {
      br.truncated = true;
      stop = true;
    }
  };

  for (int piece = 0; piece < opt.max_pieces && !stop; ++piece) {
    // adaptive samples over t in [0, 1] of this piece
    struct Sample {
      double t;
      PhasePoint p;
    };
    std::vector<Sample> base;
    bool exited = false;
    for (int i = 0; i <= opt.initial_samples; ++i) {
      const double t = double(i) / opt.initial_samples;
      auto p = tr.point(piece, t);
      if (!p) {
        exited = true;
        break;
      }
      base.push_back({t, *p});
    }
    br.piece_starts.push_back(br.polyline.size());
    // refine between consecutive samples depth-first, emitting in order
    Sample prev = base.empty() ? Sample{0.0, br.polyline.back()} : base.front();
    if (!base.empty() && piece == 0) push_point(prev.p, prev.t);
    std::optional<Vec2> prev_dir;
    if (br.polyline.size() >= 2)
      prev_dir = dir(br.polyline[br.polyline.size() - 2], br.polyline.back());
    for (std::size_t i = 1; i < base.size() && !stop; ++i) {
      std::vector<Sample> pending{base[i]};
      while (!pending.empty() && !stop) {
        Sample next = pending.back();
        const Vec2 v = dir(prev.p, next.p);
        const double len = norm(v);
        bool split = len > opt.max_spacing;
        if (!split && prev_dir && len > 0 && norm(*prev_dir) > 0) {
          const double turn = std::atan2(std::abs(cross(*prev_dir, v)), dot(*prev_dir, v));
          split = turn > opt.max_turn && len > opt.min_turn_length;
        }
        if (split && next.t - prev.t > opt.min_parameter_gap) {
          const double tm = 0.5 * (prev.t + next.t);
          auto pm = tr.point(piece, tm);
          if (!pm) {
            exited = true;
            pending.clear();
            break;
          }
          pending.push_back({tm, *pm});
          continue;
        }
        if (len > 0) {
          push_point(next.p, piece + next.t);
          prev_dir = v;
        }
        prev = next;
        pending.pop_back();
      }
      if (exited) break;
    }
    br.pieces = piece + 1;
    if (exited) {
      br.clipped = true;
      break;
    }
  }
  if (!stop && !br.clipped) br.truncated = true;
  for (std::size_t i = 0; i < sinks.size(); ++i)
    br.terminal_sink_distance = std::min(br.terminal_sink_distance, dist(br.polyline.back(), sinks[i]));
  if (!br.sink_index && !sinks.empty()) {
    for (std::size_t i = 0; i < sinks.size(); ++i)
      if (dist(br.polyline.back(), sinks[i]) < 1e-3) br.sink_index = int(i);
  }
  return br;
}

// Sink bounces (as f^2 fixed points) among the 2-periodic orbits of the table.
inline std::vector<PhasePoint> two_periodic_sinks(const BoundaryCurve& c, const DissipationProfile& d) {
  std::vector<PhasePoint> out;
  for (const auto& o : find_two_periodic(c).orbits) {
    const EigenPair e = eigen_of(two_step_jacobian(c, d, o, 0));
    const bool sink = e.complex ? e.modulus < 1.0 : std::abs(e.mu2) < 1.0;
    if (sink) {
      out.push_back(o.bounce(0));
      out.push_back(o.bounce(1));
    }
  }
  return out;
}

inline std::vector<ManifoldBranch> grow_unstable(const BoundaryCurve& c, const DissipationProfile& d,
                                                 const TwoPeriodicOrbit& o, int bounce,
                                                 const std::vector<PhasePoint>& sinks, GrowOptions opt = {},
                                                 int threads = 1) {
  const LocalManifolds lm = local_manifolds(c, d, o, bounce);
  std::vector<ManifoldBranch> out(2);
  parallel_for(2, threads >= 2 ? 2 : 1, [&](long b, long e, int) {
    for (long i = b; i < e; ++i) out[i] = grow_branch(c, d, o, lm, BranchKind::Unstable, i == 0 ? 1 : -1, sinks, opt);
  });
  return out;
}

inline std::vector<ManifoldBranch> grow_stable(const BoundaryCurve& c, const DissipationProfile& d,
                                               const TwoPeriodicOrbit& o, int bounce, GrowOptions opt = {},
                                               int threads = 1) {
  const LocalManifolds lm = local_manifolds(c, d, o, bounce);
  std::vector<ManifoldBranch> out(2);
  parallel_for(2, threads >= 2 ? 2 : 1, [&](long b, long e, int) {
    for (long i = b; i < e; ++i) out[i] = grow_branch(c, d, o, lm, BranchKind::Stable, i == 0 ? 1 : -1, {}, opt);
  });
  return out;
}

// ---------------------------------------------------------------- crossings

struct Crossing {
  std::size_t stable_segment = 0, unstable_segment = 0;
  PhasePoint point;
  double angle = 0.0;  // in [0, pi/2]
  bool transverse = false;
};

struct HorseshoeCertificate {
  std::vector<Crossing> crossings;
  double min_angle = std::numeric_limits<double>::infinity();
  int pairs_with_transverse = 0;
  int pairs_checked = 0;
  bool passes = false;
};

inline constexpr double kTransverseAngle = 1e-3;

namespace detail {

inline std::optional<std::pair<Vec2, Vec2>> segment_params(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
  const Vec2 u = a1 - a0, v = b1 - b0, w = b0 - a0;
  const double den = cross(u, v);
  if (den == 0.0) return std::nullopt;
  const double t = cross(w, v) / den, s = cross(w, u) / den;
  if (t < 0 || t > 1 || s < 0 || s > 1) return std::nullopt;
  return std::pair{a0 + t * u, Vec2{t, s}};
}

}  // namespace detail

// All crossings between two polylines living on the cylinder (x periodic).
// Crossings within `exclude_radius` of `exclude` are dropped.
inline std::vector<Crossing> polyline_crossings(const std::vector<Vec2>& a, const std::vector<Vec2>& b, double period,
                                                std::optional<Vec2> exclude = {}, double exclude_radius = 0.0) {
  std::vector<Crossing> out;
  if (a.size() < 2 || b.size() < 2) return out;
  auto seg_end = [&](Vec2 p, Vec2 q) { return Vec2{p.x + periodic_diff(q.x, p.x, period), q.y}; };
  double h = 0.0;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) h = std::max(h, norm(seg_end(a[i], a[i + 1]) - a[i]));
  for (std::size_t i = 0; i + 1 < b.size(); ++i) h = std::max(h, norm(seg_end(b[i], b[i + 1]) - b[i]));
  h = std::max(h, 1e-9);
  const long ncol = std::max(1L, long(std::floor(period / h)));
  const double cw = period / ncol;
  auto key = [](long x, long y) { return (static_cast<long long>(x) << 32) ^ (y & 0xffffffffLL); };
  std::unordered_map<long long, std::vector<std::size_t>> buckets;
  for (std::size_t j = 0; j + 1 < b.size(); ++j) {
    const Vec2 p = b[j], q = seg_end(b[j], b[j + 1]);
    const long x0 = long(std::floor(std::min(p.x, q.x) / cw)), x1 = long(std::floor(std::max(p.x, q.x) / cw));
    const long y0 = long(std::floor(std::min(p.y, q.y) / h)), y1 = long(std::floor(std::max(p.y, q.y) / h));
    for (long x = x0; x <= x1; ++x)
      for (long y = y0; y <= y1; ++y) buckets[key(((x % ncol) + ncol) % ncol, y)].push_back(j);
  }
  std::vector<long long> seen;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    const Vec2 p = a[i], q = seg_end(a[i], a[i + 1]);
    const long x0 = long(std::floor(std::min(p.x, q.x) / cw)), x1 = long(std::floor(std::max(p.x, q.x) / cw));
    const long y0 = long(std::floor(std::min(p.y, q.y) / h)), y1 = long(std::floor(std::max(p.y, q.y) / h));
    std::vector<std::size_t> cand;
    for (long x = x0; x <= x1; ++x)
      for (long y = y0; y <= y1; ++y) {
        auto it = buckets.find(key(((x % ncol) + ncol) % ncol, y));
        if (it != buckets.end()) cand.insert(cand.end(), it->second.begin(), it->second.end());
      }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    for (std::size_t j : cand) {
      Vec2 r0 = b[j];
      r0.x = p.x + periodic_diff(r0.x, p.x, period);
      const Vec2 r1 = seg_end(r0, b[j + 1]);
      auto hit = detail::segment_params(p, q, r0, r1);
      if (!hit) continue;
      // a crossing through a shared vertex belongs to the earlier segment only
      if ((hit->second.x == 1.0 && i + 2 < a.size()) || (hit->second.y == 1.0 && j + 2 < b.size())) continue;
      const Vec2 x = hit->first;
      if (exclude && std::hypot(periodic_diff(x.x, exclude->x, period), x.y - exclude->y) < exclude_radius) continue;
      const Vec2 u = q - p, v = r1 - r0;
      Crossing cr;
      cr.stable_segment = i;
      cr.unstable_segment = j;
      cr.point = {wrap(x.x, period), x.y};
      cr.angle = std::atan2(std::abs(cross(u, v)), std::abs(dot(u, v)));
      cr.transverse = cr.angle > kTransverseAngle;
      out.push_back(cr);
    }
  }
  return out;
}

// Crossings of one stable and one unstable branch of the same saddle.
inline std::vector<Crossing> homoclinic_intersections(const ManifoldBranch& stable, const ManifoldBranch& unstable,
                                                      double period) {
  const PhasePoint p = stable.polyline.front();
  return polyline_crossings(stable.points(), unstable.points(), period, Vec2{p.s, p.r}, 1e-6);
}

inline HorseshoeCertificate horseshoe_certificate(const std::vector<ManifoldBranch>& stable,
                                                  const std::vector<ManifoldBranch>& unstable, double period) {
  HorseshoeCertificate hc;
  for (const auto& s : stable)
    for (const auto& u : unstable) {
      auto cr = homoclinic_intersections(s, u, period);
      ++hc.pairs_checked;
      bool any = false;
      for (const auto& c : cr) {
        if (c.transverse) {
          any = true;
          hc.min_angle = std::min(hc.min_angle, c.angle);
        }
      }
      if (any) ++hc.pairs_with_transverse;
      hc.crossings.insert(hc.crossings.end(), cr.begin(), cr.end());
    }
  hc.passes = hc.pairs_checked == 4 && hc.pairs_with_transverse == 4;
  return hc;
}

// Largest distance from the growth-map image of a branch to the branch itself,
// over the points whose image parameter lies inside the traced range.
inline double branch_invariance_defect(const BoundaryCurve& c, const DissipationProfile& d, const ManifoldBranch& br,
                                       int stride = 1) {
  const double top = br.params.empty() ? 0.0 : br.params.back();
  std::vector<Vec2> imgs;
  for (std::size_t i = 1; i < br.polyline.size(); i += stride) {
    if (br.params[i] + 1.0 > top) break;
    PhasePoint p = br.polyline[i];
    bool ok = true;
    for (int k = 0; k < br.period && ok; ++k) {
      if (br.kind == BranchKind::Unstable) p = step_dissipative(c, d, p);
      else {
        try {
          p = step_inverse(c, d, p);
        } catch (const out_of_image&) {
          ok = false;
        }
      }
    }
    if (ok) imgs.push_back({wrap(p.s, c.perimeter), p.r});
  }
  if (imgs.empty()) return 0.0;
  return directed_hausdorff(imgs, br.points(), c.perimeter);
}

}  // namespace billiards
