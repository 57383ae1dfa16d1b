// Cell-grid outer approximation of the global attractor, the cell-level
// Birkhoff trim, cone fields, the graph transform and the induced circle map.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "billiard_core.hpp"
#include "common.hpp"
#include "geometry.hpp"

namespace billiards {

// Cells indexed (col, row); col covers s in [col P/C, (col+1) P/C), row covers
// r in [-1 + row 2/R, -1 + (row+1) 2/R).
struct AttractorGrid {
  int columns = 0;
  int rows = 0;
  double perimeter = 0.0;
  int iterations = 0;
  std::vector<std::uint8_t> occupied;
  std::vector<long> counts;  // occupied cells after each sweep

  AttractorGrid() = default;
  AttractorGrid(int C, int R, double P) : columns(C), rows(R), perimeter(P), occupied(std::size_t(C) * R, 0) {}

  double cell_ds() const { return perimeter / columns; }
  double cell_dr() const { return 2.0 / rows; }
  double cell_diagonal() const { return std::hypot(cell_ds(), cell_dr()); }
  double s_center(int col) const { return (col + 0.5) * cell_ds(); }
  double r_center(int row) const { return -1.0 + (row + 0.5) * cell_dr(); }
  std::size_t index(int col, int row) const { return std::size_t(row) * columns + col; }
  bool at(int col, int row) const { return occupied[index(col, row)] != 0; }
  void set(int col, int row, bool v = true) { occupied[index(col, row)] = v ? 1 : 0; }
  int wrap_col(int col) const { return ((col % columns) + columns) % columns; }
  int row_of(double r) const { return std::clamp(int(std::floor((r + 1.0) / cell_dr())), 0, rows - 1); }
  int col_of(double s) const { return std::clamp(int(std::floor(wrap(s, perimeter) / cell_ds())), 0, columns - 1); }
  long count() const { return std::accumulate(occupied.begin(), occupied.end(), 0L); }

  std::vector<Vec2> occupied_centers() const {
    std::vector<Vec2> pts;
    for (int row = 0; row < rows; ++row)
      for (int col = 0; col < columns; ++col)
        if (at(col, row)) pts.push_back({s_center(col), r_center(row)});
    return pts;
  }
};

struct GridOptions {
  int subdivision = 2;  // lattice points per cell side; 2 gives 3x3 samples per cell
  int threads = 1;
};

namespace detail {

// Marks every cell met by the convex hull of the given points (lifted s),
// grown by pad.x in s and pad.y in r.
inline void rasterize_hull(std::array<Vec2, 4> pts, AttractorGrid& g, std::vector<std::uint8_t>& out,
                           Vec2 pad = {0.0, 0.0}) {
  // monotone chain hull of 4 points
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::array<Vec2, 8> h;
  int k = 0;
  for (int i = 0; i < 4; ++i) {
    while (k >= 2 && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (int i = 2, t = k + 1; i >= 0; --i) {
    while (k >= t && cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  const int m = std::max(1, k - 1);
  const double dr = g.cell_dr(), ds = g.cell_ds();
  double ymin = h[0].y, ymax = h[0].y;
  for (int i = 0; i < m; ++i) {
    ymin = std::min(ymin, h[i].y);
    ymax = std::max(ymax, h[i].y);
  }
  const double hull_ymin = ymin, hull_ymax = ymax;
  ymin -= pad.y;
  ymax += pad.y;
  // touching a cell edge exactly does not count as entering the cell
  const double ey = 1e-9 * dr, ex = 1e-9 * ds;
  int row0 = std::max(0, int(std::floor((ymin + ey + 1.0) / dr)));
  int row1 = std::min(g.rows - 1, int(std::floor((ymax - ey + 1.0) / dr)));
  if (row1 < row0) row1 = row0 = std::clamp(int(std::floor((0.5 * (ymin + ymax) + 1.0) / dr)), 0, g.rows - 1);
  for (int row = row0; row <= row1; ++row) {
    const double y0 = std::max(-1.0 + row * dr - pad.y, hull_ymin), y1 = std::min(-1.0 + (row + 1) * dr + pad.y, hull_ymax);
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    for (int i = 0; i < m; ++i) {
      const Vec2 a = h[i];
      if (a.y >= y0 && a.y <= y1) {
        xmin = std::min(xmin, a.x);
        xmax = std::max(xmax, a.x);
      }
      if (m < 2) continue;
      const Vec2 b = h[(i + 1) % m];
      for (double yc : {y0, y1}) {
        if ((a.y - yc) * (b.y - yc) < 0) {
          const double x = a.x + (b.x - a.x) * (yc - a.y) / (b.y - a.y);
          xmin = std::min(xmin, x);
          xmax = std::max(xmax, x);
        }
      }
    }
    if (!(xmin <= xmax)) continue;
    xmin -= pad.x;
    xmax += pad.x;
    long c0 = long(std::floor((xmin + ex) / ds)), c1 = long(std::floor((xmax - ex) / ds));
    if (c1 < c0) c1 = c0;
    if (c1 - c0 >= g.columns) c1 = c0 + g.columns - 1;
    const std::size_t base = std::size_t(row) * g.columns;
    for (long c = c0; c <= c1; ++c) out[base + g.wrap_col(int(c % g.columns))] = 1;
  }
}

}  // namespace detail

// Images of a lattice refining the cell grid, computed on demand and cached.
class CellMapper {
 public:
  CellMapper(const BoundaryCurve& c, const DissipationProfile& d, int C, int R, GridOptions opt)
      : curve_(c), diss_(d), C_(C), R_(R), opt_(opt) {
    ns_ = C * opt.subdivision;
    nr_ = R * opt.subdivision + 1;
    img_s_.assign(std::size_t(ns_) * nr_, 0.0);
    img_r_.assign(std::size_t(ns_) * nr_, 0.0);
    done_.assign(std::size_t(ns_) * nr_, 0);
  }

  // Image of the occupied cells of src, rasterized into a fresh grid.
  AttractorGrid push(const AttractorGrid& src) {
    ensure(src);
    AttractorGrid out(C_, R_, src.perimeter);
    const int k = opt_.subdivision;
    const int T = std::max(1, opt_.threads);
    std::vector<std::vector<std::uint8_t>> bufs(T, std::vector<std::uint8_t>(out.occupied.size(), 0));
    parallel_for(long(R_), T, [&](long b, long e, int w) {
      for (long row = b; row < e; ++row)
        for (int col = 0; col < C_; ++col) {
          if (!src.at(col, int(row))) continue;
          const Vec2 pad = bulge(col, int(row));
          for (int a = 0; a < k; ++a)
            for (int bb = 0; bb < k; ++bb) {
              const int i0 = col * k + a, j0 = int(row) * k + bb;
              std::array<Vec2, 4> q = {image(i0, j0), image(i0 + 1, j0), image(i0 + 1, j0 + 1), image(i0, j0 + 1)};
              detail::rasterize_hull(q, out, bufs[w], pad);
            }
        }
    });
    for (int w = 0; w < T; ++w)
      for (std::size_t i = 0; i < out.occupied.size(); ++i) out.occupied[i] |= bufs[w][i];
    return out;
  }

  long evaluations() const { return evaluations_; }

 private:
  std::size_t lat(int i, int j) const { return std::size_t(j) * ns_ + i; }

  // The straight-edged hulls miss the curvature of the true image; a parabola
  // through three lattice images leaves its chord by (second difference)/8.
  Vec2 bulge(int col, int row) const {
    const int k = opt_.subdivision;
    if (k < 2) return {0.0, 0.0};
    double ds = 0.0, dr = 0.0;
    for (int a = 0; a <= k; ++a)
      for (int b = 1; b < k; ++b) {
        const int i = col * k, j = row * k;
        for (const auto& [p, q, r] : {std::array{image(i + b - 1, j + a), image(i + b, j + a), image(i + b + 1, j + a)},
                                      std::array{image(i + a, j + b - 1), image(i + a, j + b), image(i + a, j + b + 1)}}) {
          ds = std::max(ds, std::abs(p.x - 2 * q.x + r.x));
          dr = std::max(dr, std::abs(p.y - 2 * q.y + r.y));
        }
      }
    return {0.125 * ds, 0.125 * dr};
  }

  Vec2 image(int i, int j) const {
    const int iw = i % ns_;
    const double shift = (i >= ns_) ? curve_.perimeter : 0.0;
    const std::size_t id = lat(iw, j);
    return {img_s_[id] + shift, img_r_[id]};
  }

  void ensure(const AttractorGrid& src) {
    const int k = opt_.subdivision;
    std::vector<std::uint8_t> need(done_.size(), 0);
    for (int row = 0; row < R_; ++row)
      for (int col = 0; col < C_; ++col) {
        if (!src.at(col, row)) continue;
        for (int a = 0; a <= k; ++a)
          for (int b = 0; b <= k; ++b) {
            const std::size_t id = lat((col * k + a) % ns_, row * k + b);
            if (!done_[id]) need[id] = 1;
          }
      }
    std::vector<std::size_t> todo;
    for (std::size_t id = 0; id < need.size(); ++id)
      if (need[id]) todo.push_back(id);
    const double hs = curve_.perimeter / ns_, hr = 2.0 / (nr_ - 1);
    parallel_for(long(todo.size()), std::max(1, opt_.threads), [&](long b, long e, int) {
      for (long t = b; t < e; ++t) {
        const std::size_t id = todo[t];
        const int i = int(id % ns_), j = int(id / ns_);
        const double s = i * hs, r = std::clamp(-1.0 + j * hr, -1.0, 1.0);
        Step st = step_dissipative_ex(curve_, diss_, {s, r});
        img_s_[id] = s + st.ds;
        img_r_[id] = st.p.r;
        done_[id] = 1;
      }
    });
    evaluations_ += long(todo.size());
  }

  const BoundaryCurve& curve_;
  const DissipationProfile& diss_;
  int C_, R_;
  GridOptions opt_;
  int ns_ = 0, nr_ = 0;
  std::vector<double> img_s_, img_r_;
  std::vector<std::uint8_t> done_;
  long evaluations_ = 0;
};

// n sweeps of occ <- raster(f(occ)) intersected with occ, from the full annulus.
inline AttractorGrid iterate_annulus(const BoundaryCurve& c, const DissipationProfile& d, int C, int R, int n,
                                     GridOptions opt = {}) {
  if (C < 128 || R < 128) throw invalid_input("attractor grid: need at least 128 columns and rows");
  if (n < 1) throw invalid_input("attractor grid: need at least one sweep");
  if (opt.subdivision < 1) throw invalid_input("attractor grid: subdivision must be >= 1");
  AttractorGrid g(C, R, c.perimeter);
  std::fill(g.occupied.begin(), g.occupied.end(), 1);
  CellMapper mapper(c, d, C, R, opt);
  for (int it = 0; it < n; ++it) {
    AttractorGrid next = mapper.push(g);
    for (std::size_t i = 0; i < g.occupied.size(); ++i) g.occupied[i] &= next.occupied[i];
    g.iterations = it + 1;
    g.counts.push_back(g.count());
  }
  return g;
}

// Complement components reached from the bottom (U) and top (V) rows through
// 4-connected free cells, s periodic.
struct ComplementLabels {
  std::vector<std::uint8_t> label;  // 0 occupied or unreached, 1 U, 2 V, 3 both
  bool separates = false;
  long u_cells = 0, v_cells = 0;
};

inline ComplementLabels complement_components(const AttractorGrid& g) {
  ComplementLabels cl;
  cl.label.assign(g.occupied.size(), 0);
  auto fill = [&](int start_row, std::uint8_t bit) {
    std::deque<std::pair<int, int>> q;
    for (int col = 0; col < g.columns; ++col)
      if (!g.at(col, start_row)) {
        cl.label[g.index(col, start_row)] |= bit;
        q.push_back({col, start_row});
      }
    while (!q.empty()) {
      auto [col, row] = q.front();
      q.pop_front();
      const int nb[4][2] = {{col + 1, row}, {col - 1, row}, {col, row + 1}, {col, row - 1}};
      for (auto& e : nb) {
        if (e[1] < 0 || e[1] >= g.rows) continue;
        const int cc = g.wrap_col(e[0]);
        const std::size_t id = g.index(cc, e[1]);
        if (g.occupied[id] || (cl.label[id] & bit)) continue;
        cl.label[id] |= bit;
        q.push_back({cc, e[1]});
      }
    }
  };
  fill(0, 1);
  fill(g.rows - 1, 2);
  cl.separates = true;
  for (auto v : cl.label) {
    if (v == 3) cl.separates = false;
    if (v & 1) ++cl.u_cells;
    if (v & 2) ++cl.v_cells;
  }
  return cl;
}

namespace detail {

// Morphological opening with the 3x3 square (s periodic, outside rows empty).
inline std::vector<std::uint8_t> opening3(const AttractorGrid& g) {
  auto pass = [&](const std::vector<std::uint8_t>& in, bool erode) {
    std::vector<std::uint8_t> out(in.size(), 0);
    for (int row = 0; row < g.rows; ++row)
      for (int col = 0; col < g.columns; ++col) {
        bool all = true, any = false;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = row + dr;
            const bool v = rr >= 0 && rr < g.rows && in[g.index(g.wrap_col(col + dc), rr)];
            all = all && v;
            any = any || v;
          }
        out[g.index(col, row)] = erode ? all : any;
      }
    return out;
  };
  return pass(pass(g.occupied, true), false);
}

}  // namespace detail

// Removes hairs: thin occupied cells (not covered by a 3x3 opening of the set)
// whose `reach`-neighborhood (8-metric) sees only one of the two complement
// components. Free cells reached by neither flood fill are channels pinched
// shut by the grid and count for both sides; the lines below and above the
// grid count as U and V.
inline AttractorGrid birkhoff_trim(const AttractorGrid& g, int reach = 3) {
  ComplementLabels cl = complement_components(g);
  if (!cl.separates) throw invalid_input("trim: occupied set does not separate the annulus");
  const auto bulk = detail::opening3(g);
  AttractorGrid out = g;
  for (int row = 0; row < g.rows; ++row)
    for (int col = 0; col < g.columns; ++col) {
      if (!g.at(col, row) || bulk[g.index(col, row)]) continue;
      std::uint8_t seen = 0;
      for (int dr = -reach; dr <= reach; ++dr)
        for (int dc = -reach; dc <= reach; ++dc) {
          const int rr = row + dr;
          if (rr < 0) {
            seen |= 1;
            continue;
          }
          if (rr >= g.rows) {
            seen |= 2;
            continue;
          }
          const std::size_t id = g.index(g.wrap_col(col + dc), rr);
          if (g.occupied[id]) continue;
          seen |= cl.label[id] ? cl.label[id] : std::uint8_t(3);
        }
      out.set(col, row, seen != 1 && seen != 2);
    }
  return out;
}

// 8-connectivity of the occupied set (s periodic).
inline bool occupied_connected(const AttractorGrid& g) {
  std::vector<std::uint8_t> seen(g.occupied.size(), 0);
  long total = g.count(), reached = 0;
  if (total == 0) return true;
  std::size_t start = 0;
  while (!g.occupied[start]) ++start;
  std::deque<std::size_t> q{start};
  seen[start] = 1;
  while (!q.empty()) {
    const std::size_t id = q.front();
    q.pop_front();
    ++reached;
    const int col = int(id % g.columns), row = int(id / g.columns);
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = row + dr;
        if (rr < 0 || rr >= g.rows) continue;
        const std::size_t n = g.index(g.wrap_col(col + dc), rr);
        if (g.occupied[n] && !seen[n]) {
          seen[n] = 1;
          q.push_back(n);
        }
      }
  }
  return reached == total;
}

enum class GraphVerdictKind { Graph, Fold, Inconclusive };

inline const char* to_string(GraphVerdictKind k) {
  switch (k) {
    case GraphVerdictKind::Graph: return "Graph";
    case GraphVerdictKind::Fold: return "Fold";
    default: return "Inconclusive";
  }
}

struct GraphVerdict {
  GraphVerdictKind kind = GraphVerdictKind::Inconclusive;
  std::vector<int> fold_columns;
  int max_run_height = 0;
  int max_runs = 0;
};

inline GraphVerdict graph_test(const AttractorGrid& g, int max_height = 3, int min_gap = 2) {
  GraphVerdict v;
  bool all_graph = true;
  for (int col = 0; col < g.columns; ++col) {
    int runs = 0, run_len = 0, gap = 0, last_end = -1;
    bool fold = false;
    for (int row = 0; row <= g.rows; ++row) {
      const bool occ = row < g.rows && g.at(col, row);
      if (occ) {
        if (run_len == 0) {
          if (last_end >= 0) {
            gap = row - last_end - 1;
            if (gap >= min_gap) fold = true;
          }
          ++runs;
        }
        ++run_len;
      } else if (run_len > 0) {
        v.max_run_height = std::max(v.max_run_height, run_len);
        if (run_len > max_height) all_graph = false;
        last_end = row - 1;
        run_len = 0;
      }
    }
    v.max_runs = std::max(v.max_runs, runs);
    if (runs != 1) all_graph = false;
    if (fold) v.fold_columns.push_back(col);
  }
  if (!v.fold_columns.empty()) v.kind = GraphVerdictKind::Fold;
  else if (all_graph) v.kind = GraphVerdictKind::Graph;
  else v.kind = GraphVerdictKind::Inconclusive;
  return v;
}

// ---------------------------------------------------------------- cone fields

struct ConeField {
  double alpha0 = 0.0;
  double c0 = 0.0;
  double delta0 = 0.0;
  double K0 = 0.0;
  double mu0 = 0.5;
  double lambda1 = 0.0;
  double lambda_max_certified = 0.0;
};

inline ConeField make_cone_field(const BoundaryCurve& c, const DkCertificate& cert, double mu0 = 0.5,
                                 int n_s = 256) {
  if (!cert.passes) throw invalid_input("cone field: table is not pinched");
  ConeField cf;
  cf.c0 = 0.5 * cert.margin;
  cf.delta0 = 1.05 * diameter(c);
  cf.K0 = 1.01 * c.max_abs_curvature;
  cf.mu0 = mu0;
  cf.alpha0 = cf.c0 / (2.0 * cf.delta0);
  auto ok_level = [&](double r) {
    for (int i = 0; i < n_s; ++i) {
      const double s = c.perimeter * i / n_s;
      for (double rr : {r, -r}) {
        const double nu = nu_of(rr);
        const double tau = chord_r(c, s, rr).tau;
        if (!(tau * c.curvature(s) + nu < -cf.c0) || !(tau / nu < cf.delta0)) return false;
      }
    }
    return true;
  };
  double lo = 0.0, hi = 0.999;
  if (ok_level(hi)) lo = hi;
  else
    for (int it = 0; it < 30; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (ok_level(mid)) lo = mid;
      else hi = mid;
    }
  cf.lambda1 = lo;
  const double a = cf.alpha0, K = cf.K0, dl = cf.delta0;
  const double bound = mu0 * a * cf.c0 / (2.0 * (dl * K * K + 2.0 * K) + 2.0 * a * (dl * K + 1.0));
  cf.lambda_max_certified = std::min(cf.lambda1, bound);
  return cf;
}

struct ConeCheckReport {
  double min_margin = std::numeric_limits<double>::infinity();
  long failures = 0;
  long samples = 0;
  bool passes = false;
  double lambda_certified = 0.0;
  std::vector<PhasePoint> failure_points;  // first few
};

inline ConeCheckReport cone_contraction_check(const BoundaryCurve& c, const DissipationProfile& d,
                                              const ConeField& cone, int n_s = 256, int n_r = 65) {
  ConeCheckReport rep;
  rep.lambda_certified = cone.lambda_max_certified;
  const double lam = d.sup_value;
  for (int i = 0; i < n_s; ++i) {
    const double s = c.perimeter * i / n_s;
    for (int j = 0; j < n_r; ++j) {
      const double r = -lam + 2.0 * lam * j / (n_r - 1);
      Step st = step_dissipative_ex(c, d, {s, r});
      const Mat2 J = jacobian_from_step(d, st);
      const double nu_img = nu_of(st.p.r);
      for (double sgn : {1.0, -1.0}) {
        const Vec2 u{1.0, sgn * cone.alpha0 * nu_of(r)};
        const Vec2 w = J * u;
        const double denom = cone.alpha0 * nu_img * std::abs(w.x);
        const double margin = denom > 0 ? 1.0 - std::abs(w.y) / denom : -std::numeric_limits<double>::infinity();
        ++rep.samples;
        rep.min_margin = std::min(rep.min_margin, margin);
        if (!(margin > 0)) {
          ++rep.failures;
          if (rep.failure_points.size() < 16) rep.failure_points.push_back({s, r});
        }
      }
    }
  }
  rep.passes = rep.failures == 0;
  return rep;
}

// Slope of the pushed-forward cone direction after n steps along the orbit of p.
inline double center_direction_slope(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint p, int n,
                                     double initial_slope = 0.1) {
  Vec2 u{1.0, initial_slope};
  for (int k = 0; k < n; ++k) {
    Step st = step_dissipative_ex(c, d, p);
    u = jacobian_from_step(d, st) * u;
    u = (1.0 / norm(u)) * u;
    p = st.p;
  }
  return u.y / u.x;
}

// ---------------------------------------------------------------- graphs

struct CurveGraph {
  double perimeter = 0.0;
  std::vector<double> values;  // gamma(s_i), s_i = i P / M
  std::vector<double> slopes;  // gamma'(s_i)
  double cone_bound = 0.0;     // max |gamma'| / nu(gamma)

  int size() const { return int(values.size()); }
  double spacing() const { return perimeter / values.size(); }
  double s_at(int i) const { return i * spacing(); }

  void update_cone_bound() {
    cone_bound = 0.0;
    for (int i = 0; i < size(); ++i) cone_bound = std::max(cone_bound, std::abs(slopes[i]) / nu_of(values[i]));
  }

  double value(double s) const {
    double y, dy;
    eval(s, y, dy);
    return y;
  }
  double slope(double s) const {
    double y, dy;
    eval(s, y, dy);
    return dy;
  }
  void eval(double s, double& y, double& dy) const {
    const int M = size();
    const double h = spacing();
    double t = wrap(s, perimeter) / h;
    int i = std::min(int(t), M - 1);
    const double u = t - i;
    const int j = (i + 1) % M;
    hermite(values[i], values[j], h * slopes[i], h * slopes[j], u, y, dy);
    dy /= h;
  }

  static void hermite(double y0, double y1, double m0, double m1, double u, double& y, double& dy) {
    const double u2 = u * u, u3 = u2 * u;
    y = (2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * y1 + (u3 - u2) * m1;
    dy = (6 * u2 - 6 * u) * y0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * y1 + (3 * u2 - 2 * u) * m1;
  }

  static CurveGraph constant(double P, int M, double v) {
    CurveGraph g;
    g.perimeter = P;
    g.values.assign(M, v);
    g.slopes.assign(M, 0.0);
    return g;
  }
};

// f(graph(gamma)) as a graph over the same grid; throws if the image folds.
inline CurveGraph push_graph(const BoundaryCurve& c, const DissipationProfile& d, const CurveGraph& g,
                             int threads = 1) {
  const int M = g.size();
  const double P = c.perimeter;
  std::vector<double> sx(M), ry(M), sl(M);
  std::atomic<bool> folded{false};
  parallel_for(long(M), threads, [&](long b, long e, int) {
    for (long i = b; i < e; ++i) {
      const double s = g.s_at(int(i));
      Step st = step_dissipative_ex(c, d, {s, g.values[i]});
      const Vec2 w = jacobian_from_step(d, st) * Vec2{1.0, g.slopes[i]};
      if (!(w.x > 0)) folded = true;
      sx[i] = s + st.ds;
      ry[i] = st.p.r;
      sl[i] = w.y / w.x;
    }
  });
  for (int i = 0; i + 1 < M; ++i)
    if (!(sx[i + 1] > sx[i])) folded = true;
  if (!(sx[M - 1] < sx[0] + P)) folded = true;
  if (folded) throw non_convergence("graph transform: image is no longer a graph over the circle");
  // extended periodic sequence starting at sx[0]
  std::vector<double> X(sx), Y(ry), S(sl);
  X.push_back(sx[0] + P);
  Y.push_back(ry[0]);
  S.push_back(sl[0]);
  CurveGraph out;
  out.perimeter = P;
  out.values.resize(M);
  out.slopes.resize(M);
  for (int j = 0; j < M; ++j) {
    double t = g.s_at(j);
    t = X[0] + wrap(t - X[0], P);
    int k = int(std::upper_bound(X.begin(), X.end(), t) - X.begin()) - 1;
    k = std::clamp(k, 0, M - 1);
    const double h = X[k + 1] - X[k];
    const double u = (t - X[k]) / h;
    double y, dy;
    CurveGraph::hermite(Y[k], Y[k + 1], h * S[k], h * S[k + 1], u, y, dy);
    out.values[j] = y;
    out.slopes[j] = dy / h;
  }
  out.update_cone_bound();
  return out;
}

struct GraphTransformResult {
  std::vector<CurveGraph> upper, lower;
  std::vector<double> distances;  // sup |gamma+_n - gamma-_n|
  bool converged = false;
  double fitted_ratio = 0.0;
  CurveGraph limit;
};

inline double sup_distance(const CurveGraph& a, const CurveGraph& b) {
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

// Least-squares geometric rate of a positive sequence.
inline double fitted_decay_ratio(const std::vector<double>& d, double floor_value = 1e-13) {
  std::vector<double> xs, ys;
  for (std::size_t n = 1; n < d.size(); ++n)
    if (d[n] > floor_value) {
      xs.push_back(double(n));
      ys.push_back(std::log(d[n]));
    }
  if (xs.size() < 2) {
    if (d.size() >= 2 && d[0] > 0 && d[1] > 0) return d[1] / d[0];
    return 0.0;
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return std::exp(sxy / sxx);
}

struct GraphTransformOptions {
  int samples = 1024;
  int max_iterations = 60;
  double tolerance = 1e-10;
  int threads = 1;
};

inline GraphTransformResult graph_transform(const BoundaryCurve& c, const DissipationProfile& d,
                                            GraphTransformOptions opt = {}) {
  if (!check_pinched(c).passes) throw invalid_input("graph transform: table is not pinched");
  const double lam = d.sup_value;
  GraphTransformResult res;
  CurveGraph up = CurveGraph::constant(c.perimeter, opt.samples, lam);
  CurveGraph lo = CurveGraph::constant(c.perimeter, opt.samples, -lam);
  res.upper.push_back(up);
  res.lower.push_back(lo);
  res.distances.push_back(sup_distance(up, lo));
  for (int n = 0; n < opt.max_iterations; ++n) {
    up = push_graph(c, d, up, opt.threads);
    lo = push_graph(c, d, lo, opt.threads);
    res.upper.push_back(up);
    res.lower.push_back(lo);
    res.distances.push_back(sup_distance(up, lo));
    if (res.distances.back() < opt.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.fitted_ratio = fitted_decay_ratio(res.distances);
  res.limit = up;
  return res;
}

// ---------------------------------------------------------------- circle map

struct CircleMapOptions {
  int iterates = 10000;
  int starts = 16;
  int transient = 1000;
  int max_period = 64;
  int samples = 0;  // 0: graph resolution
};

struct CircleMapSample {
  std::vector<double> s;
  std::vector<double> g_values;  // lifted
  std::vector<double> g_prime;   // multiplier formula
  bool injective = false;
  double rotation_number = 0.0;
  std::vector<double> per_start;
  double spread = 0.0;
  bool mode_locking_unresolved = false;
  std::optional<std::pair<int, int>> rational;  // p/q from a detected periodic orbit
  double invariance_error = 0.0;
};

inline double circle_map_lift(const BoundaryCurve& c, const DissipationProfile& d, const CurveGraph& g, double s) {
  Step st = step_dissipative_ex(c, d, {s, g.value(s)});
  return s + st.ds;
}

// g0'(s) = -(tau(s, 0) K(s) + 1)
inline double g0_prime(const BoundaryCurve& c, double s) { return -(chord_r(c, s, 0.0).tau * c.curvature(s) + 1.0); }

inline CircleMapSample induced_circle_map(const BoundaryCurve& c, const DissipationProfile& d, const CurveGraph& g,
                                          CircleMapOptions opt = {}) {
  CircleMapSample out;
  const double P = c.perimeter;
  CurveGraph img = push_graph(c, d, g);
  out.invariance_error = sup_distance(img, g);
  if (!(out.invariance_error < 1e-6)) throw invalid_input("circle map: graph is not invariant within 1e-6");
  const int M = opt.samples > 0 ? opt.samples : g.size();
  out.injective = true;
  for (int i = 0; i < M; ++i) {
    const double s = P * i / M;
    double y, dy;
    g.eval(s, y, dy);
    Step st = step_dissipative_ex(c, d, {s, y});
    const Mat2 J = conservative_jacobian(factors_of(st));
    out.s.push_back(s);
    out.g_values.push_back(s + st.ds);
    out.g_prime.push_back(J.a + J.b * dy);
    if (i > 0 && !(out.g_values[i] > out.g_values[i - 1])) out.injective = false;
  }
  if (!(out.g_values.back() < out.g_values.front() + P)) out.injective = false;
  auto G = [&](double s) { return circle_map_lift(c, d, g, s); };
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int k = 0; k < opt.starts; ++k) {
    double x = P * (k + 0.5) / opt.starts;
    for (int t = 0; t < opt.transient; ++t) x = G(x);
    const double x0 = x;
    for (int t = 0; t < opt.iterates; ++t) x = G(x);
    const double rho = (x - x0) / (double(opt.iterates) * P);
    out.per_start.push_back(rho);
    lo = std::min(lo, rho);
    hi = std::max(hi, rho);
    if (k == 0) {
      for (int q = 1; q <= opt.max_period && !out.rational; ++q) {
        double y = x;
        for (int t = 0; t < q; ++t) y = G(y);
        const double disp = (y - x) / P;
        const double p = std::round(disp);
        if (std::abs(disp - p) < 1e-9) {
          int pi = int(p), qi = q;
          int gcd = std::gcd(std::abs(pi), qi);
          out.rational = std::pair{pi / gcd, qi / gcd};
        }
      }
    }
  }
  out.spread = hi - lo;
  out.rotation_number = 0.5 * (lo + hi);
  out.mode_locking_unresolved = out.spread > 1e-6;
  return out;
}

struct PeriodTwoPoint {
  double s = 0.0;
  double multiplier = 0.0;  // (g^2)'(s)
  bool attracting = false;
};

// Zeros of g^2(s) - s - P on a fine grid, located by bisection.
inline std::vector<PeriodTwoPoint> period_two_points(const BoundaryCurve& c, const DissipationProfile& d,
                                                     const CurveGraph& g, int n_grid = 2048) {
  const double P = c.perimeter;
  auto G2 = [&](double s) { return circle_map_lift(c, d, g, circle_map_lift(c, d, g, s)); };
  auto F = [&](double s) { return G2(s) - s - P; };
  std::vector<PeriodTwoPoint> pts;
  double a = 0.0, fa = F(a);
  for (int i = 1; i <= n_grid; ++i) {
    const double b = P * i / n_grid, fb = F(b);
    if ((fa < 0) != (fb < 0)) {
      double l = a, h = b, fl = fa;
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (l + h), fm = F(m);
        if ((fm < 0) == (fl < 0)) {
          l = m;
          fl = fm;
        } else {
          h = m;
        }
      }
      const double s = 0.5 * (l + h);
      const double eps = 1e-6 * P;
      PeriodTwoPoint pt;
      pt.s = s;
      pt.multiplier = (G2(s + eps) - G2(s - eps)) / (2 * eps);
      pt.attracting = std::abs(pt.multiplier) < 1.0;
      pts.push_back(pt);
    }
    a = b;
    fa = fb;
  }
  return pts;
}

}  // namespace billiards
