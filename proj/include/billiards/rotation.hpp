// Radially accessible parts of the attractor, upper/lower rotation numbers and
// lambda sweeps.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "attractor.hpp"
#include "billiard_core.hpp"
#include "common.hpp"
#include "geometry.hpp"
#include "manifolds.hpp"
#include "orbit_analysis.hpp"

namespace billiards {

struct AccessibleSets {
  int columns = 0, rows = 0;
  double perimeter = 0.0;
  std::vector<int> upper_row;  // topmost occupied row per column, -1 if the column is empty
  std::vector<int> lower_row;  // bottommost occupied row per column
  std::vector<int> crossings;  // occupied runs met by the vertical through the column
  std::vector<double> upper_strand, lower_strand;  // r of the outermost strand, see accessible_sets
  std::vector<int> upper_run_far, lower_run_far;   // inner end of the outermost run

  double cell_ds() const { return perimeter / columns; }
  double cell_dr() const { return 2.0 / rows; }
  double s_center(int col) const { return (col + 0.5) * cell_ds(); }
  double row_center(int row) const { return -1.0 + (row + 0.5) * cell_dr(); }
  double mu_plus(int col) const { return row_center(upper_row[col]); }
  double mu_minus(int col) const { return row_center(lower_row[col]); }
  double strand_plus(int col) const { return upper_strand[col]; }
  double strand_minus(int col) const { return lower_strand[col]; }
  bool has(int col) const { return upper_row[col] >= 0; }
  // strand value at s, linear between column centers over non-empty columns
  double envelope(bool upper, double s) const {
    const double x = wrap(s, perimeter) / cell_ds() - 0.5;
    int c0 = int(std::floor(x));
    const double u = x - c0;
    auto val = [&](int c) {
      c = ((c % columns) + columns) % columns;
      for (int k = 0; k < columns; ++k) {
        const int cc = (c + k) % columns;
        if (has(cc)) return upper ? strand_plus(cc) : strand_minus(cc);
      }
      return 0.0;
    };
    return (1.0 - u) * val(c0) + u * val(c0 + 1);
  }
  int max_gap_cells() const {
    int m = 0;
    for (int c = 0; c < columns; ++c)
      if (has(c)) m = std::max(m, upper_row[c] - lower_row[c]);
    return m;
  }
};

inline AccessibleSets accessible_sets(const AttractorGrid& trimmed, int thin_run = 3) {
  ComplementLabels cl = complement_components(trimmed);
  if (!cl.separates) throw invalid_input("accessible sets: grid does not separate the annulus");
  AccessibleSets a;
  a.columns = trimmed.columns;
  a.rows = trimmed.rows;
  a.perimeter = trimmed.perimeter;
  a.upper_row.assign(a.columns, -1);
  a.lower_row.assign(a.columns, -1);
  a.crossings.assign(a.columns, 0);
  a.upper_strand.assign(a.columns, 0.0);
  a.lower_strand.assign(a.columns, 0.0);
  a.upper_run_far.assign(a.columns, -1);
  a.lower_run_far.assign(a.columns, -1);
  for (int col = 0; col < a.columns; ++col) {
    for (int row = trimmed.rows - 1; row >= 0; --row) {
      if (trimmed.at(col, row)) {
        a.upper_row[col] = row;
        break;
      }
      if (!(cl.label[trimmed.index(col, row)] & 2)) break;  // vertical leaves V before meeting the set
    }
    for (int row = 0; row < trimmed.rows; ++row) {
      if (trimmed.at(col, row)) {
        a.lower_row[col] = row;
        break;
      }
      if (!(cl.label[trimmed.index(col, row)] & 1)) break;
    }
    if (a.upper_row[col] < 0 || a.lower_row[col] < 0) a.upper_row[col] = a.lower_row[col] = -1;
    a.upper_strand[col] = a.lower_strand[col] = 0.0;
    if (a.upper_row[col] >= 0) {
      // a run of at most thin_run cells is a rasterized strand: take its middle
      // rather than the outermost cell center, which is off by the halo
      int lo = a.upper_row[col], hi = a.lower_row[col];
      while (lo > 0 && trimmed.at(col, lo - 1)) --lo;
      while (hi + 1 < trimmed.rows && trimmed.at(col, hi + 1)) ++hi;
      a.upper_run_far[col] = lo;
      a.lower_run_far[col] = hi;
      const int top_h = a.upper_row[col] - lo + 1, bot_h = hi - a.lower_row[col] + 1;
      a.upper_strand[col] = top_h <= thin_run ? 0.5 * (a.row_center(lo) + a.row_center(a.upper_row[col]))
                                          : a.row_center(a.upper_row[col]);
      a.lower_strand[col] = bot_h <= thin_run ? 0.5 * (a.row_center(hi) + a.row_center(a.lower_row[col]))
                                          : a.row_center(a.lower_row[col]);
    }
    bool in = false;
    for (int row = 0; row < trimmed.rows; ++row) {
      const bool occ = trimmed.at(col, row);
      if (occ && !in) ++a.crossings[col];
      in = occ;
    }
  }
  return a;
}

// One-sided Lipschitz audit of the envelopes: for adjacent columns s < s',
// mu(s') - mu(s) <= (s' - s) cot(beta) + one cell height (quantization).
struct LipschitzReport {
  double cot_beta = 0.0;
  double allowance = 0.0;
  double max_excess_plus = -std::numeric_limits<double>::infinity();
  double max_excess_minus = -std::numeric_limits<double>::infinity();
  long pairs = 0;
  long violations = 0;
  bool passes = false;
};

inline LipschitzReport envelope_lipschitz(const AccessibleSets& a, double beta) {
  LipschitzReport rep;
  rep.cot_beta = 1.0 / std::tan(beta);
  rep.allowance = a.cell_dr();
  const double ds = a.cell_ds();
  for (int col = 0; col < a.columns; ++col) {
    const int nxt = (col + 1) % a.columns;
    if (!a.has(col) || !a.has(nxt)) continue;
    const double bound = ds * rep.cot_beta + rep.allowance;
    const double ep = (a.mu_plus(nxt) - a.mu_plus(col)) - bound;
    const double em = (a.mu_minus(nxt) - a.mu_minus(col)) - bound;
    rep.max_excess_plus = std::max(rep.max_excess_plus, ep);
    rep.max_excess_minus = std::max(rep.max_excess_minus, em);
    ++rep.pairs;
    if (ep > 1e-12 || em > 1e-12) ++rep.violations;
  }
  rep.passes = rep.pairs > 0 && rep.violations == 0;
  return rep;
}

enum class RotationMode {
  Envelope,       // f^{-1} followed by projection back onto the envelope graph
  DirectInverse,  // f^{-1} iterated from the accessible cells, re-seeding on escape
  Forward
};

inline const char* to_string(RotationMode m) {
  switch (m) {
    case RotationMode::Envelope: return "backward-envelope";
    case RotationMode::DirectInverse: return "backward-direct";
    default: return "forward";
  }
}

struct RotationOptions {
  long iterations = 10000;
  long transient = 1000;
  int seeds = 16;
  std::uint64_t rng_seed = 1;
  RotationMode mode = RotationMode::Envelope;
  double accept_spread = 5e-3;
  int threads = 1;
};

struct RotationEstimate {
  double rho_plus = 0.0, rho_minus = 0.0;
  long n_iterations = 0;
  std::vector<double> per_start_plus, per_start_minus;
  double spread_plus = 0.0, spread_minus = 0.0;
  RotationMode direction = RotationMode::Envelope;
  bool contains_half = false;
  bool available = false;
  bool accepted = false;
  int reseeded = 0;
  std::vector<std::string> log;

  double width() const { return rho_plus - rho_minus; }
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0, comp = 0.0;  // Kahan
  for (double x : v) {
    const double y = x - comp, t = s + y;
    comp = (t - s) - y;
    s = t;
  }
  return v.empty() ? 0.0 : s / double(v.size());
}

inline double spread_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

// Average lifted displacement per step over the last n of transient + n forward steps.
inline double forward_rate(const BoundaryCurve& c, const DissipationProfile& d, PhasePoint p, long transient, long n) {
  for (long k = 0; k < transient; ++k) p = step_dissipative(c, d, p);
  double total = 0.0, comp = 0.0;
  for (long k = 0; k < n; ++k) {
    Step st = step_dissipative_ex(c, d, p);
    const double y = st.ds - comp, t = total + y;
    comp = (t - total) - y;
    total = t;
    p = st.p;
  }
  return total / (double(n) * c.perimeter);
}

}  // namespace detail

inline RotationEstimate rotation_numbers(const BoundaryCurve& c, const DissipationProfile& d, const AccessibleSets& a,
                                         RotationOptions opt = {}) {
  if (opt.iterations < 1000) throw invalid_input("rotation numbers: need at least 1000 iterations");
  std::vector<int> cols;
  for (int col = 0; col < a.columns; ++col)
    if (a.has(col)) cols.push_back(col);
  if (cols.empty()) throw invalid_input("rotation numbers: accessible sets are empty");
  RotationEstimate est;
  est.direction = opt.mode;
  est.n_iterations = opt.iterations;
  std::mt19937_64 rng(opt.rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, cols.size() - 1);
  std::vector<int> chosen(opt.seeds);
  for (auto& cc : chosen) cc = cols[pick(rng)];

  const double P = c.perimeter;
  auto run_side = [&](bool upper, std::vector<double>& out) {
    out.assign(opt.seeds, std::numeric_limits<double>::quiet_NaN());
    std::vector<int> reseeds(opt.seeds, 0);
    parallel_for(opt.seeds, opt.threads, [&](long b, long e, int) {
      for (long k = b; k < e; ++k) {
        const int col = chosen[k];
        const double s = a.s_center(col);
        if (opt.mode == RotationMode::Envelope) {
          // backward circle map on the envelope graph
          double x = s, lifted = 0.0;
          bool failed = false;
          for (long t = 0; t < opt.transient + opt.iterations && !failed; ++t) {
            PhasePoint p{wrap(x, P), a.envelope(upper, x)};
            InverseStep st;
            try {
              st = step_inverse_ex(c, d, p);
            } catch (const out_of_image&) {
              // envelope sits above the image annulus at this column; pull it inside
              try {
                st = step_inverse_ex(c, d, {p.s, 0.999999 * d.sup_value * (p.r < 0 ? -1.0 : 1.0)});
                ++reseeds[k];
              } catch (const out_of_image&) {
                failed = true;
                break;
              }
            }
            if (t >= opt.transient) lifted += st.ds;
            x = p.s + st.ds;
          }
          if (!failed) out[k] = -lifted / (double(opt.iterations) * P);
        } else if (opt.mode == RotationMode::Forward) {
          out[k] = detail::forward_rate(c, d, {s, upper ? a.strand_plus(col) : a.strand_minus(col)}, 0, opt.iterations);
        } else {
          // direct backward iteration; restart from another accessible column on escape
          int attempt = 0;
          int cc = col;
          while (attempt < 8) {
            PhasePoint p{a.s_center(cc), upper ? a.strand_plus(cc) : a.strand_minus(cc)};
            double total = 0.0;
            bool escaped = false;
            for (long t = 0; t < opt.iterations; ++t) {
              try {
                InverseStep st = step_inverse_ex(c, d, p);
                total += st.ds;
                p = st.p;
              } catch (const out_of_image&) {
                escaped = true;
                break;
              }
            }
            if (!escaped) {
              // backward displacement is negative; report the forward-sense rate
              out[k] = -total / (double(opt.iterations) * P);
              break;
            }
            ++attempt;
            ++reseeds[k];
            cc = cols[(std::size_t(cc) * 2654435761u + attempt) % cols.size()];
          }
        }
      }
    });
    for (int r : reseeds) est.reseeded += r;
    std::vector<double> ok;
    for (double v : out)
      if (std::isfinite(v)) ok.push_back(v);
    out = ok;
  };
  run_side(true, est.per_start_plus);
  run_side(false, est.per_start_minus);
  if (est.reseeded > 0) est.log.push_back("re-seeded or clamped " + std::to_string(est.reseeded) + " backward steps");
  est.available = !est.per_start_plus.empty() && !est.per_start_minus.empty();
  if (!est.available) {
    est.log.push_back("all seeds escaped the image annulus");
    return est;
  }
  est.rho_plus = detail::mean_of(est.per_start_plus);
  est.rho_minus = detail::mean_of(est.per_start_minus);
  est.spread_plus = detail::spread_of(est.per_start_plus);
  est.spread_minus = detail::spread_of(est.per_start_minus);
  est.accepted = est.spread_plus < opt.accept_spread && est.spread_minus < opt.accept_spread;
  // open interval; endpoints within the seed spread (or 1/n) of 1/2 count as equal to it
  const double tol = std::max({est.spread_plus, est.spread_minus, 1.0 / double(opt.iterations)});
  est.contains_half = est.rho_minus < 0.5 - tol && 0.5 + tol < est.rho_plus;
  return est;
}

struct StrandInvariance {
  double coverage = 0.0;  // fraction of accessible columns whose strand is met by the image of the strand
  int winding = 0;        // turns made by the preimages while the accessible images go once around
  bool order_preserved = false;
  long columns = 0, matched = 0;
};

// f^{-1}(L) in L is checked as L in f(L): the forward map contracts across the
// attractor while the inverse blows cell-size errors up along the stable direction
inline StrandInvariance strand_invariance(const BoundaryCurve& c, const DissipationProfile& d, const AccessibleSets& a,
                                          bool upper, int slack = 2, int refine = 32) {
  StrandInvariance out;
  auto strand = [&](int col) { return upper ? a.strand_plus(col) : a.strand_minus(col); };
  auto run = [&](int col) {
    const int edge = upper ? a.upper_row[col] : a.lower_row[col];
    const int far = upper ? a.upper_run_far[col] : a.lower_run_far[col];
    return std::pair{std::min(edge, far), std::max(edge, far)};
  };
  auto col_of = [&](double s) { return std::clamp(int(std::floor(wrap(s, a.perimeter) / a.cell_ds())), 0, a.columns - 1); };
  std::vector<char> covered(a.columns, 0);
  // per image column, the source whose image sits closest to the strand
  std::vector<double> best_gap(a.columns, std::numeric_limits<double>::infinity()), source(a.columns, 0.0);
  for (int col = 0; col < a.columns; ++col) {
    if (!a.has(col)) continue;
    ++out.columns;
    const int nx = (col + 1) % a.columns;
    // the strand continues into the next column when the outermost runs touch
    const bool joined = a.has(nx) && run(col).first <= run(nx).second + 1 && run(nx).first <= run(col).second + 1;
    for (int i = 0; i < (joined ? refine : 1); ++i) {
      const double t = double(i) / refine;
      const PhasePoint p{a.s_center(col) + t * a.cell_ds(), strand(col) + (joined ? t * (strand(nx) - strand(col)) : 0.0)};
      const PhasePoint q = step_dissipative(c, d, p);
      const int qc = col_of(q.s);
      for (int dc = -slack; dc <= slack; ++dc) {
        const int k = ((qc + dc) % a.columns + a.columns) % a.columns;
        if (a.has(k) && std::abs(q.r - strand(k)) <= slack * a.cell_dr()) covered[k] = 1;
      }
      const double gap = a.has(qc) ? std::abs(q.r - strand(qc)) : std::numeric_limits<double>::infinity();
      if (gap <= slack * a.cell_dr() && gap < best_gap[qc]) {
        best_gap[qc] = gap;
        source[qc] = wrap(p.s, a.perimeter);
      }
    }
  }
  long hit = 0;
  for (int col = 0; col < a.columns; ++col) hit += a.has(col) && covered[col];
  out.coverage = out.columns ? double(hit) / out.columns : 1.0;
  std::vector<double> order;
  for (int col = 0; col < a.columns; ++col)
    if (std::isfinite(best_gap[col])) order.push_back(source[col]);
  out.matched = long(order.size());
  if (order.size() > 1) {
    // walk the accessible image columns once around; monotone preimages make exactly one turn
    const double tol = slack * a.cell_ds(), P = a.perimeter;
    double turns = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      double step = order[(k + 1) % order.size()] - order[k];
      step -= P * std::floor((step + tol) / P);
      turns += step;
    }
    out.winding = int(std::lround(turns / P));
    out.order_preserved = out.winding == 1;
  }
  return out;
}

struct SweepBudgets {
  int columns = 512, rows = 512;
  int sweeps = 40;
  GridOptions grid;
  RotationOptions rotation;
  bool horseshoe_at_top = false;
  GrowOptions grow;
};

struct PhaseDiagramRow {
  double lambda = 0.0;
  GraphVerdictKind verdict = GraphVerdictKind::Inconclusive;
  double rho_minus = 0.0, rho_plus = 0.0;
  bool contains_half = false;
  bool rotation_accepted = false;
  std::optional<bool> horseshoe;
  double area_lower = 0.0;
  long occupied = 0, trimmed = 0;
  std::string error;

  double width() const { return rho_plus - rho_minus; }
};

inline double lower_complement_area(const AttractorGrid& g) {
  const ComplementLabels cl = complement_components(g);
  return double(cl.u_cells) * g.cell_ds() * g.cell_dr();
}

inline std::optional<bool> horseshoe_flag(const BoundaryCurve& c, const DissipationProfile& d, const GrowOptions& grow,
                                          int threads) {
  bool any_saddle = false;
  for (const auto& o : find_two_periodic(c).orbits) {
    try {
      const auto un = grow_unstable(c, d, o, 0, two_periodic_sinks(c, d), grow, threads);
      const auto st = grow_stable(c, d, o, 0, grow, threads);
      any_saddle = true;
      if (horseshoe_certificate(st, un, c.perimeter).passes) return true;
    } catch (const invalid_input&) {
      continue;  // not a saddle
    }
  }
  if (!any_saddle) return std::nullopt;
  return false;
}

inline PhaseDiagramRow sweep_row(const BoundaryCurve& c, double lambda, const SweepBudgets& b, bool top) {
  PhaseDiagramRow row;
  row.lambda = lambda;
  try {
    const auto d = DissipationProfile::constant(lambda);
    const auto g = iterate_annulus(c, d, b.columns, b.rows, b.sweeps, b.grid);
    row.occupied = g.count();
    row.area_lower = lower_complement_area(g);
    const auto tr = birkhoff_trim(g);
    row.trimmed = tr.count();
    row.verdict = graph_test(tr).kind;
    const auto acc = accessible_sets(tr);
    const auto est = rotation_numbers(c, d, acc, b.rotation);
    if (est.available) {
      row.rho_minus = est.rho_minus;
      row.rho_plus = est.rho_plus;
      row.contains_half = est.contains_half;
      row.rotation_accepted = est.accepted;
    } else {
      row.error = "rotation estimate unavailable";
    }
    if (top && b.horseshoe_at_top) row.horseshoe = horseshoe_flag(c, d, b.grow, b.grid.threads);
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

inline std::vector<PhaseDiagramRow> lambda_sweep(const BoundaryCurve& c, std::vector<double> lambdas,
                                                 const SweepBudgets& b) {
  if (lambdas.size() < 2) throw invalid_input("sweep: need at least two lambda values");
  for (double l : lambdas)
    if (!(l > 0 && l < 1)) throw invalid_input("sweep: lambda values must lie in (0,1)");
  std::sort(lambdas.begin(), lambdas.end());
  std::vector<PhaseDiagramRow> rows(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) rows[i] = sweep_row(c, lambdas[i], b, i + 1 == lambdas.size());
  return rows;
}

}  // namespace billiards
