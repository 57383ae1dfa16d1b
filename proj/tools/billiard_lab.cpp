#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "billiards/attractor.hpp"
#include "billiards/billiard_core.hpp"
#include "billiards/geometry.hpp"
#include "billiards/io.hpp"
#include "billiards/manifolds.hpp"
#include "billiards/orbit_analysis.hpp"
#include "billiards/rotation.hpp"

namespace fs = std::filesystem;
using namespace billiards;

namespace {

struct Context {
  RunConfig cfg;
  BoundaryCurve curve;
  DissipationProfile diss;
  CsvHeader header;
  fs::path out;
  int threads = 1;

  CsvWriter csv(const std::string& name, const std::vector<std::string>& cols) const {
    return CsvWriter(out / name, header, cols);
  }
};

std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::string eigen_str(const EigenPair& e, bool first) {
  if (!e.complex) return format_double(first ? e.mu1 : e.mu2);
  const double re = e.modulus * std::cos(e.argument), im = e.modulus * std::sin(e.argument);
  return format_double(re) + (first ? "-" : "+") + format_double(im) + "i";
}

OrbitClassification classify(const Context& ctx, const TwoPeriodicOrbit& o) {
  if (ctx.diss.is_constant()) return classify_two_periodic(o, ctx.diss.value);
  return classify_nonconstant(o, ctx.diss(o.s1, 0.0), ctx.diss(o.s2, 0.0));
}

int cmd_classify(const Context& ctx) {
  const auto scan = find_two_periodic(ctx.curve);
  const double P = ctx.curve.perimeter;
  auto w = ctx.csv("classification.csv",
                   {"s1/P", "s2/P", "tau", "K1", "K2", "k12", "type", "mu1", "mu2", "lambda_minus", "lambda_bar"});
  for (const auto& o : scan.orbits) {
    const auto oc = classify(ctx, o);
    w.values(o.s1 / P, o.s2 / P, o.tau, o.K1, o.K2, o.k12, std::string(to_string(oc.orbit_type)),
             eigen_str(oc.eigenvalues, true), eigen_str(oc.eigenvalues, false), opt_str(oc.lambda_minus),
             opt_str(oc.lambda_bar));
  }
  if (scan.degenerate_family) w.row({"", "", "", "", "", "", "degenerate_family", "", "", "", ""});

  if (ctx.cfg.orbit_start) {
    auto ow = ctx.csv("orbit.csv", {"step", "s", "s_over_P", "r", "tau", "det_jacobian"});
    const PhasePoint p0{ctx.cfg.orbit_start->s * P, ctx.cfg.orbit_start->r};
    const Orbit orb = iterate(ctx.curve, ctx.diss, p0, ctx.cfg.orbit_steps);
    for (std::size_t k = 0; k < orb.points.size(); ++k) {
      const auto p = orb.points[k];
      ow.values(long(k), p.s, p.s / P, p.r, orb.taus[k], jacobian(ctx.curve, ctx.diss, p).det());
    }
  }
  std::cout << "classify: " << scan.orbits.size() << " orbit(s)" << (scan.degenerate_family ? ", degenerate family" : "")
            << "\n";
  return 0;
}

void write_grid(const Context& ctx, const std::string& name, const AttractorGrid& g) {
  auto w = ctx.csv(name, {"s/P", "r"});
  for (auto p : g.occupied_centers()) w.values(p.x / g.perimeter, p.y);
}

void write_pgm(const fs::path& path, const AttractorGrid& g) {
  std::ofstream f(path, std::ios::binary);
  f << "P5\n" << g.columns << " " << g.rows << "\n255\n";
  for (int row = g.rows - 1; row >= 0; --row)
    for (int col = 0; col < g.columns; ++col) f.put(g.at(col, row) ? char(0) : char(255));
}

int cmd_attract(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const AttractorGrid g =
      iterate_annulus(ctx.curve, ctx.diss, cfg.columns, cfg.rows, cfg.sweeps, {cfg.subdivision, ctx.threads});
  write_grid(ctx, "attractor.csv", g);
  if (cfg.write_pgm) write_pgm(ctx.out / "attractor.pgm", g);

  const ComplementLabels cl = complement_components(g);
  AttractorGrid tr = g;
  if (cl.separates) {
    tr = birkhoff_trim(g);
    write_grid(ctx, "attractor_trimmed.csv", tr);
  }
  const GraphVerdict v = graph_test(tr);

  int code = 0;
  std::string gt_status = "skipped";
  const auto cert = check_pinched(ctx.curve);
  bool attempt = false;
  if (cfg.graph_transform) attempt = *cfg.graph_transform;
  else if (cert.passes) {
    const auto cone = make_cone_field(ctx.curve, cert);
    attempt = cone_contraction_check(ctx.curve, ctx.diss, cone).passes;
  }
  if (attempt) {
    try {
      const auto res = graph_transform(ctx.curve, ctx.diss, {cfg.graph_samples, cfg.graph_iterations, 1e-10, ctx.threads});
      auto cw = ctx.csv("graph_convergence.csv", {"iteration", "sup_distance"});
      for (std::size_t i = 0; i < res.distances.size(); ++i) cw.values(long(i), res.distances[i]);
      auto gw = ctx.csv("graph.csv", {"s/P", "gamma", "gamma_prime"});
      const auto& L = res.limit;
      for (int i = 0; i < L.size(); ++i) gw.values(double(i) / L.size(), L.values[i], L.slopes[i]);
      gt_status = res.converged ? "converged" : "not_converged";
      if (!res.converged) code = 1;
    } catch (const non_convergence& e) {
      gt_status = "folded";
      std::cerr << "graph transform: " << e.what() << "\n";
      code = 1;
    }
  }

  auto w = ctx.csv("verdict.csv", {"verdict", "fold_columns", "max_run_height", "occupied", "trimmed", "separates",
                                   "connected", "pinched", "graph_transform"});
  w.values(std::string(to_string(v.kind)), v.fold_columns.size(), v.max_run_height, g.count(), tr.count(), cl.separates,
           occupied_connected(g), cert.passes, gt_status);
  std::cout << "attract: " << to_string(v.kind) << ", " << g.count() << " cells, graph transform " << gt_status << "\n";
  return code;
}

RotationOptions rotation_options(const Context& ctx) {
  RotationOptions ro;
  ro.iterations = ctx.cfg.rotation_iterations;
  ro.transient = ctx.cfg.rotation_transient;
  ro.seeds = ctx.cfg.rotation_seeds;
  ro.rng_seed = ctx.cfg.seed;
  ro.threads = ctx.threads;
  return ro;
}

GrowOptions grow_options(const Context& ctx) {
  GrowOptions go;
  go.target_arclength = ctx.cfg.manifold_arclength;
  go.max_points = ctx.cfg.manifold_max_points;
  return go;
}

int cmd_sweep(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  SweepBudgets b;
  b.columns = cfg.columns;
  b.rows = cfg.rows;
  b.sweeps = cfg.sweeps;
  b.grid = {cfg.subdivision, ctx.threads};
  b.rotation = rotation_options(ctx);
  b.horseshoe_at_top = cfg.horseshoe;
  b.grow = grow_options(ctx);
  const auto rows = lambda_sweep(ctx.curve, cfg.lambdas, b);
  auto w = ctx.csv("phase_diagram.csv",
                   {"lambda", "verdict", "rho_minus", "rho_plus", "width", "contains_half", "horseshoe", "area_lower"});
  int code = 0;
  for (const auto& r : rows) {
    const std::string hs = r.horseshoe ? (*r.horseshoe ? "true" : "false") : "";
    if (r.error.empty())
      w.values(r.lambda, std::string(to_string(r.verdict)), r.rho_minus, r.rho_plus, r.width(), r.contains_half, hs,
               r.area_lower);
    else {
      w.row({format_double(r.lambda), "Inconclusive", "", "", "", "", hs, format_double(r.area_lower)});
      std::cerr << "sweep: lambda " << r.lambda << ": " << r.error << "\n";
      code = 1;
    }
  }
  std::cout << "sweep: " << rows.size() << " rows\n";
  return code;
}

json branch_json(const ManifoldBranch& br, double P) {
  json j{{"kind", to_string(br.kind)},
         {"bounce", br.bounce},
         {"side", br.side},
         {"points", br.polyline.size()},
         {"arclength", br.arclength},
         {"eigenvalue", br.eigenvalue},
         {"truncated", br.truncated},
         {"clipped", br.clipped},
         {"pieces", br.pieces}};
  if (br.sink_index) {
    j["sink_index"] = *br.sink_index;
    j["terminal_sink_distance"] = br.terminal_sink_distance;
  }
  j["end"] = {br.polyline.back().s / P, br.polyline.back().r};
  return j;
}

int cmd_manifolds(const Context& ctx) {
  const auto& c = ctx.curve;
  const double P = c.perimeter;
  const auto scan = find_two_periodic(c);
  if (scan.degenerate_family) throw invalid_input("manifolds: the table has a degenerate family of 2-periodic orbits");
  std::optional<TwoPeriodicOrbit> target;
  if (ctx.cfg.manifold_orbit) {
    const int k = *ctx.cfg.manifold_orbit;
    if (k < 0 || k >= int(scan.orbits.size())) throw invalid_input("manifolds: orbit index out of range");
    target = scan.orbits[k];
    if (classify(ctx, *target).orbit_type != OrbitType::Saddle)
      throw invalid_input("manifolds: target orbit is not a saddle");
  } else {
    for (const auto& o : scan.orbits)
      if (classify(ctx, o).orbit_type == OrbitType::Saddle) {
        target = o;
        break;
      }
    if (!target) throw invalid_input("manifolds: no saddle 2-periodic orbit");
  }

  const auto sinks = two_periodic_sinks(c, ctx.diss);
  const GrowOptions go = grow_options(ctx);
  std::vector<ManifoldBranch> all;
  json cert;
  cert["config_hash"] = ctx.header.hash;
  cert["seed"] = ctx.header.seed;
  if (!ctx.header.reproducible) cert["timestamp"] = timestamp_utc();
  cert["saddle"] = {{"s1/P", target->s1 / P}, {"s2/P", target->s2 / P}, {"k12", target->k12}};
  json sink_list = json::array();
  for (auto s : sinks) sink_list.push_back({s.s / P, s.r});
  cert["sinks"] = sink_list;
  bool pairing = true;
  bool any_horseshoe = false;
  for (int bounce = 0; bounce < 2; ++bounce) {
    const auto un = grow_unstable(c, ctx.diss, *target, bounce, sinks, go, ctx.threads);
    const auto st = grow_stable(c, ctx.diss, *target, bounce, go, ctx.threads);
    const bool paired = un[0].sink_index && un[1].sink_index && *un[0].sink_index != *un[1].sink_index;
    pairing = pairing && paired;
    const auto hc = horseshoe_certificate(st, un, P);
    any_horseshoe = any_horseshoe || hc.passes;
    json hj{{"passes", hc.passes}, {"pairs_checked", hc.pairs_checked}, {"pairs_with_transverse", hc.pairs_with_transverse}};
    if (std::isfinite(hc.min_angle)) hj["min_angle"] = hc.min_angle;
    json cr = json::array();
    for (const auto& x : hc.crossings) cr.push_back({{"s/P", x.point.s / P}, {"r", x.point.r}, {"angle", x.angle}, {"transverse", x.transverse}});
    hj["crossings"] = cr;
    json bj{{"bounce", bounce}, {"sink_pairing", paired}, {"horseshoe", hj}};
    json branches = json::array();
    for (const auto* set : {&un, &st})
      for (const auto& br : *set) {
        branches.push_back(branch_json(br, P));
        auto w = ctx.csv("manifold_" + std::string(to_string(br.kind)) + "_b" + std::to_string(bounce) +
                             (br.side > 0 ? "_plus" : "_minus") + ".csv",
                         {"index", "s/P", "r"});
        for (std::size_t i = 0; i < br.polyline.size(); ++i)
          w.values(long(i), br.polyline[i].s / P, br.polyline[i].r);
      }
    bj["branches"] = branches;
    cert["bounces"].push_back(bj);
  }
  cert["sink_pairing"] = pairing;
  cert["horseshoe"] = any_horseshoe;
  std::ofstream(ctx.out / "certificate.json") << cert.dump(2) << "\n";
  std::cout << "manifolds: sink pairing " << (pairing ? "passes" : "fails") << ", horseshoe "
            << (any_horseshoe ? "certified" : "not certified") << "\n";
  return 0;
}

int cmd_twist(const Context& ctx) {
  const auto tc = twist_certificate(ctx.curve, ctx.diss);
  const auto dr = validate_dissipation(ctx.diss, ctx.curve);
  auto w = ctx.csv("twist.csv", {"min_upper_right_entry", "max_tilt_ratio", "beta", "max_nu_over_tau", "proof_bound",
                                 "dissipation_min", "dissipation_max", "passes"});
  w.values(tc.min_upper_right_entry, tc.max_tilt_ratio, tc.beta, tc.max_nu_over_tau, tc.proof_bound, dr.min_quantity,
           dr.max_quantity, tc.passes && dr.passes);
  std::cout << "twist: beta = " << tc.beta << (tc.passes ? " (certified)" : " (not certified)") << "\n";
  return 0;
}

int cmd_cones(const Context& ctx) {
  const auto cert = check_pinched(ctx.curve);
  if (!cert.passes) throw invalid_input("cones: table is not pinched (" + cert.reason + ")");
  const auto cone = make_cone_field(ctx.curve, cert);
  const auto rep = cone_contraction_check(ctx.curve, ctx.diss, cone);
  auto w = ctx.csv("cones.csv", {"pinch_margin", "alpha0", "c0", "delta0", "K0", "mu0", "lambda1", "lambda_certified",
                                 "lambda", "min_margin", "failures", "samples", "passes"});
  w.values(cert.margin, cone.alpha0, cone.c0, cone.delta0, cone.K0, cone.mu0, cone.lambda1, cone.lambda_max_certified,
           ctx.diss.sup_value, rep.min_margin, rep.failures, rep.samples, rep.passes);
  std::cout << "cones: " << (rep.passes ? "contraction holds" : "contraction fails") << " at lambda "
            << ctx.diss.sup_value << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dissipative billiards laboratory"};
  app.require_subcommand(1);
  std::string config_path, output_dir;
  std::optional<double> lambda;
  std::optional<int> threads;
  bool reproducible = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--lambda", lambda, "constant dissipation, overrides the file");
    sub->add_option("--threads", threads, "worker threads (default: all cores)")->check(CLI::PositiveNumber);
    sub->add_flag("--reproducible", reproducible, "omit timestamps from output headers");
    sub->add_option("--output-dir", output_dir, "output directory, overrides the file");
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"classify", "classify 2-periodic orbits"},
      {"attract", "outer approximation of the attractor and graph/fold verdict"},
      {"sweep", "phase diagram over a list of lambda values"},
      {"manifolds", "stable/unstable manifolds and homoclinic certificate"},
      {"twist", "twist certificate of the dissipative map"},
      {"cones", "cone field and contraction check"}};
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    Context ctx;
    ctx.cfg = load_config(config_path);
    if (lambda) {
      if (command == "sweep") {
        ctx.cfg.lambdas = {*lambda};
        ctx.cfg.source["lambdas"] = ctx.cfg.lambdas;
      } else {
        override_lambda(ctx.cfg, *lambda);
      }
    }
    if (threads) ctx.cfg.threads = *threads;
    if (!output_dir.empty()) ctx.cfg.output_dir = output_dir;
    ctx.threads = ctx.cfg.threads > 0 ? ctx.cfg.threads : default_threads();
    ctx.curve = build_domain(ctx.cfg.domain);
    ctx.diss = build_dissipation(ctx.cfg.dissipation, ctx.curve);
    ctx.header = {command, config_hash(ctx.cfg), ctx.cfg.seed, reproducible};
    ctx.out = ctx.cfg.output_dir;
    fs::create_directories(ctx.out);

    if (command == "classify") return cmd_classify(ctx);
    if (command == "attract") return cmd_attract(ctx);
    if (command == "sweep") return cmd_sweep(ctx);
    if (command == "manifolds") return cmd_manifolds(ctx);
    if (command == "twist") return cmd_twist(ctx);
    return cmd_cones(ctx);
  } catch (const invalid_input& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const non_convergence& e) {
    std::cerr << "non-convergence: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
