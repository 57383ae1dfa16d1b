// Run configuration (JSON), deterministic config hashing and CSV output.
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "billiard_core.hpp"
#include "common.hpp"
#include "geometry.hpp"

namespace billiards {

using json = nlohmann::json;

struct DomainSpec {
  std::string kind = "ellipse";  // circle | ellipse | flattened_oval | fourier_perturbed
  double a1 = 2.0, a2 = 1.0;
  double radius = 1.0;
  int degree = 4;
  std::vector<FourierMode> modes;
  int samples = 4096;
};

struct DissipationSpec {
  std::string kind = "constant";  // constant | table
  double lambda = 0.5;
  std::vector<double> s_over_p, r_nodes;
  std::vector<std::vector<double>> values;  // values[i][j] at (s_over_p[i], r_nodes[j])
};

struct RunConfig {
  DomainSpec domain;
  DissipationSpec dissipation;
  int columns = 512, rows = 512, sweeps = 30, subdivision = 2;
  long rotation_iterations = 10000, rotation_transient = 1000;
  int rotation_seeds = 16;
  int graph_samples = 1024, graph_iterations = 60;
  std::optional<bool> graph_transform;  // unset: attempt when the table is pinched
  double manifold_arclength = 50.0;
  long manifold_max_points = 400000;
  std::optional<int> manifold_orbit;
  int manifold_bounce = 0;
  bool horseshoe = false;
  std::optional<PhasePoint> orbit_start;
  int orbit_steps = 100;
  std::vector<double> lambdas;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: all cores
  std::string output_dir = "out";
  bool write_pgm = false;
  json source;  // effective configuration, used for hashing
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw invalid_input(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw invalid_input("config: missing field '" + where + "." + key + "'");
  return get_or<T>(j, key, T{});
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw invalid_input("config: top level must be an object");
  RunConfig cfg;
  if (!j.contains("domain")) throw invalid_input("config: missing field 'domain'");
  const json& dj = j.at("domain");
  auto& d = cfg.domain;
  d.kind = detail::require<std::string>(dj, "kind", "domain");
  d.samples = detail::get_or<int>(dj, "samples", d.samples);
  if (d.kind == "circle") {
    d.radius = detail::get_or<double>(dj, "radius", 1.0);
  } else if (d.kind == "ellipse" || d.kind == "fourier_perturbed") {
    if (dj.contains("eccentricity")) {
      const auto e = EllipseSpec::from_eccentricity(detail::get_or<double>(dj, "eccentricity", 0.0),
                                                    detail::get_or<double>(dj, "a1", 1.0));
      d.a1 = e.a1;
      d.a2 = e.a2;
    } else {
      d.a1 = detail::require<double>(dj, "a1", "domain");
      d.a2 = detail::require<double>(dj, "a2", "domain");
    }
    if (d.kind == "fourier_perturbed") {
      if (!dj.contains("modes") || !dj.at("modes").is_array())
        throw invalid_input("config: missing field 'domain.modes'");
      for (const auto& m : dj.at("modes"))
        d.modes.push_back({detail::require<int>(m, "k", "domain.modes"), detail::require<double>(m, "eps", "domain.modes"),
                           detail::get_or<double>(m, "phase", 0.0)});
    }
  } else if (d.kind == "flattened_oval") {
    d.degree = detail::get_or<int>(dj, "degree", 4);
  } else {
    throw invalid_input("config: unknown domain kind '" + d.kind + "'");
  }

  if (j.contains("dissipation")) {
    const json& xj = j.at("dissipation");
    auto& x = cfg.dissipation;
    x.kind = detail::get_or<std::string>(xj, "kind", "constant");
    if (x.kind == "constant") {
      x.lambda = detail::require<double>(xj, "lambda", "dissipation");
    } else if (x.kind == "table") {
      x.s_over_p = detail::require<std::vector<double>>(xj, "s_over_P", "dissipation");
      x.r_nodes = detail::require<std::vector<double>>(xj, "r", "dissipation");
      x.values = detail::require<std::vector<std::vector<double>>>(xj, "values", "dissipation");
      if (x.s_over_p.size() < 1 || x.r_nodes.size() < 2 || x.values.size() != x.s_over_p.size())
        throw invalid_input("config: dissipation table has inconsistent dimensions");
      for (const auto& row : x.values)
        if (row.size() != x.r_nodes.size()) throw invalid_input("config: dissipation table has inconsistent dimensions");
      if (!std::is_sorted(x.s_over_p.begin(), x.s_over_p.end()) || !std::is_sorted(x.r_nodes.begin(), x.r_nodes.end()))
        throw invalid_input("config: dissipation table nodes must be increasing");
    } else {
      throw invalid_input("config: unknown dissipation kind '" + x.kind + "'");
    }
  }

  const json grid = j.value("grid", json::object());
  cfg.columns = detail::get_or<int>(grid, "columns", cfg.columns);
  cfg.rows = detail::get_or<int>(grid, "rows", cfg.rows);
  cfg.sweeps = detail::get_or<int>(grid, "sweeps", cfg.sweeps);
  cfg.subdivision = detail::get_or<int>(grid, "subdivision", cfg.subdivision);

  const json b = j.value("budgets", json::object());
  cfg.rotation_iterations = detail::get_or<long>(b, "rotation_iterations", cfg.rotation_iterations);
  cfg.rotation_transient = detail::get_or<long>(b, "rotation_transient", cfg.rotation_transient);
  cfg.rotation_seeds = detail::get_or<int>(b, "rotation_seeds", cfg.rotation_seeds);
  cfg.graph_samples = detail::get_or<int>(b, "graph_samples", cfg.graph_samples);
  cfg.graph_iterations = detail::get_or<int>(b, "graph_iterations", cfg.graph_iterations);
  cfg.manifold_arclength = detail::get_or<double>(b, "manifold_arclength", cfg.manifold_arclength);
  cfg.manifold_max_points = detail::get_or<long>(b, "manifold_max_points", cfg.manifold_max_points);
  if (b.contains("graph_transform")) cfg.graph_transform = detail::get_or<bool>(b, "graph_transform", true);

  const json m = j.value("manifolds", json::object());
  if (m.contains("orbit")) cfg.manifold_orbit = detail::get_or<int>(m, "orbit", 0);
  cfg.manifold_bounce = detail::get_or<int>(m, "bounce", 0);
  cfg.horseshoe = detail::get_or<bool>(j, "horseshoe", cfg.horseshoe);
  if (j.contains("orbit")) {
    const json& oj = j.at("orbit");
    cfg.orbit_start = PhasePoint{detail::require<double>(oj, "s_over_P", "orbit"), detail::require<double>(oj, "r", "orbit")};
    cfg.orbit_steps = detail::get_or<int>(oj, "steps", cfg.orbit_steps);
    if (cfg.orbit_steps <= 0 || !(std::abs(cfg.orbit_start->r) < 1.0))
      throw invalid_input("config: orbit needs steps > 0 and |r| < 1");
  }
  cfg.lambdas = detail::get_or<std::vector<double>>(j, "lambdas", {});
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.threads = detail::get_or<int>(j, "threads", cfg.threads);
  if (cfg.threads < 0) throw invalid_input("config: threads must be >= 0");
  cfg.output_dir = detail::get_or<std::string>(j, "output_dir", cfg.output_dir);
  cfg.write_pgm = detail::get_or<bool>(j, "pgm", cfg.write_pgm);

  if (cfg.columns <= 0 || cfg.rows <= 0 || cfg.sweeps <= 0 || cfg.subdivision <= 0 || cfg.rotation_iterations <= 0 ||
      cfg.rotation_transient < 0 || cfg.rotation_seeds <= 0 || cfg.graph_samples <= 0 || cfg.graph_iterations <= 0 ||
      !(cfg.manifold_arclength > 0) || cfg.manifold_max_points <= 0)
    throw invalid_input("config: all budgets must be positive");
  if (cfg.manifold_bounce != 0 && cfg.manifold_bounce != 1) throw invalid_input("config: manifolds.bounce must be 0 or 1");
  cfg.source = j;
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw invalid_input(std::string("config: parse error: ") + e.what());
  }
  return parse_config(j);
}

// Command-line overrides land in both the parsed struct and the hashed source.
inline void override_lambda(RunConfig& cfg, double lambda) {
  cfg.dissipation = DissipationSpec{};
  cfg.dissipation.kind = "constant";
  cfg.dissipation.lambda = lambda;
  cfg.source["dissipation"] = json{{"kind", "constant"}, {"lambda", lambda}};
}

// 64-bit FNV-1a of the canonical (key-sorted, compact) JSON text.
inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

// Keys that cannot change any numerical output are left out of the hash.
inline std::string config_hash(const RunConfig& cfg) {
  json j = cfg.source;
  if (j.is_object()) {
    j.erase("threads");
    j.erase("output_dir");
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

inline BoundaryCurve build_domain(const DomainSpec& d) {
  if (d.kind == "circle") return make_circle(d.radius, d.samples);
  if (d.kind == "ellipse") return make_ellipse({d.a1, d.a2}, d.samples);
  if (d.kind == "flattened_oval") return make_flattened_oval(d.degree, d.samples);
  if (d.kind == "fourier_perturbed") return make_fourier_perturbed({d.a1, d.a2}, d.modes, d.samples);
  throw invalid_input("config: unknown domain kind '" + d.kind + "'");
}

// Bilinear in (s/P, r), periodic in s, clamped in r.
inline DissipationProfile build_dissipation(const DissipationSpec& x, const BoundaryCurve& c) {
  if (x.kind == "constant") return DissipationProfile::constant(x.lambda);
  const double P = c.perimeter;
  auto f = [x, P](double s, double r) {
    const auto& S = x.s_over_p;
    const auto& R = x.r_nodes;
    const std::size_t ns = S.size();
    const double u = wrap(s, P) / P;
    std::size_t i0 = ns - 1, i1 = 0;
    double ws = 0.0;
    for (std::size_t i = 0; i < ns; ++i) {
      const double a = S[i], b = i + 1 < ns ? S[i + 1] : S[0] + 1.0;
      double uu = u;
      if (i + 1 == ns && uu < a) uu += 1.0;
      if (uu >= a && uu < b) {
        i0 = i;
        i1 = (i + 1) % ns;
        ws = (uu - a) / (b - a);
        break;
      }
    }
    if (ns == 1) {
      i0 = i1 = 0;
      ws = 0.0;
    } else if (u < S[0]) {
      i0 = ns - 1;
      i1 = 0;
      const double a = S[ns - 1] - 1.0;
      ws = (u - a) / (S[0] - a);
    }
    const double rc = std::clamp(r, R.front(), R.back());
    std::size_t j = std::upper_bound(R.begin(), R.end(), rc) - R.begin();
    j = std::clamp<std::size_t>(j, 1, R.size() - 1);
    const double wr = (rc - R[j - 1]) / (R[j] - R[j - 1]);
    auto at = [&](std::size_t i) { return (1 - wr) * x.values[i][j - 1] + wr * x.values[i][j]; };
    return (1 - ws) * at(i0) + ws * at(i1);
  };
  DissipationProfile d = DissipationProfile::variable(f, P);
  d.description = "table";
  const auto rep = validate_dissipation(d, c);
  if (!rep.passes) throw invalid_input("config: dissipation table violates 0 < d(lambda r)/dr < 1");
  return d;
}

struct CsvHeader {
  std::string command;
  std::string hash;
  std::uint64_t seed = 0;
  bool reproducible = false;
};

inline std::string timestamp_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const CsvHeader& h, const std::vector<std::string>& columns) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# billiard-lab " << h.command << "\n";
    out_ << "# config_hash=" << h.hash << "\n";
    out_ << "# seed=" << h.seed << "\n";
    if (!h.reproducible) out_ << "# timestamp=" << timestamp_utc() << "\n";
    row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
  }

  template <class... T>
  void values(const T&... v) {
    std::vector<std::string> cells;
    (cells.push_back(cell(v)), ...);
    row(cells);
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "true" : "false"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::ofstream out_;
};

}  // namespace billiards
