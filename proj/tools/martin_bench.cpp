#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "martinbench/cache.hpp"
#include "martinbench/error.hpp"
#include "martinbench/lab.hpp"
#include "martinbench/martin.hpp"
#include "martinbench/parallel.hpp"
#include "martinbench/potential.hpp"

using namespace martinbench;

namespace {

enum Exit { kOk = 0, kUsage = 1, kAssertions = 2, kCrash = 3 };

struct Common {
  std::string profile = "quick";
  std::string cache_dir;
  int threads = 0;
  std::uint64_t seed = 1;
  int depth = -1;
  int radius = -1;
  std::string r = "1";
  double tol = 0;
  std::string system = "srw";
  std::string output;
  std::string records;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--profile", c.profile, "Truncation profile")->check(CLI::IsMember({"quick", "standard"}));
  app->add_option("--cache-dir", c.cache_dir, "Directory for persisted Green solves");
  app->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app->add_option("--seed", c.seed, "Sampling seed");
}

void add_truncation(CLI::App* app, Common& c) {
  app->add_option("--system", c.system, "Fixture name or path to a system JSON file");
  app->add_option("--depth", c.depth, "Cylinder depth m");
  app->add_option("--radius", c.radius, "Ball radius n");
  app->add_option("--r", c.r, "Value of r: a number, R or a multiple like 0.99R");
  app->add_option("--tol", c.tol, "Relative series tolerance");
}

Json parse_value(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error&) {
    return Json(text);
  }
}

Json system_json(const std::string& arg) {
  std::ifstream in(arg);
  if (!in) return Json{{"fixture", arg}};
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(arg + ": " + e.what());
  }
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_runtime(const Common& c) {
  if (c.threads > 0) set_thread_count(c.threads);
  if (!c.cache_dir.empty()) set_cache_dir(c.cache_dir);
}

Json base_config(const Common& c) {
  Json cfg{{"schema_version", kSchemaVersion}, {"system", system_json(c.system)}, {"profile", c.profile},
           {"seed", c.seed}, {"r_grid", Json::array({parse_value(c.r)})}};
  Json t = Json::object();
  if (c.depth >= 0) t["depth"] = c.depth;
  if (c.radius >= 0) t["radius"] = c.radius;
  if (c.tol > 0) t["tol"] = c.tol;
  if (!t.empty()) cfg["truncation"] = t;
  if (!c.output.empty()) cfg["output"] = c.output;
  return cfg;
}

Json scan_params(const std::string& kind, const Common& c) {
  Json p{{"kind", kind}};
  for (const auto& s : c.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set " + s + ": expected key=value");
    p[s.substr(0, eq)] = parse_value(s.substr(eq + 1));
  }
  return p;
}

int finish_run(const RunResult& res, const Common& c, const std::vector<Json>* records) {
  if (records && !c.records.empty()) {
    std::ofstream out(c.records, std::ios::trunc);
    for (const auto& r : *records) out << r.dump() << '\n';
  }
  std::cout << res.summary.dump(2) << '\n';
  return res.passed ? kOk : kAssertions;
}

int run_single_scan(const std::string& kind, const Common& c) {
  apply_runtime(c);
  Json cfg = base_config(c);
  cfg["scans"] = Json::array({scan_params(kind, c)});
  LabConfig lc = LabConfig::from_json(cfg);
  RunResult res = run(lc);
  return finish_run(res, c, &res.records);
}

BoundaryRay parse_ray(const GroupModel& G, const std::string& text) {
  auto colon = text.find(':');
  std::string prefix = colon == std::string::npos ? std::string("1") : text.substr(0, colon);
  std::string period = colon == std::string::npos ? text : text.substr(colon + 1);
  try {
    return BoundaryRay(G, G.parse_raw(prefix), G.parse_raw(period));
  } catch (const Error& e) {
    throw ConfigError("ray '" + text + "': " + e.what());
  }
}

std::size_t parse_atom(const TruncatedOperator& op, const std::string& key) {
  auto bar = key.find('|');
  if (bar == std::string::npos) throw ConfigError("atom '" + key + "': expected cylinder|groupword");
  std::vector<Symbol> cyl;
  for (char ch : key.substr(0, bar)) {
    int v = ch >= '0' && ch <= '9' ? ch - '0' : ch >= 'a' && ch <= 'z' ? ch - 'a' + 10 : -1;
    if (v < 0) throw ConfigError("atom '" + key + "': bad cylinder symbol");
    cyl.push_back(static_cast<Symbol>(v));
  }
  Word g;
  try {
    g = op.system().group.parse(key.substr(bar + 1));
  } catch (const Error& e) {
    throw ConfigError("atom '" + key + "': " + e.what());
  }
  auto s = op.state_of(cyl, g);
  if (!s) throw ConfigError("atom '" + key + "': not a state of the truncation");
  return *s;
}

Measure parse_measure(const TruncatedOperator& op, const Json& j) {
  if (!j.is_object()) throw ConfigError("measure: expected an object mapping atoms to values");
  Measure m = op.zeros();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number()) throw ConfigError("measure['" + it.key() + "']: expected a number");
    double v = it.value().get<double>();
    if (v < 0) throw ConfigError("measure['" + it.key() + "']: must be nonnegative");
    m[parse_atom(op, it.key())] += v;
  }
  return m;
}

AtomSet parse_set(const TruncatedOperator& op, const Json& j) {
  if (!j.is_array()) throw ConfigError("atom set: expected an array");
  AtomSet A(op.size(), 0);
  for (const auto& e : j) {
    std::string key = e.get<std::string>();
    if (key.find('|') != std::string::npos) {
      A[parse_atom(op, key)] = 1;
      continue;
    }
    auto pos = op.position_of(op.system().group.parse(key));
    if (!pos) throw ConfigError("atom set: '" + key + "' outside the ball");
    for (std::size_t w = 0; w < op.word_count(); ++w) A[op.state(w, *pos)] = 1;
  }
  return A;
}

Json measure_json(const TruncatedOperator& op, std::span<const double> m, double floor = 1e-300) {
  Json out = Json::object();
  for (std::size_t s = 0; s < m.size(); ++s)
    if (std::abs(m[s]) > floor) out[op.describe_state(s)] = m[s];
  return out;
}

struct Direct {
  std::unique_ptr<Lab> lab;
  double r = 1;
};

Direct direct_lab(const Common& c) {
  apply_runtime(c);
  Json cfg = base_config(c);
  Direct d;
  d.lab = std::make_unique<Lab>(LabConfig::from_json(cfg));
  d.r = d.lab->resolve_r(parse_value(c.r));
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for Green functions and Martin boundaries of group extensions"};
  app.require_subcommand(1);
  Common c;
  add_common(&app, c);
  app.fallthrough();

  auto* run_cmd = app.add_subcommand("run", "Run every scan of a config file");
  std::string config_path;
  run_cmd->add_option("config", config_path, "Config JSON")->required();
  run_cmd->add_option("--output", c.output, "Artifact directory (overrides the config)");
  run_cmd->add_option("--records", c.records, "Write the record stream as JSON lines");

  struct ScanCmd {
    const char* name;
    const char* kind;
    const char* help;
  };
  const ScanCmd scan_cmds[] = {
      {"rho", "rho", "Spectral radius estimate across radii"},
      {"green", "green", "Green values with tail certificates"},
      {"ancona-scan", "ancona", "Ancona ratio scan"},
      {"relative-ancona-scan", "relative_ancona", "Relative Ancona scan on hull neighbourhoods"},
      {"gl-scan", "gl", "Exponential-decay quotient scan"},
      {"decay-scan", "decay", "Sphere-maximum decay of Green values"},
      {"superexp-scan", "superexp", "Decay of Green values restricted outside balls"},
      {"sphere-hr-scan", "sphere_hr", "Sphere sums of H_r"},
      {"holder-fit", "holder", "Martin distance vs visual distance fit"},
      {"boundary-measure", "boundary_measure", "Conformal measure estimates along a ray"},
      {"diagnostics", "diagnostics", "Reversibility, distortion and transitivity checks"},
  };
  std::map<CLI::App*, std::string> scan_kind;
  for (const auto& s : scan_cmds) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_truncation(sub, c);
    sub->add_option("--set", c.sets, "Scan parameter key=value (value parsed as JSON when possible)");
    sub->add_option("--output", c.output, "Artifact directory");
    sub->add_option("--records", c.records, "Write the record stream as JSON lines");
    scan_kind[sub] = s.kind;
  }

  auto* kernel_cmd = app.add_subcommand("kernel", "Martin kernel values along a ray as JSON lines");
  add_truncation(kernel_cmd, c);
  std::vector<std::string> kernel_h{"1"};
  std::string ray_text = "a";
  std::vector<int> depths;
  kernel_cmd->add_option("--element", kernel_h, "Group elements h");
  kernel_cmd->add_option("--ray", ray_text, "Ray as prefix:period");
  kernel_cmd->add_option("--depths", depths, "Ray depths")->delimiter(',');

  auto* metric_cmd = app.add_subcommand("martin-metric", "Martin distance between two rays");
  add_truncation(metric_cmd, c);
  std::string ray_a = "a", ray_b = "b";
  double lambda = 0.5;
  int coef_radius = -1;
  metric_cmd->add_option("--ray1", ray_a, "First ray as prefix:period");
  metric_cmd->add_option("--ray2", ray_b, "Second ray as prefix:period");
  metric_cmd->add_option("--depths", depths, "Ray depths")->delimiter(',');
  metric_cmd->add_option("--lambda", lambda, "Coefficient decay lambda");
  metric_cmd->add_option("--coef-radius", coef_radius, "Radius of the coefficient sum");

  std::string mu_path, nu_path, set_path;
  auto* reduce_cmd = app.add_subcommand("reduce", "Reduced measure of mu on A");
  add_truncation(reduce_cmd, c);
  reduce_cmd->add_option("--measure", mu_path, "Measure JSON (atom -> value)")->required();
  reduce_cmd->add_option("--set", set_path, "Atom set JSON (atoms or group words)")->required();
  auto* riesz_cmd = app.add_subcommand("riesz", "Riesz decomposition of an excessive measure");
  add_truncation(riesz_cmd, c);
  riesz_cmd->add_option("--measure", mu_path, "Measure JSON (atom -> value)")->required();
  auto* dom_cmd = app.add_subcommand("dominate", "Domination principle check");
  add_truncation(dom_cmd, c);
  dom_cmd->add_option("--measure", mu_path, "Excessive measure mu")->required();
  dom_cmd->add_option("--charge", nu_path, "Charge nu supported on A")->required();
  dom_cmd->add_option("--set", set_path, "Atom set A")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (run_cmd->parsed()) {
      apply_runtime(c);
      LabConfig cfg = LabConfig::load(config_path);
      if (!c.output.empty()) cfg.output = c.output;
      RunResult res = run(cfg);
      return finish_run(res, c, &res.records);
    }
    for (const auto& [sub, kind] : scan_kind)
      if (sub->parsed()) return run_single_scan(kind, c);

    if (kernel_cmd->parsed()) {
      Direct d = direct_lab(c);
      GreenCache& cache = d.lab->cache();
      const GroupModel& G = d.lab->system().group;
      BoundaryRay ray = parse_ray(G, ray_text);
      if (depths.empty())
        for (int k = 1; k + 2 <= cache.op().ball().radius(); ++k) depths.push_back(k);
      for (const auto& ht : kernel_h) {
        Word h = G.parse(ht);
        for (int k : depths) {
          std::size_t s = ray_state(cache.op(), ray, k);
          auto sample = martin_kernel(cache, h, s, d.r);
          std::cout << Json{{"h", G.format(h)}, {"state", cache.op().describe_state(s)}, {"r", d.r},
                            {"value", sample.value}, {"err", sample.error}, {"depth", k}}
                           .dump()
                    << '\n';
        }
      }
      return kOk;
    }
    if (metric_cmd->parsed()) {
      Direct d = direct_lab(c);
      GreenCache& cache = d.lab->cache();
      const GroupModel& G = d.lab->system().group;
      int radius = cache.op().ball().radius();
      if (depths.empty()) depths = {radius - 4, radius - 3, radius - 2};
      auto scheme = coefficients(cache, lambda, d.r, coef_radius >= 0 ? coef_radius : radius - 2);
      auto dist = martin_distance_along_rays(cache, parse_ray(G, ray_a), parse_ray(G, ray_b), d.r, scheme, depths);
      std::cout << Json{{"r", d.r}, {"lambda", lambda}, {"depths", dist.depths}, {"values", dist.values},
                        {"tails", dist.tails}, {"last_gap", dist.last_gap}, {"converged", dist.converged}}
                       .dump(2)
                << '\n';
      return kOk;
    }
    if (reduce_cmd->parsed() || riesz_cmd->parsed() || dom_cmd->parsed()) {
      Direct d = direct_lab(c);
      const TruncatedOperator& op = d.lab->cache().op();
      Measure mu = parse_measure(op, load_json_file(mu_path));
      const double tol = c.tol > 0 ? c.tol : 1e-10;
      Json out;
      if (reduce_cmd->parsed()) {
        auto red = reduce_measure(op, mu, parse_set(op, load_json_file(set_path)), d.r, tol);
        out = {{"r", d.r}, {"value", measure_json(op, red.value)}, {"above_mu", red.above_mu},
               {"off_on_A", red.off_on_A}, {"excess_violation", red.excess_violation}, {"ok", red.ok}};
      } else if (riesz_cmd->parsed()) {
        AtomSet interior(op.size());
        for (std::size_t s = 0; s < op.size(); ++s) interior[s] = op.interior(s) ? 1 : 0;
        auto rz = riesz_decompose(op, mu, d.r, interior, tol);
        out = {{"r", d.r}, {"mu0", measure_json(op, rz.mu0)}, {"nu", measure_json(op, rz.nu)},
               {"residual", rz.residual}, {"conformal_residual", rz.conformal_residual}};
      } else {
        Measure nu = parse_measure(op, load_json_file(nu_path));
        auto dom = domination_check(op, mu, nu, parse_set(op, load_json_file(set_path)), d.r, tol);
        out = {{"r", d.r}, {"dominated", dom.dominated}, {"margin", dom.margin},
               {"worst_atom", op.describe_state(dom.worst_atom)}, {"margin_on_A", dom.margin_on_A}};
        std::cout << out.dump(2) << '\n';
        return dom.dominated ? kOk : kAssertions;
      }
      std::cout << out.dump(2) << '\n';
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const PreconditionError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kUsage;
  } catch (const RangeError& e) {
    std::cerr << "truncation too small: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCrash;
  }
  return kUsage;
}
