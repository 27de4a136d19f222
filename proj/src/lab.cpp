#include "martinbench/lab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "martinbench/error.hpp"
#include "martinbench/fixtures.hpp"
#include "martinbench/hash.hpp"

namespace martinbench {

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

template <class T>
T field(const Json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

template <class T>
T required(const Json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) throw ConfigError(path + "." + key + ": missing required field");
  return field<T>(obj, path, key, T{});
}

GroupModel group_from_json(const Json& g) {
  const std::string path = "system.group";
  if (!g.is_object()) throw ConfigError(path + ": expected an object");
  auto kind = required<std::string>(g, path, "kind");
  if (kind == "free") return GroupModel::free(field<int>(g, path, "rank", 2));
  if (kind == "free_product") return GroupModel::free_product(required<std::vector<int>>(g, path, "orders"));
  if (kind == "presented") {
    auto names = required<std::string>(g, path, "names");
    auto inverse = required<std::vector<int>>(g, path, "inverse");
    auto rel_text = field<std::vector<std::string>>(g, path, "relators", {});
    bool verified = field<bool>(g, path, "dehn_verified", false);
    GroupModel tmp = GroupModel::presented(names, inverse, {}, verified);
    std::vector<Word> relators;
    for (const auto& r : rel_text) relators.push_back(tmp.parse_raw(r));
    return GroupModel::presented(names, inverse, relators, verified);
  }
  throw ConfigError(path + ".kind: unknown group kind '" + kind + "'");
}

}  // namespace

ExtensionSystem system_from_json(const Json& j) {
  auto fixture = [](const std::string& name) {
    try {
      return fixture_by_name(name);
    } catch (const Error& e) {
      throw ConfigError(std::string("system.fixture: ") + e.what());
    }
  };
  if (j.is_string()) return fixture(j.get<std::string>());
  if (!j.is_object()) throw ConfigError("system: expected a fixture name or an object");
  if (j.contains("fixture")) return fixture(required<std::string>(j, "system", "fixture"));
  const Json& b = j.contains("base") ? j.at("base") : throw ConfigError("system.base: missing required field");
  const std::string bp = "system.base";
  int A = required<int>(b, bp, "alphabet");
  if (A < 1 || A > 64) throw ConfigError(bp + ".alphabet: must lie in [1, 64]");
  Subshift shift = b.contains("transitions")
                       ? Subshift(A, required<std::vector<std::vector<int>>>(b, bp, "transitions"))
                       : Subshift::full(A);
  int k = field<int>(b, bp, "potential_depth", 1);
  std::vector<double> table;
  if (b.contains("potential")) {
    table = required<std::vector<double>>(b, bp, "potential");
  } else if (b.contains("probabilities")) {
    for (double p : required<std::vector<double>>(b, bp, "probabilities")) {
      if (!(p > 0)) throw ConfigError(bp + ".probabilities: entries must be positive");
      table.push_back(std::log(p));
    }
    k = 1;
  } else {
    table.assign(static_cast<std::size_t>(std::pow(A, k)), 0.0);
  }
  if (table.size() != static_cast<std::size_t>(std::llround(std::pow(A, k)))) {
    throw ConfigError(bp + ".potential: expected alphabet^potential_depth entries");
  }
  BaseSystem base(std::move(shift), Potential(A, k, table), field<double>(b, bp, "r_shift", 0.5),
                  field<double>(b, bp, "alpha_reg", 1.0));
  if (!j.contains("group")) throw ConfigError("system.group: missing required field");
  GroupModel G = group_from_json(j.at("group"));
  auto ktext = required<std::vector<std::string>>(j, "system", "kappa");
  if (static_cast<int>(ktext.size()) != A) throw ConfigError("system.kappa: need one label per symbol");
  std::vector<Word> kappa;
  for (const auto& t : ktext) kappa.push_back(G.parse(t));
  return ExtensionSystem(std::move(base), std::move(G), std::move(kappa),
                         field<std::string>(j, "system", "name", "custom"));
}

Json system_to_json(const ExtensionSystem& sys) {
  Json j;
  j["name"] = sys.name;
  j["alphabet"] = sys.base.alphabet();
  j["potential_depth"] = sys.base.raw().depth();
  j["group"] = sys.group.describe();
  Json k = Json::array();
  for (const auto& w : sys.kappa) k.push_back(sys.group.format(w));
  j["kappa"] = k;
  j["fingerprint"] = hex64(sys.fingerprint());
  return j;
}

Profile profile_by_name(const std::string& name) {
  if (name == "quick") return {"quick", 1, 8};
  if (name == "standard") return {"standard", 1, 12};
  throw ConfigError("profile: unknown profile '" + name + "' (expected quick or standard)");
}

LabConfig LabConfig::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known = {"schema_version", "system", "profile", "truncation",
                                              "r_grid", "seed", "output", "scans"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(it.key() + ": unknown top-level field");
  LabConfig c;
  c.raw = j;
  int version = field<int>(j, "config", "schema_version", -1);
  if (version != kSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion));
  }
  if (!j.contains("system")) throw ConfigError("system: missing required field");
  system_from_json(j.at("system"));
  c.profile = field<std::string>(j, "config", "profile", "quick");
  Profile p = profile_by_name(c.profile);
  c.depth = p.depth;
  c.radius = p.radius;
  bool explicit_depth = false;
  if (j.contains("truncation")) {
    const Json& t = j.at("truncation");
    if (!t.is_object()) throw ConfigError("truncation: expected an object");
    explicit_depth = t.contains("depth");
    c.depth = field<int>(t, "truncation", "depth", c.depth);
    c.radius = field<int>(t, "truncation", "radius", c.radius);
    c.tol = field<double>(t, "truncation", "tol", c.tol);
    if (!(c.tol > 0 && c.tol < 1)) throw ConfigError("truncation.tol: must lie in (0, 1)");
    if (c.radius < 0 || c.radius > 16) throw ConfigError("truncation.radius: must lie in [0, 16]");
  }
  if (!explicit_depth) {
    // profiles give the cylinder depth for depth-1 labels; longer memory needs more
    ExtensionSystem sys = system_from_json(j.at("system"));
    c.depth = std::max(c.depth, sys.base.depth() - 1);
  }
  if (j.contains("r_grid")) {
    c.r_grid = j.at("r_grid");
    if (!c.r_grid.is_array()) throw ConfigError("r_grid: expected an array");
  }
  c.seed = field<std::uint64_t>(j, "config", "seed", 1);
  c.output = field<std::string>(j, "config", "output", "");
  if (j.contains("scans")) {
    c.scans = j.at("scans");
    if (!c.scans.is_array()) throw ConfigError("scans: expected an array");
    for (std::size_t i = 0; i < c.scans.size(); ++i) {
      if (!c.scans[i].is_object() || !c.scans[i].contains("kind") || !c.scans[i]["kind"].is_string()) {
        throw ConfigError("scans[" + std::to_string(i) + "].kind: missing or not a string");
      }
    }
  }
  Json hashed = j;
  hashed.erase("output");
  Fnv1a h;
  h.add(std::string_view(hashed.dump()));
  c.hash = h.value();
  return c;
}

LabConfig LabConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------

Lab::Lab(LabConfig cfg) : cfg_(std::move(cfg)) {
  sys_ = std::make_unique<ExtensionSystem>(system_from_json(cfg_.raw.at("system")));
}

GreenCache& Lab::cache(int radius, int depth) {
  if (radius < 0) radius = cfg_.radius;
  if (depth < 0) depth = cfg_.depth;
  auto key = std::make_pair(radius, depth);
  auto it = caches_.find(key);
  if (it != caches_.end()) return *it->second;
  auto op = TruncatedOperator::on_ball(*sys_, depth, radius);
  auto c = std::make_unique<GreenCache>(op, cfg_.tol);
  return *caches_.emplace(key, std::move(c)).first->second;
}

const RhoEstimate& Lab::rho() {
  if (!rho_) rho_ = rho_estimate(*sys_, cfg_.depth, cfg_.radius);
  return *rho_;
}

double Lab::R_hat() {
  if (R_hat_) return *R_hat_;
  if (auto up = radial_upper_bound(*sys_); up && *up > 0) {
    R_hat_ = (1 - 1e-12) / *up;
    fitted["rho_upper"] = *up;
    fitted["R_certified"] = true;
  } else {
    R_hat_ = rho().R_hat;
    fitted["R_certified"] = rho().R_certified;
  }
  fitted["R_hat"] = *R_hat_;
  return *R_hat_;
}

double Lab::resolve_r(const Json& e) {
  if (e.is_number()) return e.get<double>();
  if (!e.is_string()) throw ConfigError("r grid entry must be a number or a string like \"0.99R\"");
  std::string s = e.get<std::string>();
  if (s.empty() || s.back() != 'R') throw ConfigError("r grid entry '" + s + "': expected a number or <factor>R");
  double factor = 1;
  if (s.size() > 1) {
    try {
      std::size_t used = 0;
      factor = std::stod(s.substr(0, s.size() - 1), &used);
      if (used != s.size() - 1) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw ConfigError("r grid entry '" + s + "': malformed factor");
    }
  }
  return factor * R_hat();
}

std::vector<double> Lab::resolve_grid(const Json& grid) {
  std::vector<double> out;
  if (!grid.is_array()) throw ConfigError("r_grid: expected an array");
  for (const auto& e : grid) out.push_back(resolve_r(e));
  return out;
}

void Lab::emit(const std::string& scan, Json record) {
  record["seq"] = seq_++;
  record["scan"] = scan;
  record["config_hash"] = hex64(cfg_.hash);
  records_.push_back(std::move(record));
}

void Lab::assert_that(const std::string& scan, const std::string& name, bool passed,
                      const std::string& detail) {
  assertions_.push_back({scan, name, passed, detail});
}

void Lab::add_csv_row(const std::string& file, const std::string& header, const std::string& row) {
  auto& entry = csv_[file];
  entry.first = header;
  entry.second.push_back(row);
}

bool Lab::all_passed() const {
  return std::all_of(assertions_.begin(), assertions_.end(), [](const Assertion& a) { return a.passed; });
}

void Lab::write(const std::string& dir, const Json& summary) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "records.jsonl", std::ios::trunc);
    for (const auto& r : records_) out << r.dump() << '\n';
  }
  {
    std::ofstream out(fs::path(dir) / "summary.json", std::ios::trunc);
    out << summary.dump(2) << '\n';
  }
  for (const auto& [name, content] : csv_) {
    std::ofstream out(fs::path(dir) / name, std::ios::trunc);
    out << content.first << '\n';
    for (const auto& row : content.second) out << row << '\n';
  }
}

// ---------------------------------------------------------------------------

Json run_scan(Lab& lab, const Json& params) {
  const std::string kind = params.at("kind").get<std::string>();
  if (kind == "ancona") return ancona_scan(lab, params);
  if (kind == "relative_ancona") return relative_ancona_scan(lab, params);
  if (kind == "gl") return gl_scan(lab, params);
  if (kind == "superexp") return superexp_decay_scan(lab, params);
  if (kind == "sphere_hr") return sphere_hr_scan(lab, params);
  if (kind == "decay") return decay_scan(lab, params);
  if (kind == "rho") return rho_scan(lab, params);
  if (kind == "green") return green_scan(lab, params);
  if (kind == "kernel") return kernel_scan(lab, params);
  if (kind == "boundary_measure") return boundary_measure_scan(lab, params);
  if (kind == "holder") return holder_scan(lab, params);
  if (kind == "diagnostics") return diagnostics_scan(lab, params);
  throw ConfigError("scans[].kind: unknown scan kind '" + kind + "'");
}

RunResult run(const LabConfig& cfg) {
  auto start = std::chrono::steady_clock::now();
  Lab lab(cfg);
  Json scans = Json::array();
  for (const auto& params : cfg.scans) {
    const std::string kind = params.at("kind").get<std::string>();
    auto t0 = std::chrono::steady_clock::now();
    Json s;
    try {
      s = run_scan(lab, params);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      s = Json{{"error", e.what()}};
      lab.assert_that(kind, "completed", false, e.what());
    }
    s["kind"] = kind;
    s["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    scans.push_back(std::move(s));
  }
  RunResult res;
  Json& sum = res.summary;
  sum["schema_version"] = kSchemaVersion;
  sum["config_hash"] = hex64(cfg.hash);
  sum["profile"] = cfg.profile;
  sum["truncation"] = {{"depth", cfg.depth}, {"radius", cfg.radius}, {"tol", cfg.tol}};
  sum["seed"] = cfg.seed;
  sum["system"] = system_to_json(lab.system());
  sum["scans"] = scans;
  sum["fitted"] = lab.fitted;
  Json asserts = Json::array();
  for (const auto& a : lab.assertions())
    asserts.push_back({{"scan", a.scan}, {"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  sum["assertions"] = asserts;
  sum["records"] = lab.records().size();
  res.passed = lab.all_passed();
  sum["passed"] = res.passed;
  sum["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!cfg.output.empty()) lab.write(cfg.output, sum);
  res.records = lab.records();
  return res;
}

std::vector<std::size_t> stratified_sample(std::size_t n, std::size_t count, std::uint64_t seed,
                                           const std::function<int(std::size_t)>& stratum) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  if (n <= count) return all;
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[stratum(i)].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  std::size_t remaining = count, left = n;
  for (auto& [key, members] : groups) {
    // proportional share, rounded so the shares sum to `count`
    std::size_t share = (members.size() * remaining + left / 2) / left;
    share = std::min(share, members.size());
    remaining -= share;
    left -= members.size();
    for (std::size_t i = 0; i < share; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng() % (members.size() - i));
      std::swap(members[i], members[j]);
    }
    std::sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(share));
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(share));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace martinbench
