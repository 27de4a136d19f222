#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "martinbench/extension.hpp"

namespace martinbench {

using Json = nlohmann::json;

constexpr int kSchemaVersion = 1;

/// Builds an extension system from a fixture name or an explicit description.
ExtensionSystem system_from_json(const Json& j);
Json system_to_json(const ExtensionSystem& sys);

struct Profile {
  std::string name;
  int depth = 1;
  int radius = 8;
};
Profile profile_by_name(const std::string& name);

/// Validated experiment configuration.
struct LabConfig {
  Json raw;
  std::string profile = "quick";
  int depth = 1;   // cylinder depth m
  int radius = 8;  // ball radius n
  double tol = 1e-11;  // relative series tolerance of cached solves
  Json r_grid = Json::array({1.0});
  std::uint64_t seed = 1;
  std::string output;
  Json scans = Json::array();
  std::uint64_t hash = 0;

  /// Throws ConfigError naming the offending field.
  static LabConfig from_json(const Json& j);
  static LabConfig load(const std::string& path);
};

struct Assertion {
  std::string scan;
  std::string name;
  bool passed = true;
  std::string detail;
};

/// Shared state for the scans of one run: system, operator caches, R_hat and
/// the ordered record stream.
class Lab {
 public:
  explicit Lab(LabConfig cfg);

  const LabConfig& config() const { return cfg_; }
  const ExtensionSystem& system() const { return *sys_; }

  /// Green cache on the ball of the given radius (default: configured radius).
  GreenCache& cache(int radius = -1, int depth = -1);
  /// Convergence radius used for "R" entries of r grids.
  double R_hat();
  const RhoEstimate& rho();
  bool rho_computed() const { return rho_.has_value(); }

  /// Resolves numbers and strings like "R" or "0.99R".
  double resolve_r(const Json& entry);
  std::vector<double> resolve_grid(const Json& grid);

  void emit(const std::string& scan, Json record);
  void assert_that(const std::string& scan, const std::string& name, bool passed,
                   const std::string& detail = "");
  void add_csv_row(const std::string& file, const std::string& header, const std::string& row);

  const std::vector<Json>& records() const { return records_; }
  const std::vector<Assertion>& assertions() const { return assertions_; }
  bool all_passed() const;
  std::uint64_t next_seq() const { return seq_; }

  /// Constants fitted by earlier scans of the run (lambda_GL, C_max, ...).
  Json fitted = Json::object();

  /// Writes records.jsonl, summary.json and CSV files into `dir`.
  void write(const std::string& dir, const Json& summary) const;

 private:
  LabConfig cfg_;
  std::unique_ptr<ExtensionSystem> sys_;
  std::map<std::pair<int, int>, std::unique_ptr<GreenCache>> caches_;
  std::optional<RhoEstimate> rho_;
  std::optional<double> R_hat_;
  std::vector<Json> records_;
  std::vector<Assertion> assertions_;
  std::map<std::string, std::pair<std::string, std::vector<std::string>>> csv_;
  std::uint64_t seq_ = 0;
};

/// Scan entry points. Each takes the scan's parameter block and returns its
/// summary; records and assertions go to the lab.
Json ancona_scan(Lab& lab, const Json& params);
Json relative_ancona_scan(Lab& lab, const Json& params);
Json gl_scan(Lab& lab, const Json& params);
Json superexp_decay_scan(Lab& lab, const Json& params);
Json sphere_hr_scan(Lab& lab, const Json& params);
Json decay_scan(Lab& lab, const Json& params);
Json rho_scan(Lab& lab, const Json& params);
Json green_scan(Lab& lab, const Json& params);
Json kernel_scan(Lab& lab, const Json& params);
Json boundary_measure_scan(Lab& lab, const Json& params);
Json holder_scan(Lab& lab, const Json& params);
Json diagnostics_scan(Lab& lab, const Json& params);

/// Dispatches on params["kind"].
Json run_scan(Lab& lab, const Json& params);

struct RunResult {
  Json summary;
  std::vector<Json> records;
  bool passed = true;
};

/// Runs every configured scan; writes artifacts when the config names an output directory.
RunResult run(const LabConfig& cfg);

/// Selects `count` of `n` indices, spread over the strata given by `stratum`,
/// reproducibly from `seed`. Returns all indices when n <= count.
std::vector<std::size_t> stratified_sample(std::size_t n, std::size_t count, std::uint64_t seed,
                                           const std::function<int(std::size_t)>& stratum);

/// Ancona ratio G(X_h)(x,g) / G(X_z G(X_h))(x,g) for u = h^-1 g and v = h^-1 z,
/// from translated kernels.
std::optional<double> ancona_ratio(const TranslatedKernel& k, std::size_t x, std::span<const Letter> u,
                                   std::span<const Letter> v);

}  // namespace martinbench
