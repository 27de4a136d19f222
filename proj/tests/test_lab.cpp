#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "martinbench/error.hpp"
#include "martinbench/lab.hpp"
#include "martinbench/parallel.hpp"

using namespace martinbench;

namespace {

Json base_config() {
  return Json::parse(R"({
    "schema_version": 1,
    "system": "srw",
    "profile": "quick",
    "truncation": {"depth": 1, "radius": 5},
    "r_grid": [1],
    "seed": 3,
    "scans": []
  })");
}

std::string config_error(const Json& j) {
  try {
    LabConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("configuration validation names the field") {
  CHECK(config_error(base_config()).empty());

  Json j = base_config();
  j["schema_version"] = 7;
  CHECK(config_error(j).rfind("schema_version", 0) == 0);

  j = base_config();
  j["bogus"] = 1;
  CHECK(config_error(j).rfind("bogus", 0) == 0);

  j = base_config();
  j["system"] = "no-such-fixture";
  CHECK(config_error(j).rfind("system.fixture", 0) == 0);

  j = base_config();
  j["truncation"]["radius"] = 40;
  CHECK(config_error(j).rfind("truncation.radius", 0) == 0);

  j = base_config();
  j["truncation"]["tol"] = 2.0;
  CHECK(config_error(j).rfind("truncation.tol", 0) == 0);

  j = base_config();
  j["scans"] = Json::array({Json::object({{"r", 1}})});
  CHECK(config_error(j).find("scans[0].kind") != std::string::npos);

  j = base_config();
  j.erase("system");
  CHECK(config_error(j).rfind("system", 0) == 0);

  CHECK_THROWS_AS(LabConfig::load("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("explicit system descriptions") {
  Json sys = Json::parse(R"({
    "base": {"alphabet": 2, "probabilities": [0.5, 0.5]},
    "group": {"kind": "free", "rank": 1},
    "kappa": ["a", "A"]
  })");
  auto s = system_from_json(sys);
  CHECK(s.base.alphabet() == 2);
  CHECK(s.group.letter_count() == 2);
  auto desc = system_to_json(s);
  CHECK(desc["kappa"] == Json::array({"a", "A"}));
  CHECK(desc["alphabet"] == 2);

  sys["kappa"] = Json::array({"a"});
  CHECK_THROWS_AS(system_from_json(sys), ConfigError);
}

TEST_CASE("r grid resolution") {
  Lab lab(LabConfig::from_json(base_config()));
  double R = lab.R_hat();
  CHECK(R > 1);
  CHECK(lab.resolve_r(Json(0.5)) == 0.5);
  CHECK(lab.resolve_r(Json("R")) == R);
  CHECK(lab.resolve_r(Json("0.99R")) == doctest::Approx(0.99 * R));
  CHECK_THROWS_AS(lab.resolve_r(Json("0.99")), ConfigError);
  CHECK_THROWS_AS(lab.resolve_r(Json("xR")), ConfigError);
}

TEST_CASE("stratified sampling") {
  auto all = stratified_sample(10, 20, 1, [](std::size_t) { return 0; });
  CHECK(all.size() == 10);
  auto strat = [](std::size_t i) { return static_cast<int>(i % 4); };
  auto a = stratified_sample(1000, 100, 42, strat);
  auto b = stratified_sample(1000, 100, 42, strat);
  auto c = stratified_sample(1000, 100, 43, strat);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == 100);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 100);
  int per[4] = {0, 0, 0, 0};
  for (auto i : a) ++per[i % 4];
  for (int k : per) CHECK(k == 25);
}

TEST_CASE("runs and records") {
  Json j = base_config();
  auto empty = run(LabConfig::from_json(j));
  CHECK(empty.passed);
  CHECK(empty.records.empty());

  j["scans"] = Json::parse(R"([
    {"kind": "rho"},
    {"kind": "kernel", "ray": {"prefix": "1", "period": "a"}, "depths": [2, 3], "r": 1},
    {"kind": "decay", "r": 1, "max_n": 3}
  ])");
  auto dir = std::filesystem::temp_directory_path() / "martinbench-lab-test";
  std::filesystem::remove_all(dir);
  j["output"] = dir.string();
  int saved = thread_count();
  set_thread_count(1);
  auto one = run(LabConfig::from_json(j));
  set_thread_count(3);
  auto three = run(LabConfig::from_json(j));
  set_thread_count(saved);
  REQUIRE(one.records.size() == three.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) CHECK(one.records[i].dump() == three.records[i].dump());
  CHECK(one.records.front()["seq"] == 0);
  CHECK(std::filesystem::exists(dir / "records.jsonl"));
  CHECK(std::filesystem::exists(dir / "summary.json"));
  std::ifstream in(dir / "records.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) {
    CHECK(Json::parse(line).contains("scan"));
    ++lines;
  }
  CHECK(lines == one.records.size());
  std::filesystem::remove_all(dir);

  j.erase("output");
  j["scans"] = Json::parse(R"([{"kind": "warp"}])");
  CHECK_THROWS_AS(run(LabConfig::from_json(j)), ConfigError);
}
