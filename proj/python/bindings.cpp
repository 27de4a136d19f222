#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "martinbench/error.hpp"
#include "martinbench/extension.hpp"
#include "martinbench/fixtures.hpp"
#include "martinbench/lab.hpp"
#include "martinbench/martin.hpp"
#include "martinbench/parallel.hpp"

namespace py = pybind11;
using namespace martinbench;

namespace {

// One fixture plus the Green cache of a single truncation.
class Truncation {
 public:
  Truncation(const std::string& fixture, int depth, int radius, double tol)
      : sys_(fixture_by_name(fixture)), cache_(TruncatedOperator::on_ball(sys_, depth, radius), tol) {}

  std::size_t size() const { return cache_.op().size(); }
  std::size_t state(const std::string& group_word, std::size_t cylinder) const {
    auto pos = cache_.op().position_of(sys_.group.parse(group_word));
    if (!pos) throw RangeError("element outside the ball: " + group_word);
    if (cylinder >= cache_.op().word_count()) throw PreconditionError("cylinder index out of range");
    return cache_.op().state(cylinder, *pos);
  }
  std::string describe(std::size_t s) const { return cache_.op().describe_state(s); }

  std::pair<double, double> green(const std::string& f, const std::string& at, std::size_t cylinder, double r) {
    auto g = cache_.forward_group(sys_.group.parse(f), r);
    return {g->values.at(state(at, cylinder)), g->error()};
  }
  std::pair<double, double> kernel(const std::string& h, const std::string& at, std::size_t cylinder, double r) {
    auto k = martin_kernel(cache_, sys_.group.parse(h), state(at, cylinder), r);
    return {k.value, k.error};
  }
  std::vector<double> decay_roots(double r, int max_n) {
    return green_decay_scan(cache_, {}, r, max_n).roots;
  }

 private:
  ExtensionSystem sys_;
  GreenCache cache_;
};

py::dict rho(const std::string& fixture, int depth, int radius) {
  auto est = rho_estimate(fixture_by_name(fixture), depth, radius);
  py::dict d;
  d["estimate"] = est.estimate;
  d["lower"] = est.lower;
  d["upper"] = est.has_upper ? py::cast(est.upper) : py::none();
  d["R_hat"] = est.R_hat;
  d["R_certified"] = est.R_certified;
  return d;
}

py::tuple run_config(const std::string& text) {
  auto res = run(LabConfig::from_json(Json::parse(text)));
  std::vector<std::string> records;
  for (const auto& r : res.records) records.push_back(r.dump());
  return py::make_tuple(res.summary.dump(), records, res.passed);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Green functions and Martin kernels of truncated group extensions";

  static py::exception<Error> base(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

  m.def("fixture_names", &fixture_names);
  m.def("set_thread_count", &set_thread_count, py::arg("n"));
  m.def("rho_estimate", &rho, py::arg("fixture"), py::arg("depth") = 1, py::arg("radius"));
  m.def("green_limit", [](const std::string& fixture, int depth, int radius, double r, bool critical) {
        auto lim = green_limit(fixture_by_name(fixture), depth, radius, r, critical);
        return py::make_tuple(lim.estimate, lim.values);
      },
      py::arg("fixture"), py::arg("depth"), py::arg("radius"), py::arg("r"), py::arg("critical") = false);
  m.def("_run_config", &run_config, py::arg("config_json"));

  py::class_<Truncation>(m, "Truncation")
      .def(py::init<const std::string&, int, int, double>(), py::arg("fixture"), py::arg("depth") = 1,
           py::arg("radius") = 8, py::arg("tol") = 1e-11)
      .def_property_readonly("size", &Truncation::size)
      .def("state", &Truncation::state, py::arg("group_word"), py::arg("cylinder") = 0)
      .def("describe", &Truncation::describe)
      .def("green", &Truncation::green, py::arg("f"), py::arg("at"), py::arg("cylinder") = 0, py::arg("r") = 1.0,
           "G_r(X_f) at the atom (cylinder, at): (value, error bound)")
      .def("kernel", &Truncation::kernel, py::arg("h"), py::arg("at"), py::arg("cylinder") = 0, py::arg("r") = 1.0)
      .def("decay_roots", &Truncation::decay_roots, py::arg("r"), py::arg("max_n"));
}
