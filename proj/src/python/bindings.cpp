// Python module _adviser. Structured values cross the boundary as JSON text;
// the adviser package wraps them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "adviser/backends.hpp"
#include "adviser/catalog.hpp"
#include "adviser/error.hpp"
#include "adviser/execution.hpp"
#include "adviser/gateway.hpp"
#include "adviser/results.hpp"
#include "json.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::string select_instance(const std::string& requirements, const std::string& catalog_path) {
  const auto snap = adviser::catalog::load_catalog_file(catalog_path);
  const auto req = json::parse(requirements).get<adviser::catalog::ResourceRequirements>();
  const auto sel = adviser::catalog::select_instance(req, snap);
  return json{{"instance", sel.instance}, {"rationale", sel.rationale}}.dump();
}

std::string estimate_cost(const std::string& instance, double wall_hours, int nodes) {
  const auto t = json::parse(instance).get<adviser::catalog::InstanceType>();
  return adviser::catalog::estimate_cost(t, wall_hours, nodes).to_string();
}

std::string build_mpi_envelope(int np, const std::string& plan) {
  return json(adviser::execution::build_mpi_envelope(np, json::parse(plan).get<adviser::execution::ProvisioningPlan>()))
      .dump();
}

std::string parse_run_command(const std::vector<std::string>& argv) {
  return json(adviser::gateway::parse_run_command(argv)).dump();
}

std::string calibrate_model(const std::vector<std::tuple<int, int, double>>& observations) {
  std::vector<adviser::backends::Observation> obs;
  for (const auto& [np, nodes, hours] : observations) obs.push_back({np, nodes, hours});
  return json(adviser::backends::calibrate_model(obs)).dump();
}

double model_wall_hours(int np, int nodes, const std::string& params) {
  return adviser::backends::model_wall_hours(np, nodes, json::parse(params).get<adviser::backends::SimParams>());
}

double sim_execute(int np, int nodes, const std::string& params, std::uint64_t repetition) {
  return adviser::backends::sim_execute(np, nodes, json::parse(params).get<adviser::backends::SimParams>(), repetition)
      .wall_time_hours;
}

std::vector<std::pair<int, double>> parallel_efficiency(const std::vector<std::pair<int, double>>& points) {
  std::vector<adviser::results::ScalingPoint> pts;
  for (const auto& [np, hours] : points) pts.push_back({np, hours});
  std::vector<std::pair<int, double>> out;
  for (const auto& e : adviser::results::parallel_efficiency(adviser::results::ScalingSeries(pts)))
    out.emplace_back(e.np, e.efficiency_percent);
  return out;
}

py::dict aggregate_repetitions(const std::vector<double>& samples, std::size_t warmup) {
  const auto m = adviser::results::aggregate_repetitions(samples, warmup);
  py::dict d;
  d["n"] = m.n;
  d["mean_seconds"] = m.mean_seconds;
  d["std_seconds"] = m.std_seconds;
  d["warmup_excluded"] = m.warmup_excluded;
  return d;
}

std::optional<std::string> transition(const std::string& state, const std::string& event) {
  auto next = adviser::execution::try_transition(adviser::execution::state_from_string(state),
                                                 adviser::execution::event_from_string(event));
  if (!next) return std::nullopt;
  return std::string(adviser::execution::to_string(*next));
}

}  // namespace

PYBIND11_MODULE(_adviser, m) {
  m.doc() = "Adviser core bindings";

  static PyObject* error_type = py::exception<adviser::Error>(m, "Error").release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const adviser::Error& e) {
      auto type = py::reinterpret_borrow<py::object>(error_type);
      py::object err = type(py::str(std::string(adviser::to_string(e.code())) + ": " + e.what()));
      err.attr("code") = std::string(adviser::to_string(e.code()));
      PyErr_SetObject(error_type, err.ptr());
    } catch (const json::exception& e) {
      auto type = py::reinterpret_borrow<py::object>(error_type);
      py::object err = type(py::str(std::string("InvalidArgument: ") + e.what()));
      err.attr("code") = "InvalidArgument";
      PyErr_SetObject(error_type, err.ptr());
    }
  });

  m.def("decompose_grid", [](int np) {
    const auto g = adviser::execution::decompose_grid(np);
    return std::make_pair(g.nx, g.ny);
  });
  m.def("select_instance", &select_instance, py::arg("requirements"), py::arg("catalog_path"));
  m.def("estimate_cost", &estimate_cost, py::arg("instance"), py::arg("wall_hours"), py::arg("nodes"));
  m.def("build_mpi_envelope", &build_mpi_envelope, py::arg("np"), py::arg("plan"));
  m.def("parse_run_command", &parse_run_command, py::arg("argv"));
  m.def("calibrate_model", &calibrate_model, py::arg("observations"));
  m.def("model_wall_hours", &model_wall_hours, py::arg("np"), py::arg("nodes"), py::arg("params"));
  m.def("sim_execute", &sim_execute, py::arg("np"), py::arg("nodes"), py::arg("params"), py::arg("repetition") = 0);
  m.def("parallel_efficiency", &parallel_efficiency, py::arg("points"));
  m.def("aggregate_repetitions", &aggregate_repetitions, py::arg("samples"), py::arg("warmup") = 0);
  m.def("transition", &transition, py::arg("state"), py::arg("event"));
}
