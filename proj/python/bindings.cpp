#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wavefield/boundary.hpp"
#include "wavefield/io.hpp"
#include "wavefield/scenarios.hpp"
#include "wavefield/solver.hpp"

namespace py = pybind11;
using namespace wavefield;

namespace {

std::vector<cplx> evolve(const Grid& grid, std::vector<cplx> psi, std::vector<double> potential, long long steps) {
  if (psi.size() != grid.n) throw std::invalid_argument("psi must have grid.n samples");
  GridFunction f{std::move(psi)};
  const Propagator p(grid, std::move(potential));
  for (long long s = 0; s < steps; ++s) p.step(f);
  return f.values;
}

py::dict run(const std::string& name, const std::map<std::string, std::string>& settings) {
  ScenarioConfig cfg;
  for (const auto& [k, v] : settings) cfg.set(k, v);
  RunResult r;
  {
    py::gil_scoped_release release;
    r = run_scenario(name, cfg);
  }
  py::list checks;
  for (const auto& c : r.checks) {
    py::dict d;
    d["name"] = c.name;
    d["passed"] = c.passed;
    d["detail"] = c.detail;
    checks.append(d);
  }
  py::dict out;
  out["scenario"] = r.scenario;
  out["exit_code"] = r.exit_code;
  out["passed"] = r.passed();
  out["checks"] = checks;
  out["summary_json"] = io::dump_json(r.summary);
  return out;
}

}  // namespace

PYBIND11_MODULE(_wavefield, m) {
  m.doc() = "Local wave-field simulator core";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<Grid>(m, "Grid")
      .def(py::init([](double x_min, double x_max, std::size_t n, double dt) {
             Grid g{x_min, x_max, n, dt};
             g.validate();
             return g;
           }),
           py::arg("x_min") = -64.0, py::arg("x_max") = 64.0, py::arg("n") = 1024, py::arg("dt") = 0.005)
      .def_readonly("x_min", &Grid::x_min)
      .def_readonly("x_max", &Grid::x_max)
      .def_readonly("n", &Grid::n)
      .def_readonly("dt", &Grid::dt)
      .def_property_readonly("dx", &Grid::dx)
      .def("x", &Grid::x);

  m.def(
      "gaussian",
      [](const Grid& g, double x0, double sigma, double k0) { return GridFunction::gaussian(g, x0, sigma, k0).values; },
      py::arg("grid"), py::arg("x0"), py::arg("sigma"), py::arg("k0") = 0.0,
      "Normalized Gaussian samples with density width sigma.");
  m.def("evolve", &evolve, py::arg("grid"), py::arg("psi"), py::arg("potential") = std::vector<double>{},
        py::arg("steps") = 1, "Split-step evolution of psi for a number of steps.");
  m.def(
      "current", [](const Grid& g, std::vector<cplx> psi) { return current(GridFunction{std::move(psi)}, g); },
      py::arg("grid"), py::arg("psi"));
  m.def(
      "find_initial_boundary",
      [](const Grid& g, const std::vector<double>& rho1, const std::vector<double>& rho2) {
        return find_initial_boundary(rho1, rho2, g);
      },
      py::arg("grid"), py::arg("rho1"), py::arg("rho2"));
  m.def(
      "transfer_matrices",
      [](const CMatrix& u, const CVector& left, const CVector& right) {
        return transfer_matrices(Operator::on_qubits(u), left, right);
      },
      py::arg("u"), py::arg("state_left"), py::arg("state_right"));

  m.def("free_gaussian_width", [](double s, double t) { return analytic::free_gaussian_width(s, t); },
        py::arg("sigma0"), py::arg("t"));
  m.def("barrier_transmission", [](double k, double v, double w) { return analytic::barrier_transmission(k, v, w); },
        py::arg("k"), py::arg("height"), py::arg("width"));
  m.def(
      "packet_transmission",
      [](double k0, double s, double v, double w) { return analytic::packet_transmission(k0, s, v, w); },
      py::arg("k0"), py::arg("sigma_x"), py::arg("height"), py::arg("width"));

  m.def("scenarios", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : scenario_registry()) out.emplace_back(s.name, s.description);
    return out;
  });
  m.def(
      "scenario_defaults", [](const std::string& name) { return find_scenario(name).defaults; }, py::arg("name"));
  m.def("_run", &run, py::arg("name"), py::arg("config"));
}
