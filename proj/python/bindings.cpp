#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "lumpcheck/cli.hpp"
#include "lumpcheck/dpm.hpp"
#include "lumpcheck/h2.hpp"
#include "lumpcheck/lpm.hpp"
#include "lumpcheck/mor.hpp"
#include "lumpcheck/sim.hpp"

namespace py = pybind11;
using namespace lumpcheck;

namespace {

SecondOrderSystem second_order(const Matrix& M, const Matrix& K, const Matrix& R, const Matrix& F,
                               const Matrix& C) {
  return SecondOrderSystem(M.sparseView(), K.sparseView(), R.sparseView(), F, C);
}

StateSpaceSystem state_space(const Matrix& E, const Matrix& A, const Matrix& B, const Matrix& C) {
  return StateSpaceSystem(E, A, B, C);
}

py::dict family_dict(const RomFamily& f) {
  std::vector<Index> orders;
  std::vector<double> errors;
  for (const auto& s : f.steps) {
    orders.push_back(s.order);
    errors.push_back(s.certified_error);
  }
  py::dict d;
  d["fom_h2"] = f.fom_h2;
  d["target_rel"] = f.target_rel;
  d["target_met"] = f.target_met;
  d["stop_reason"] = f.stop_reason;
  d["orders"] = orders;
  d["certified_errors"] = errors;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulation-free consistency checks between lumped and distributed models";

  py::register_exception<InvalidModelError>(m, "InvalidModelError");
  py::register_exception<UnstableSystemError>(m, "UnstableSystemError");
  py::register_exception<Error>(m, "Error");

  m.def("h2_norm_second_order",
        [](const Matrix& M, const Matrix& K, const Matrix& R, const Matrix& F, const Matrix& C) {
          return h2_norm(second_order(M, K, R, F, C));
        },
        py::arg("M"), py::arg("K"), py::arg("R"), py::arg("F"), py::arg("C"),
        "H2 norm of M q'' + R q' + K q = F h, y = C q.");
  m.def("h2_norm_state_space",
        [](const Matrix& E, const Matrix& A, const Matrix& B, const Matrix& C) {
          return h2_norm(state_space(E, A, B, C));
        },
        py::arg("E"), py::arg("A"), py::arg("B"), py::arg("C"));
  m.def("h2_norm_quadrature",
        [](const Matrix& E, const Matrix& A, const Matrix& B, const Matrix& C, double tol) {
          return h2_norm_quadrature(state_space(E, A, B, C), tol);
        },
        py::arg("E"), py::arg("A"), py::arg("B"), py::arg("C"), py::arg("tol") = 1e-10);
  m.def("model_h2",
        [](const std::string& path) { return h2_norm(load_model(path).system); },
        py::arg("path"), "H2 norm of an LPM document or a DPM manifest.");

  m.def("bar_fem",
        [](Index elements, double length, double area, double youngs, double density, double alpha,
           double beta) {
          BarParameters bar;
          bar.elements = elements;
          bar.length = length;
          bar.area = area;
          bar.youngs_modulus = youngs;
          bar.density = density;
          bar.alpha = alpha;
          bar.beta = beta;
          const auto sys = assemble_bar_fem(bar);
          py::dict d;
          d["M"] = Matrix(sys.M());
          d["K"] = Matrix(sys.K());
          d["R"] = Matrix(sys.R());
          d["F"] = sys.F();
          d["C"] = sys.Cout();
          d["first_frequency"] = bar_first_frequency(bar);
          return d;
        },
        py::arg("elements"), py::arg("length") = 1.0, py::arg("area") = 1.0,
        py::arg("youngs") = 1.0, py::arg("density") = 1.0, py::arg("alpha") = 0.0,
        py::arg("beta") = 0.0, "Clamped bar FEM matrices (dense) with tip force and tip output.");

  m.def("total_mass", [](const std::string& path) { return total_mass(load_lpm(path)); },
        py::arg("lpm_path"));

  m.def("check",
        [](const std::string& lpm_path, const std::string& dpm_path, double tol, double target,
           Index max_order, bool validate) {
          CheckOptions opt;
          opt.tol = tol;
          opt.target = target;
          opt.max_order = max_order;
          opt.validate = validate;
          return run_check(load_lpm(lpm_path), load_dpm_manifest(dpm_path), opt).report.to_json();
        },
        py::arg("lpm_path"), py::arg("dpm_path"), py::arg("tol") = kDefaultBoundTolerance,
        py::arg("target") = 0.01, py::arg("max_order") = 100, py::arg("validate") = false,
        "Runs the consistency check and returns the report as JSON text.");

  m.def("reduce",
        [](const std::string& dpm_path, double target, Index max_order) {
          CheckOptions opt;
          opt.target = target;
          opt.max_order = max_order;
          return family_dict(run_reduce(load_dpm_manifest(dpm_path), opt));
        },
        py::arg("dpm_path"), py::arg("target") = 0.01, py::arg("max_order") = 100);

  m.def("simulate",
        [](const Matrix& E, const Matrix& A, const Matrix& B, const Matrix& C,
           const std::string& signal, double dt, double horizon) {
          const auto traj = backward_euler(state_space(E, A, B, C), InputSignal::parse(signal),
                                           Vector(), dt, horizon);
          return py::make_tuple(traj.times, traj.outputs);
        },
        py::arg("E"), py::arg("A"), py::arg("B"), py::arg("C"), py::arg("signal"), py::arg("dt"),
        py::arg("horizon"), "Backward Euler from rest; returns (times, outputs).");

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = run_cli(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a command line; returns (exit code, stdout, stderr).");
}
