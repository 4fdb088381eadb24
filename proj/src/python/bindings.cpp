// Python bindings: a thin layer over the C++ API.
#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qvdp/errors.hpp"
#include "qvdp/meanfield.hpp"
#include "qvdp/observables.hpp"
#include "qvdp/perturbation.hpp"
#include "qvdp/solvers.hpp"
#include "qvdp/sweep.hpp"

namespace py = pybind11;
using namespace qvdp;

namespace {

PerturbativeMode perturbative_mode(const std::string& name) {
  if (name == "printed_lambda") return PerturbativeMode::printed_lambda;
  if (name == "numerical_lambda") return PerturbativeMode::numerical_lambda;
  if (name == "subspace_inverse") return PerturbativeMode::subspace_inverse;
  throw InvalidArgument("mode must be printed_lambda, numerical_lambda or subspace_inverse");
}

const char* stability_name(Stability s) {
  return s == Stability::stable ? "stable" : s == Stability::unstable ? "unstable" : "marginal";
}

py::dict dataset_dict(const Dataset& d) {
  py::dict out;
  for (const auto& c : d.columns) {
    if (c == "error" || c == "cell_hash") {
      std::vector<std::string> v;
      const size_t k = d.column_index(c);
      for (const auto& r : d.rows) v.push_back(r[k]);
      out[py::str(c)] = v;
    } else {
      out[py::str(c)] = d.numeric(c);
    }
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_qvdp, m) {
  m.doc() = "Two quadratically coupled quantum van der Pol oscillators (units of gamma1).";
  m.attr("__version__") = version();

  auto base = py::register_exception<Error>(m, "QvdpError", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base);
  py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base);
  py::register_exception<TruncationTooSmall>(m, "TruncationTooSmall", base);
  py::register_exception<InvalidDensityMatrix>(m, "InvalidDensityMatrix", base);
  py::register_exception<NonUniqueSteadyState>(m, "NonUniqueSteadyState", base);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base);
  py::register_exception<StiffnessError>(m, "StiffnessError", base);
  py::register_exception<DegenerateDenominator>(m, "DegenerateDenominator", base);
  py::register_exception<ZeroPopulation>(m, "ZeroPopulation", base);
  py::register_exception<SingularPhase>(m, "SingularPhase", base);
  py::register_exception<ResidualTooLarge>(m, "ResidualTooLarge", base);
  py::register_exception<GridTooCoarse>(m, "GridTooCoarse", base);
  py::register_exception<InsufficientDecay>(m, "InsufficientDecay", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);

  py::class_<SystemParams>(m, "SystemParams")
      .def(py::init([](double delta, double zeta, double kerr, double gamma1, double gamma2, int dims) {
             SystemParams p;
             p.delta = delta;
             p.zeta = zeta;
             p.set_kerr(kerr);
             p.gamma1 = gamma1;
             p.gamma2 = gamma2;
             p.set_dims(dims);
             p.validate();
             return p;
           }),
           py::arg("delta") = 0.0, py::arg("zeta") = 0.0, py::arg("kerr") = 0.0, py::arg("gamma1") = 1.0,
           py::arg("gamma2") = 10.0, py::arg("dims") = 20)
      .def_readwrite("delta", &SystemParams::delta)
      .def_readwrite("zeta", &SystemParams::zeta)
      .def_readwrite("kerr1", &SystemParams::kerr1)
      .def_readwrite("kerr2", &SystemParams::kerr2)
      .def_readwrite("gamma1", &SystemParams::gamma1)
      .def_readwrite("gamma2", &SystemParams::gamma2)
      .def_property(
          "dims", [](const SystemParams& p) { return p.dims.dims(); },
          [](SystemParams& p, const std::vector<int>& d) { p.dims = FockSpace(d); })
      .def("validate", &SystemParams::validate)
      .def("__repr__", [](const SystemParams& p) {
        return "SystemParams(delta=" + std::to_string(p.delta) + ", zeta=" + std::to_string(p.zeta) +
               ", kerr1=" + std::to_string(p.kerr1) + ", kerr2=" + std::to_string(p.kerr2) +
               ", gamma2=" + std::to_string(p.gamma2) + ")";
      });

  py::class_<DensityMatrix>(m, "DensityMatrix")
      .def(py::init([](std::vector<int> dims, const DenseMatrix& mat) { return DensityMatrix(FockSpace(dims), mat); }),
           py::arg("dims"), py::arg("matrix"))
      .def_property_readonly("dims", [](const DensityMatrix& r) { return r.space().dims(); })
      .def_property_readonly("matrix", &DensityMatrix::matrix)
      .def("min_eigenvalue", &DensityMatrix::min_eigenvalue)
      .def("partial_trace", &partial_trace, py::arg("keep"));

  m.def(
      "steady_state",
      [](const SystemParams& p, const std::string& method, double tol) {
        SolveOptions o;
        if (method == "direct") o.method = SolveMethod::direct;
        else if (method == "iterative") o.method = SolveMethod::iterative;
        else throw InvalidArgument("method must be 'direct' or 'iterative'");
        o.tol = tol;
        auto s = solve_steady_state(build_liouvillian(p), o);
        return py::make_tuple(s.rho, s.residual);
      },
      py::arg("params"), py::arg("method") = "direct", py::arg("tol") = 1e-10,
      "Steady state and its residual norm.");

  m.def("unperturbed_state", &unperturbed_state, py::arg("params"));
  m.def(
      "unperturbed_weights",
      [](double ratio, int dim) { return unperturbed_weights(ratio, FockSpace({dim})).modes.front(); },
      py::arg("gamma_ratio"), py::arg("dim"));

  m.def("sync_measure", [](const DensityMatrix& r) { return sync_measure(r).value; }, py::arg("rho"));
  m.def("cross_g2", &cross_g2, py::arg("rho"));
  m.def("phonon_numbers", &phonon_numbers, py::arg("rho"));
  m.def(
      "wigner",
      [](const DensityMatrix& r, int mode, double extent, int points) {
        const auto w = wigner(partial_trace(r, mode), PhaseGrid{extent, points});
        return py::make_tuple(w.x, w.p, w.values);
      },
      py::arg("rho"), py::arg("mode") = 0, py::arg("extent") = 4.0, py::arg("points") = 101,
      "(x, p, W) with W[i, j] at (x[j], p[i]).");
  m.def(
      "power_spectrum",
      [](const SystemParams& p, int mode, const std::vector<double>& freqs, const std::string& method) {
        SpectrumOptions o;
        if (method == "resolvent") o.method = SpectrumMethod::resolvent;
        else if (method == "time_domain") o.method = SpectrumMethod::time_domain;
        else throw InvalidArgument("method must be 'resolvent' or 'time_domain'");
        return power_spectrum(p, mode, freqs, o).values;
      },
      py::arg("params"), py::arg("mode"), py::arg("freqs"), py::arg("method") = "resolvent");
  m.def(
      "perturbative_sync",
      [](const SystemParams& p, const std::string& mode) { return perturbative_sync(p, perturbative_mode(mode)); },
      py::arg("params"), py::arg("mode") = "subspace_inverse");
  m.def("resonance_detunings", &resonance_detunings, py::arg("kerr"), py::arg("n_max"), py::arg("m_max"));

  m.def("quintic_roots", &quintic_roots, py::arg("params"));
  m.def("critical_coupling", &critical_coupling, py::arg("gamma1") = 1.0, py::arg("gamma2") = 10.0);
  m.def("critical_phase", &critical_phase, py::arg("zeta"), py::arg("gamma1") = 1.0, py::arg("gamma2") = 10.0);
  m.def(
      "fixed_points",
      [](const SystemParams& p) {
        py::list out;
        for (const auto& f : fixed_points(p)) {
          py::dict d;
          d["r1"] = f.r1;
          d["r2"] = f.r2;
          d["phi"] = f.phi;
          d["z"] = f.z;
          d["stability"] = stability_name(f.stability);
          d["eigenvalues"] = f.eigenvalues;
          d["residual"] = f.residual;
          out.append(d);
        }
        return out;
      },
      py::arg("params"));
  m.def(
      "arnold_tongue",
      [](const SystemParams& p, const std::vector<double>& zetas, const std::vector<double>& deltas, int workers) {
        TongueOptions o;
        o.workers = workers;
        const auto cells = arnold_tongue(p, zetas, deltas, o);
        const auto rows = static_cast<Index>(zetas.size()), cols = static_cast<Index>(deltas.size());
        Eigen::MatrixXd sync(rows, cols), phi(rows, cols);
        for (Index r = 0; r < rows; ++r)
          for (Index c = 0; c < cols; ++c) {
            const auto& cell = cells[static_cast<size_t>(r * cols + c)];
            sync(r, c) = cell.synchronized ? 1.0 : 0.0;
            phi(r, c) = cell.canonical_phase.value_or(std::nan(""));
          }
        return py::make_tuple(sync, phi);
      },
      py::arg("params"), py::arg("zetas"), py::arg("deltas"), py::arg("workers") = 1,
      "(synchronized, phi) arrays indexed [zeta, delta].");

  m.def(
      "run_sweep",
      [](const std::string& config_json, const std::filesystem::path& out_dir, int workers, bool resume) {
        nlohmann::json cfg;
        try {
          cfg = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        const auto grid = parse_sweep(cfg);
        const auto r = run_sweep(grid, {out_dir, workers, resume});
        py::dict d;
        d["dataset"] = r.dataset;
        d["metadata"] = r.metadata;
        d["cells"] = r.cells;
        d["computed"] = r.computed;
        d["reused"] = r.reused;
        d["failed"] = r.failed;
        return d;
      },
      py::arg("config_json"), py::arg("out_dir"), py::arg("workers") = 1, py::arg("resume") = true);
  m.def(
      "read_dataset", [](const std::filesystem::path& p) { return dataset_dict(read_csv(p)); }, py::arg("path"),
      "Columns of a CSV dataset as lists.");
}
