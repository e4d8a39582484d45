#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hierdetect/bounds.hpp"
#include "hierdetect/detect.hpp"
#include "hierdetect/experiment.hpp"
#include "hierdetect/sim.hpp"

namespace py = pybind11;
using namespace hierdetect;

namespace {

using carray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

cvec to_cvec(const carray& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a one-dimensional array");
  return cvec(a.data(), a.data() + a.size());
}

carray to_array(const cvec& v) {
  carray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

HierVector to_hier(const carray& a, const ProblemDims& d) {
  const cvec v = to_cvec(a);
  if (v.size() != d.compound_size()) throw dimension_error("expected an array of length u*s");
  return HierVector(d.u, d.s, v);
}

/// Control window, signature and operator drawn from one seed.
struct Measurement {
  SignatureSet signature;
  FourierMeasurement op;

  Measurement(std::size_t n, std::size_t m, std::uint64_t seed, std::size_t shift_stride, bool random_phases)
      : signature(make(n, m, seed, shift_stride, random_phases)), op(measurement_from_signature(signature)) {}

  static SignatureSet make(std::size_t n, std::size_t m, std::uint64_t seed, std::size_t stride, bool phases) {
    Rng rng = derive_stream(seed, 0);
    const auto window = make_control_window(n, m, rng);
    return make_signature(window, n, stride, rng, phases);
  }
};

py::dict outcome_dict(const DetectionOutcome& o) {
  py::dict d;
  d["h_hat"] = to_array(o.h_hat.data());
  d["active_users"] = o.active_users;
  d["iterations"] = o.iterations;
  d["residual_history"] = o.residual_history;
  d["ls_converged"] = o.ls_converged;
  return d;
}

py::object json_module() { return py::module_::import("json"); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical sparse user detection: core bindings";

  py::register_exception<dimension_error>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<cli::config_error>(m, "ConfigError", PyExc_ValueError);

  py::class_<ProblemDims>(m, "ProblemDims")
      .def(py::init([](std::size_t n, std::size_t u, std::size_t s, std::size_t k_u, std::size_t k_s, std::size_t mm) {
             ProblemDims d{n, u, s, k_u, k_s, mm};
             d.validate();
             return d;
           }),
           py::arg("n"), py::arg("u"), py::arg("s"), py::arg("k_u"), py::arg("k_s"), py::arg("m"))
      .def_readonly("n", &ProblemDims::n)
      .def_readonly("u", &ProblemDims::u)
      .def_readonly("s", &ProblemDims::s)
      .def_readonly("k_u", &ProblemDims::k_u)
      .def_readonly("k_s", &ProblemDims::k_s)
      .def_readonly("m", &ProblemDims::m)
      .def("__repr__", [](const ProblemDims& d) {
        return "ProblemDims(n=" + std::to_string(d.n) + ", u=" + std::to_string(d.u) + ", s=" + std::to_string(d.s) +
               ", k_u=" + std::to_string(d.k_u) + ", k_s=" + std::to_string(d.k_s) + ", m=" + std::to_string(d.m) +
               ")";
      });

  m.def(
      "hier_threshold",
      [](const carray& x, const ProblemDims& d) {
        const auto s = hier_threshold(to_hier(x, d), d.k_u, d.k_s, d);
        return py::make_tuple(s.blocks, s.offsets);
      },
      py::arg("x"), py::arg("dims"), "Support (blocks, offsets) of the best (k_u, k_s)-sparse approximation.");

  m.def(
      "block_energies", [](const carray& x, const ProblemDims& d) { return block_energies(to_hier(x, d), d); },
      py::arg("x"), py::arg("dims"));

  py::class_<Measurement>(m, "Measurement")
      .def(py::init<std::size_t, std::size_t, std::uint64_t, std::size_t, bool>(), py::arg("n"), py::arg("m"),
           py::arg("seed"), py::arg("shift_stride") = 1, py::arg("random_phases") = true)
      .def_property_readonly("n", [](const Measurement& a) { return a.op.n(); })
      .def_property_readonly("m", [](const Measurement& a) { return a.op.m(); })
      .def_property_readonly("row_set", [](const Measurement& a) { return a.op.row_set(); })
      .def_property_readonly("pilot", [](const Measurement& a) { return to_array(a.signature.p0); })
      .def("apply", [](const Measurement& a, const carray& x) { return to_array(apply_measurement(a.op, to_cvec(x))); })
      .def("adjoint", [](const Measurement& a, const carray& y) { return to_array(apply_adjoint(a.op, to_cvec(y))); });

  auto recover = [](bool least_squares) {
    return [least_squares](const Measurement& a, const carray& y, const ProblemDims& d, std::size_t max_iters,
                           double xi) {
      DetectorConfig cfg;
      cfg.max_iters = max_iters;
      cfg.xi = xi;
      const cvec yy = to_cvec(y);
      return outcome_dict(least_squares ? hihtp(a.op, yy, d, cfg) : hiiht(a.op, yy, d, cfg));
    };
  };
  m.def("hihtp", recover(true), py::arg("op"), py::arg("y"), py::arg("dims"), py::arg("max_iters") = 50,
        py::arg("xi") = 0.0);
  m.def("hiiht", recover(false), py::arg("op"), py::arg("y"), py::arg("dims"), py::arg("max_iters") = 50,
        py::arg("xi") = 0.0);

  m.def("b1", &bounds::b1, py::arg("m"), py::arg("k_s"));
  m.def("b0", &bounds::b0, py::arg("s"), py::arg("u"), py::arg("k_s"), py::arg("u_max") = 64);
  m.def("chi_sq_ccdf", &bounds::chi_sq_ccdf, py::arg("x"), py::arg("m"), py::arg("sigma2"));
  m.def(
      "channel_norm_cdf",
      [](double xi, std::size_t k_s, double sigma_h2) { return bounds::channel_norm_cdf(xi, k_s, sigma_h2); },
      py::arg("xi"), py::arg("k_s"), py::arg("sigma_h2") = 1.0);

  m.def(
      "bounds_report",
      [](const ProblemDims& d, double snr_db, double tau, double xi, std::vector<std::string> which) {
        bounds::BoundParams p;
        p.dims = d;
        p.snr = std::pow(10.0, snr_db / 10.0);
        p.tau = tau;
        p.xi = xi;
        return json_module().attr("loads")(cli::bounds_report(p, which).dump());
      },
      py::arg("dims"), py::arg("snr_db"), py::arg("tau") = 1.0, py::arg("xi") = 0.0,
      py::arg("which") = std::vector<std::string>{"thm2", "thm4", "pfa"});

  m.def(
      "run_experiment",
      [](const std::string& config_json, bool as_sweep) {
        auto cfg = cli::parse_config(cli::json::parse(config_json));
        std::vector<sim::SweepCell> cells;
        {
          py::gil_scoped_release release;
          sim::SweepGrid grid = cfg.grid;
          if (!as_sweep || grid.empty()) grid = sim::SweepGrid{{cfg.base.snr_db}, {}, {}, {}, {}, {}, false};
          if (!as_sweep) {
            auto& d = cfg.base.prior.dims;
            if (d.s == 0 && d.u > 0) d.s = d.n / d.u;
          }
          cells = sim::sweep(grid, cfg.base, cfg.trials, cfg.seed, cfg.workers, cfg.bounds);
        }
        return json_module().attr("loads")(cli::format_json(cells, cfg));
      },
      py::arg("config_json"), py::arg("sweep") = false);

  m.def(
      "diversity_slope",
      [](const std::vector<double>& snr, const std::vector<double>& pmd, double lo, double hi) {
        const auto f = sim::diversity_slope(snr, pmd, lo, hi);
        return py::make_tuple(f.slope, f.stderr_, f.points);
      },
      py::arg("snr"), py::arg("pmd"), py::arg("lo") = 1e-4, py::arg("hi") = 1e-1);

  m.attr("__version__") = cli::version_string().substr(1);
}
