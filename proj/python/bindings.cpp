#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rydloss/correlator.hpp"
#include "rydloss/fgr.hpp"
#include "rydloss/interactions.hpp"
#include "rydloss/medium.hpp"
#include "rydloss/polaritons.hpp"
#include "rydloss/propagation.hpp"

namespace py = pybind11;
using namespace rydloss;

namespace {

std::vector<double> to_angular(const std::vector<double>& mhz) {
  std::vector<double> out;
  out.reserve(mhz.size());
  for (double x : mhz) out.push_back(mhz_to_angular(x));
  return out;
}

py::array_t<double> matrix(const std::vector<std::vector<double>>& m) {
  const std::size_t rows = m.size(), cols = rows ? m[0].size() : 0;
  py::array_t<double> out({rows, cols});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) v(i, j) = m[i][j];
  return out;
}

std::vector<TimeTagStream> streams_from(const std::vector<std::vector<std::int64_t>>& tags,
                                        std::int64_t duration) {
  if (tags.size() != 3) throw ValidationError("tags", "expected three channels");
  std::vector<TimeTagStream> s(3);
  for (int c = 0; c < 3; ++c) {
    s[c].channel = c + 1;
    s[c].timestamps = tags[c];
    s[c].duration = duration;
    s[c].validate();
  }
  return s;
}

py::dict correlation_dict(const CorrelationValue& v) {
  py::dict d;
  d["tau_ns"] = v.tau;
  d["value"] = v.value;
  d["stderr"] = v.stderr_;
  d["flagged"] = v.flagged;
  return d;
}

}  // namespace

PYBIND11_MODULE(_rydloss, m) {
  m.doc() = "Rydberg-polariton three-body loss: frequencies in MHz (omega/2pi), lengths in um.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<PoleError>(m, "PoleError", numerical.ptr());
  py::register_exception<ResonanceError>(m, "ResonanceError", numerical.ptr());
  py::register_exception<WindowError>(m, "WindowError", numerical.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", numerical.ptr());
  py::register_exception<TrackingError>(m, "TrackingError", numerical.ptr());
  py::register_exception<BudgetError>(m, "BudgetError", numerical.ptr());

  py::class_<MediumParams>(m, "Medium")
      .def(py::init([](const std::map<std::string, double>& values, const std::string& profile) {
             return from_experiment_units(values, profile_from_string(profile));
           }),
           py::arg("values"), py::arg("profile") = "gaussian")
      .def("to_dict", [](const MediumParams& p) { return to_experiment_units(p); })
      .def("lossless", &MediumParams::lossless)
      .def_property_readonly("profile", [](const MediumParams& p) { return to_string(p.profile); })
      .def("__repr__", [](const MediumParams& p) {
        return "Medium(delta=" + std::to_string(angular_to_mhz(p.delta)) +
               " MHz, delta_s=" + std::to_string(angular_to_mhz(p.delta_s)) + " MHz)";
      });

  m.def("scales", [](const MediumParams& p) {
    const auto s = derive_scales(p, chi_bar(0.0, p));
    py::dict d;
    d["phi"] = s.phi;
    d["r_b_um"] = s.r_b;
    d["OD_b"] = s.od_b;
    d["k_c_per_um"] = s.k_c;
    d["omega_c_scale_MHz"] = angular_to_mhz(s.omega_c_scale);
    d["mass"] = s.mass;
    return d;
  });

  m.def("resonances", [](const MediumParams& p, const std::string& method) {
    ResonanceMethod rm;
    if (method == "closed_form") rm = ResonanceMethod::ClosedForm;
    else if (method == "numeric_root") rm = ResonanceMethod::NumericRoot;
    else throw ValidationError("method", "expected closed_form or numeric_root");
    const auto r = resonance_detunings(p, rm);
    return std::pair{angular_to_mhz(r.delta0), angular_to_mhz(r.delta_plus)};
  }, py::arg("params"), py::arg("method") = "numeric_root",
     "(delta0, delta_plus) in MHz");

  m.def("chi_bar", [](const MediumParams& p, cplx omega_mhz) { return chi_bar(kTwoPi * omega_mhz, p) * kTwoPi; },
        py::arg("params"), py::arg("omega_MHz") = cplx{}, "chi_bar in 1/MHz");
  m.def("omega_plus", [](const MediumParams& p) { return omega_plus(p) / kTwoPi; }, "MHz");
  m.def("g_ss", [](const MediumParams& p, double k, cplx omega_mhz) {
    return g_ss(PropagatorQuery::finite(k, kTwoPi * omega_mhz), p) * kTwoPi;
  }, py::arg("params"), py::arg("k"), py::arg("omega_MHz"), "G_SS in 1/MHz");
  m.def("effective_potential", [](const MediumParams& p, const std::vector<double>& r_um, cplx omega_mhz) {
    std::vector<cplx> out;
    for (double r : r_um) out.push_back(effective_potential(kTwoPi * omega_mhz, r, p).value / kTwoPi);
    return out;
  }, py::arg("params"), py::arg("r_um"), py::arg("omega_MHz") = cplx{}, "V_e in MHz");
  m.def("blockade_radius", [](const MediumParams& p) { return blockade_radius(0.0, p); });

  m.def("dispersion", [](const MediumParams& p, const std::vector<double>& q) {
    const auto s = branch_spectrum(q, p, 0.0);
    py::dict d;
    for (int b = 0; b < 3; ++b) {
      std::vector<cplx> w;
      for (auto x : s.omega[b]) w.push_back(x / kTwoPi);
      d[to_string(static_cast<Branch>(b))] = w;
    }
    return d;
  }, py::arg("params"), py::arg("q_per_um"), "branch energies in MHz keyed L, D, U");

  m.def("beta", [](const MediumParams& p, const std::string& method) {
    return beta(p, rate_method_from_string(method)).beta;
  }, py::arg("params"), py::arg("method") = "simplified");

  m.def("beta_map", [](const std::vector<double>& delta_mhz, const std::vector<double>& deltas_mhz,
                       const MediumParams& p, const std::string& method, unsigned workers) {
    MapOptions o;
    o.workers = workers;
    const auto map = beta_map(to_angular(delta_mhz), to_angular(deltas_mhz), p,
                              rate_method_from_string(method), o);
    std::vector<std::vector<double>> mag(delta_mhz.size(), std::vector<double>(deltas_mhz.size()));
    for (std::size_t i = 0; i < mag.size(); ++i)
      for (std::size_t j = 0; j < mag[i].size(); ++j) mag[i][j] = map.values[i][j].magnitude;
    return matrix(mag);
  }, py::arg("delta_MHz"), py::arg("deltas_MHz"), py::arg("params"),
     py::arg("method") = "simplified", py::arg("workers") = 1, "|beta| as a (delta, delta_s) array");

  m.def("simulate", [](const MediumParams& p, int n, int grid, unsigned workers) {
    if (n != 2 && n != 3) throw ValidationError("n", "must be 2 or 3");
    SimulationGrid g;
    g.points = grid;
    g.workers = workers;
    const auto prof = make_profile(p);
    const auto c = n == 2 ? solve_two(p, prof, g).correlation : solve_three(p, prof, g).correlation;
    py::dict d;
    d["g2_0"] = c.g2_0;
    if (n == 3) {
      d["g3_00"] = c.g3_00;
      d["eta3_00"] = c.eta3_00;
    }
    d["transmission"] = c.transmission;
    d["asymmetry"] = c.asymmetry;
    return d;
  }, py::arg("params"), py::arg("n") = 2, py::arg("grid") = 96, py::arg("workers") = 1);

  m.def("single_transmission", [](const MediumParams& p) {
    return solve_single(p, make_profile(p)).transmission;
  });

  m.def("synth_tags", [](const std::string& model, double rate, double group_rate, double jitter_ns,
                         std::int64_t duration_ns, std::uint64_t seed) {
    SynthConfig s;
    s.model = synth_model_from_string(model);
    s.rate_per_us = rate;
    s.group_rate_per_us = group_rate;
    s.jitter_ns = jitter_ns;
    s.seed = seed;
    std::vector<std::vector<std::int64_t>> out;
    for (const auto& st : synth_tags(s, duration_ns)) out.push_back(st.timestamps);
    return out;
  }, py::arg("model") = "poisson", py::arg("rate_per_us") = 3.0, py::arg("group_rate_per_us") = 0.0,
     py::arg("jitter_ns") = 0.0, py::arg("duration_ns") = 100'000'000, py::arg("seed") = 1,
     "three lists of integer nanosecond timestamps");

  m.def("correlate", [](const std::vector<std::vector<std::int64_t>>& tags, std::int64_t duration_ns,
                        std::int64_t bin_ns, std::int64_t window_ns, std::int64_t block_ns) {
    CorrelatorConfig c;
    c.bin = bin_ns;
    c.window = window_ns;
    c.block = block_ns;
    const auto s = streams_from(tags, duration_ns);
    const auto g2 = g2_from_tags(s, c);
    const auto g3 = g3_from_tags(s, c);
    py::list bins;
    for (const auto& v : g2.bins) bins.append(correlation_dict(v));
    py::dict d;
    d["g2"] = bins;
    d["g2_0"] = correlation_dict(g2.bins[g2.zero_index()]);
    d["g3_00"] = correlation_dict(g3.at(0, 0));
    d["normalization_terms"] = g3.normalization_terms;
    return d;
  }, py::arg("tags"), py::arg("duration_ns"), py::arg("bin_ns") = 20, py::arg("window_ns") = 1000,
     py::arg("block_ns") = 100'000);

  m.def("eta3", py::overload_cast<double, double, double, double>(&eta3_combine),
        py::arg("g2_t1"), py::arg("g2_t2"), py::arg("g2_t21"), py::arg("g3"));
}
