#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <variant>

#include "tmrange/analysis.hpp"
#include "tmrange/channel.hpp"
#include "tmrange/error.hpp"
#include "tmrange/experiment.hpp"

namespace py = pybind11;
using namespace tmrange;

namespace {

ExperimentConfig config_from(const py::dict& fields) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : fields) {
    std::string value;
    if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (const auto& item : v) {
        if (!value.empty()) value += ",";
        value += py::str(item).cast<std::string>();
      }
    } else if (py::isinstance<py::bool_>(v)) {
      value = v.cast<bool>() ? "true" : "false";
    } else {
      value = py::str(v).cast<std::string>();
    }
    set_field(cfg, k.cast<std::string>(), value);
  }
  return cfg;
}

py::dict record_dict(const Record& r) {
  py::dict d;
  for (const auto& [k, v] : r.fields) {
    std::visit([&](const auto& x) { d[py::str(k)] = x; }, v);
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_tmrange, m) {
  m.doc() = "PN ranging with non-constant-envelope telemetry";
  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def(
      "run_experiment",
      [](const py::dict& fields) {
        const ExperimentConfig cfg = config_from(fields);
        validate(cfg);
        std::vector<RunReport> reports;
        {
          py::gil_scoped_release release;
          reports = run_experiment(cfg);
        }
        py::list out;
        for (const auto& r : reports) out.append(record_dict(to_record(r)));
        return out;
      },
      py::arg("config") = py::dict(), "Runs a sweep; returns one dict per point.");

  m.def(
      "config",
      [](const py::dict& fields) {
        const ExperimentConfig cfg = config_from(fields);
        validate(cfg);
        py::dict d;
        d["constellation"] = cfg.constellation;
        d["rolloff"] = cfg.rolloff;
        d["symbol_rate"] = cfg.symbol_rate;
        d["chip_rate"] = cfg.chip_rate;
        d["sample_rate"] = cfg.sample_rate;
        d["span"] = cfg.span;
        d["m_rg"] = cfg.m_rg;
        d["code"] = cfg.code;
        d["loop_bandwidth"] = cfg.loop_bandwidth;
        d["loop_order"] = cfg.loop_order;
        d["damping"] = cfg.damping;
        d["mode"] = cfg.mode;
        d["axis"] = cfg.axis;
        d["snr_db"] = cfg.snr_db;
        d["tau_true"] = cfg.tau_true;
        d["n_symbols"] = symbols_per_trial(cfg);
        d["trials"] = cfg.trials;
        d["seed"] = cfg.seed;
        return d;
      },
      py::arg("config") = py::dict(), "Validated configuration with defaults filled in.");

  m.def(
      "sigma2_p",
      [](const py::dict& fields, std::int64_t n_symbols, std::uint64_t seed) {
        const ExperimentConfig cfg = config_from(fields);
        validate(cfg);
        py::gil_scoped_release release;
        return experiment_sigma2_p(cfg, n_symbols, seed);
      },
      py::arg("config") = py::dict(), py::arg("n_symbols") = 100000, py::arg("seed") = 1);

  m.def(
      "occupied_bandwidth",
      [](const py::dict& fields, std::int64_t n_symbols, std::uint64_t seed) {
        const ExperimentConfig cfg = config_from(fields);
        py::gil_scoped_release release;
        return experiment_obw(cfg, n_symbols, seed);
      },
      py::arg("config") = py::dict(), py::arg("n_symbols") = 1 << 16, py::arg("seed") = 1);

  m.def(
      "jitter_bound",
      [](double p, double n0, double loop_bandwidth, double chip_period, double s2) {
        const JitterBound b = jitter_bound({p, n0, loop_bandwidth, chip_period, s2});
        return py::make_tuple(b.bound_norm, b.theory_norm);
      },
      py::arg("ranging_power"), py::arg("n0"), py::arg("loop_bandwidth"), py::arg("chip_period"),
      py::arg("sigma2_p"), "(bound, thermal term), both normalized by Tc^2.");

  m.def(
      "ranging_power",
      [](double m_rg, const std::string& code) {
        return ranging_power(m_rg, generate_code(parse_code_kind(code), 64, 0));
      },
      py::arg("m_rg"), py::arg("code") = "t4b");

  m.def("n0_from_pn0bl", &n0_from_pn0bl, py::arg("pn0bl_db"), py::arg("ranging_power"),
        py::arg("loop_bandwidth"));

  m.def(
      "ber_theory",
      [](const std::string& name, double ebn0_db) {
        return ber_theory(build_constellation(parse_constellation_id(name)), ebn0_db);
      },
      py::arg("constellation"), py::arg("ebn0_db"));

  m.def(
      "constellation_points",
      [](const std::string& name) { return build_constellation(parse_constellation_id(name)).points; },
      py::arg("name"));

  m.def(
      "code_chips",
      [](const std::string& code, std::int64_t n_chips, std::int64_t phase) {
        return generate_code(parse_code_kind(code), n_chips, phase).chips;
      },
      py::arg("code"), py::arg("n_chips"), py::arg("phase") = 0);

  m.def("code_period", [](const std::string& code) { return code_period(parse_code_kind(code)); });
}
