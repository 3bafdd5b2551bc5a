#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wagepanel/akm.hpp"
#include "wagepanel/cli.hpp"
#include "wagepanel/connectivity.hpp"
#include "wagepanel/error.hpp"
#include "wagepanel/health.hpp"
#include "wagepanel/inference.hpp"
#include "wagepanel/mobility_decomp.hpp"
#include "wagepanel/simulator.hpp"
#include "wagepanel/trajectory.hpp"

namespace py = pybind11;
using namespace wagepanel;

namespace {

template <class T> py::array_t<T> to_array(const std::vector<T> &v) { return py::array_t<T>(v.size(), v.data()); }

py::dict panel_columns(const Panel &p) {
  std::vector<std::int64_t> person, firm;
  std::vector<int> year, birth, grad, months, tertiary, gender;
  std::vector<double> earnings;
  for (const auto &r : p.records()) {
    person.push_back(r.person_id);
    year.push_back(r.year);
    birth.push_back(r.birth_year);
    gender.push_back(r.gender);
    firm.push_back(r.firm_id.value_or(-1));
    earnings.push_back(r.annual_earnings);
    months.push_back(r.months_worked);
    tertiary.push_back(r.education_level == Education::tertiary);
    grad.push_back(r.graduation_year);
  }
  py::dict d;
  d["person_id"] = to_array(person);
  d["year"] = to_array(year);
  d["birth_year"] = to_array(birth);
  d["gender"] = to_array(gender);
  d["firm_id"] = to_array(firm); // -1 when nonemployed
  d["annual_earnings"] = to_array(earnings);
  d["months_worked"] = to_array(months);
  d["tertiary"] = to_array(tertiary);
  d["graduation_year"] = to_array(grad);
  for (const auto &name : p.index_names()) {
    d[py::str(name)] = to_array(p.index_column(name));
  }
  return d;
}

py::dict decomposition_dict(const akm::VarianceDecomposition &vd) {
  py::dict d;
  for (const auto &[name, value] : vd.components()) {
    d[py::str(name)] = value;
  }
  d["var_y"] = vd.var_y;
  d["n_obs"] = vd.n_obs;
  return d;
}

} // namespace

PYBIND11_MODULE(_wagepanel, m) {
  m.doc() = "Bindings for the wagepanel C++ library";
  m.attr("__version__") = cli::version();

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) {
        std::rethrow_exception(p);
      }
    } catch (const ValidationError &e) {
      PyErr_SetString(PyExc_ValueError, (e.kind() + ": " + e.what()).c_str());
    } catch (const ConvergenceError &e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  py::class_<sim::SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("n_workers", &sim::SimConfig::n_workers)
      .def_readwrite("n_firms", &sim::SimConfig::n_firms)
      .def_readwrite("n_years", &sim::SimConfig::n_years)
      .def_readwrite("start_year", &sim::SimConfig::start_year)
      .def_readwrite("theta_sd", &sim::SimConfig::theta_sd)
      .def_readwrite("psi_sd", &sim::SimConfig::psi_sd)
      .def_readwrite("noise_sd", &sim::SimConfig::noise_sd)
      .def_readwrite("pgi_effect_on_theta", &sim::SimConfig::pgi_effect_on_theta)
      .def_readwrite("pgi_effect_on_mobility", &sim::SimConfig::pgi_effect_on_mobility)
      .def_readwrite("pgi_horizon_slope", &sim::SimConfig::pgi_horizon_slope)
      .def_readwrite("pgi_education_r2", &sim::SimConfig::pgi_education_r2)
      .def_readwrite("base_mobility_rate", &sim::SimConfig::base_mobility_rate)
      .def_readwrite("nonemployment_rate", &sim::SimConfig::nonemployment_rate)
      .def_readwrite("tertiary_share", &sim::SimConfig::tertiary_share)
      .def_readwrite("seed", &sim::SimConfig::seed)
      .def_readwrite("firm_seed", &sim::SimConfig::firm_seed)
      .def("validate", &sim::SimConfig::validate);

  py::class_<Panel>(m, "Panel")
      .def("__len__", &Panel::size)
      .def_property_readonly("person_count", &Panel::person_count)
      .def_property_readonly("index_names", &Panel::index_names)
      .def("columns", &panel_columns, "Column name -> numpy array")
      .def("write", [](const Panel &p, const std::filesystem::path &panel_csv,
                       const std::filesystem::path &deflator_csv) {
        write_panel(p, panel_csv);
        write_deflator(p.deflator(), deflator_csv);
      });

  m.def("load_panel", &load_panel, py::arg("panel_csv"), py::arg("deflator_csv"));

  m.def(
      "simulate",
      [](const sim::SimConfig &cfg) {
        auto s = sim::simulate_panel(cfg);
        py::dict truth;
        truth["theta"] = s.truth.theta;
        truth["psi"] = s.truth.psi;
        truth["beta_t"] = s.truth.beta_t;
        return py::make_tuple(std::move(s.panel), truth);
      },
      py::arg("config"), "Simulate a panel; returns (panel, truth)");

  m.def(
      "largest_connected_set",
      [](const Panel &p) { return connectivity::largest_connected_set(p, connectivity::build_graph(p)); },
      py::arg("panel"));

  py::class_<akm::AkmFit>(m, "AkmFit")
      .def_property_readonly("person_ids", [](const akm::AkmFit &f) { return to_array(f.person_ids); })
      .def_property_readonly("theta", [](const akm::AkmFit &f) { return to_array(f.theta); })
      .def_property_readonly("firm_ids", [](const akm::AkmFit &f) { return to_array(f.firm_ids); })
      .def_property_readonly("psi", [](const akm::AkmFit &f) { return to_array(f.psi); })
      .def_property_readonly("beta", [](const akm::AkmFit &f) {
        return std::vector<double>(f.beta.data(), f.beta.data() + f.beta.size());
      })
      .def_property_readonly("covariate_names",
                             [](const akm::AkmFit &f) {
                               std::vector<std::string> out;
                               for (const auto &c : f.covariates) {
                                 out.push_back(c.name());
                               }
                               return out;
                             })
      .def_readonly("dropped_columns", &akm::AkmFit::dropped_columns)
      .def_readonly("n_obs", &akm::AkmFit::n_obs)
      .def_readonly("r2", &akm::AkmFit::r2)
      .def_readonly("resid_sd", &akm::AkmFit::resid_sd)
      .def_readonly("iterations", &akm::AkmFit::iterations)
      .def_property_readonly("period",
                             [](const akm::AkmFit &f) { return py::make_tuple(f.period.first_year, f.period.last_year); })
      .def(
          "variance_decomposition",
          [](const akm::AkmFit &f, const Panel &p) { return decomposition_dict(akm::variance_decomposition(f, p)); },
          py::arg("panel"));

  m.def(
      "fit_akm",
      [](const Panel &p, std::vector<std::pair<int, int>> periods, bool include_covariates, double solver_tol,
         int max_iter, int threads) {
        akm::AkmSpec spec;
        for (auto [a, b] : periods) {
          spec.periods.push_back({a, b});
        }
        spec.include_covariates = include_covariates;
        spec.solver_tol = solver_tol;
        spec.max_iter = max_iter;
        spec.threads = threads;
        return akm::fit_akm(p, spec);
      },
      py::arg("panel"), py::arg("periods") = std::vector<std::pair<int, int>>{},
      py::arg("include_covariates") = true, py::arg("solver_tol") = 1e-8, py::arg("max_iter") = 5000,
      py::arg("threads") = 1, "Fit on the largest connected set of each period (default: one period)");

  m.def(
      "lifetime_income",
      [](const Panel &p, double rate, int horizon_cap) {
        std::map<std::int64_t, double> out;
        for (const auto &v : trajectory::lifetime_income(p, rate, horizon_cap)) {
          out[v.person_id] = v.pv;
        }
        return out;
      },
      py::arg("panel"), py::arg("rate") = 0.03, py::arg("horizon_cap") = 25);

  m.def(
      "decompose_growth",
      [](const Panel &p, int max_horizon) {
        const auto hs = mobility::build_histories(p, max_horizon);
        py::list rows;
        for (const auto &h : mobility::decompose_growth(hs, "all").horizons) {
          py::dict d;
          d["horizon"] = h.horizon;
          d["defined"] = h.defined;
          d["total"] = h.total;
          d["cumulative_total"] = h.cumulative_total;
          for (std::size_t c = 0; c < 4; ++c) {
            d[mobility::kComponentNames[c]] = h.contribution[c];
            d[py::str(std::string("cumulative_") + mobility::kComponentNames[c])] = h.cumulative[c];
          }
          rows.append(d);
        }
        return rows;
      },
      py::arg("panel"), py::arg("max_horizon") = 25, "Stayer/mover/entrant/exiter growth contributions per horizon");

  m.def(
      "holm_adjust", [](const std::vector<double> &p) { return inference::holm_adjust(p); }, py::arg("p_values"));

  m.def(
      "cci_at_cutoff",
      [](const std::vector<std::tuple<int, int, std::string>> &records, int birth_year, int cutoff_age) {
        std::vector<health::DiagnosisRecord> rs;
        for (const auto &[year, version, code] : records) {
          rs.push_back({0, year, version, code});
        }
        return health::cci_at_cutoff(rs, birth_year, cutoff_age, health::CharlsonTable::quan2005()).score;
      },
      py::arg("records"), py::arg("birth_year"), py::arg("cutoff_age"),
      "Score (event_year, icd_version, code) records with the built-in table");

  m.def(
      "run_cli",
      [](const std::vector<std::string> &args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a wagepanel subcommand; returns (exit_code, stdout, stderr)");
}
