#include "wagepanel/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "wagepanel/akm.hpp"
#include "wagepanel/connectivity.hpp"
#include "wagepanel/core_data.hpp"
#include "wagepanel/csv.hpp"
#include "wagepanel/error.hpp"
#include "wagepanel/health.hpp"
#include "wagepanel/inference.hpp"
#include "wagepanel/mobility_decomp.hpp"
#include "wagepanel/simulator.hpp"
#include "wagepanel/trajectory.hpp"

#ifndef WAGEPANEL_VERSION
#define WAGEPANEL_VERSION "0.0.0"
#endif

namespace wagepanel::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "run";
  std::string log_level = "warn";
};

struct PanelInputs {
  std::string panel;
  std::string deflator;
  bool no_filters = false;
};

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string read_file(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw ValidationError("io", fmt::format("cannot read {}", p.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path &p, const json &j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) {
    throw ValidationError("io", fmt::format("cannot write {}", p.string()));
  }
  out << j.dump(2) << '\n';
}

fs::path make_dir(const fs::path &p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) {
    throw ValidationError("io", fmt::format("cannot create directory {}: {}", p.string(), ec.message()));
  }
  return p;
}

void require_file(const fs::path &p, std::string_view producer) {
  if (!fs::exists(p)) {
    throw ValidationError("missing-input", fmt::format("{} not found; run `{}` first", p.string(), producer));
  }
}

std::string fmtd(double v) { return std::isfinite(v) ? csv::format(v) : std::string(); }

std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  for (auto &f : csv::split(s, ',')) {
    if (!f.empty()) {
      out.push_back(f);
    }
  }
  return out;
}

std::vector<double> parse_doubles(const std::string &s, std::string_view what) {
  std::vector<double> out;
  for (const auto &f : split_list(s)) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size()) {
      throw ValidationError("invalid-argument", fmt::format("{}: '{}' is not a number", what, f));
    }
    out.push_back(v);
  }
  return out;
}

const health::CharlsonTable &default_table() { return health::CharlsonTable::quan2005(); }

Panel load_inputs(const Globals &g, const PanelInputs &in) {
  const fs::path panel = in.panel.empty() ? fs::path(g.out_dir) / "panel.csv" : fs::path(in.panel);
  const fs::path deflator = in.deflator.empty() ? fs::path(g.out_dir) / "deflator.csv" : fs::path(in.deflator);
  require_file(panel, "simulate");
  require_file(deflator, "simulate");
  return load_panel(panel, deflator);
}

void add_panel_flags(CLI::App *app, PanelInputs &in) {
  app->add_option("--panel", in.panel, "panel CSV (default <out-dir>/panel.csv)");
  app->add_option("--deflator", in.deflator, "deflator CSV (default <out-dir>/deflator.csv)");
  app->add_flag("--no-filters", in.no_filters, "skip the sample restrictions");
}

Panel trajectory_sample(const Panel &panel, bool no_filters) {
  return no_filters ? panel : apply_trajectory_filters(panel, FilterSpec::trajectory_defaults());
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  sim::SimConfig cfg;
  double hazard = 0.002;
};

void cmd_simulate(const Globals &g, SimulateArgs a) {
  a.cfg.seed = g.seed;
  const auto &table = default_table();
  if (a.hazard > 0.0) {
    a.cfg.diagnosis_hazards.assign(table.categories().size(), a.hazard);
  }
  const auto s = sim::simulate_panel(a.cfg);
  const fs::path out = make_dir(g.out_dir);
  write_panel(s.panel, out / "panel.csv");
  write_deflator(s.panel.deflator(), out / "deflator.csv");
  {
    csv::Writer w(out / "truth_workers.csv", {"person_id", "theta"});
    for (const auto &[id, t] : s.truth.theta) {
      w.row({std::to_string(id), csv::format(t)});
    }
  }
  {
    csv::Writer w(out / "truth_firms.csv", {"firm_id", "psi"});
    for (const auto &[id, p] : s.truth.psi) {
      w.row({std::to_string(id), csv::format(p)});
    }
  }
  {
    csv::Writer w(out / "truth_beta.csv", {"index", "horizon", "beta"});
    for (const auto &[h, b] : s.truth.beta_t) {
      w.row({"EA_PGI", std::to_string(h), csv::format(b)});
    }
  }
  const auto dx = sim::simulate_diagnoses(a.cfg, s.panel, table);
  health::write_diagnoses(dx, out / "diagnoses.csv");
  {
    csv::Writer w(out / "birth_years.csv", {"person_id", "birth_year"});
    for (const auto &b : s.panel.person_blocks()) {
      w.row({std::to_string(b.person_id), std::to_string(s.panel[b.begin].birth_year)});
    }
  }
  const auto &c = a.cfg;
  json j;
  j["version"] = version();
  j["seed"] = c.seed;
  j["n_workers"] = c.n_workers;
  j["n_firms"] = c.n_firms;
  j["n_years"] = c.n_years;
  j["start_year"] = c.start_year;
  j["theta_sd"] = c.theta_sd;
  j["psi_sd"] = c.psi_sd;
  j["noise_sd"] = c.noise_sd;
  j["pgi_effect_on_theta"] = c.pgi_effect_on_theta;
  j["pgi_effect_on_mobility"] = c.pgi_effect_on_mobility;
  j["pgi_horizon_slope"] = c.pgi_horizon_slope;
  j["pgi_education_r2"] = c.pgi_education_r2;
  j["base_mobility_rate"] = c.base_mobility_rate;
  j["nonemployment_rate"] = c.nonemployment_rate;
  j["tertiary_share"] = c.tertiary_share;
  j["discount_rate"] = c.discount_rate;
  j["diagnosis_hazard"] = a.hazard;
  j["n_records"] = s.panel.size();
  j["n_diagnoses"] = dx.size();
  write_json(out / "simulate.json", j);
}

// ------------------------------------------------------------ connectivity

void cmd_connectivity(const Globals &g, const PanelInputs &in, std::ostream &os) {
  Panel panel = load_inputs(g, in);
  if (!in.no_filters) {
    panel = apply_akm_filters(panel, FilterSpec::akm_defaults());
  }
  const auto graph = connectivity::build_graph(panel);
  const fs::path dir = make_dir(fs::path(g.out_dir) / "connectivity");
  csv::Writer w(dir / "components.csv", {"component", "n_firms", "n_workers", "n_obs"});
  os << "component,n_firms,n_workers,n_obs\n";
  for (std::size_t c = 0; c < graph.component_sizes.size(); ++c) {
    const auto &s = graph.component_sizes[c];
    const std::vector<std::string> row{std::to_string(c), std::to_string(s.n_firms), std::to_string(s.n_workers),
                                       std::to_string(s.n_obs)};
    w.row(row);
    os << fmt::format("{}\n", fmt::join(row, ","));
  }
}

// --------------------------------------------------------------------- akm

struct AkmArgs {
  std::string periods;
  double tol = 1e-8;
  int max_iter = 5000;
};

std::vector<akm::Period> parse_periods(const std::string &s) {
  if (s.empty()) {
    return {};
  }
  if (s == "default") {
    return akm::AkmSpec::default_periods();
  }
  std::vector<akm::Period> out;
  for (const auto &item : split_list(s)) {
    const auto dash = item.find('-');
    int a = 0, b = 0;
    if (dash == std::string::npos ||
        std::from_chars(item.data(), item.data() + dash, a).ptr != item.data() + dash ||
        std::from_chars(item.data() + dash + 1, item.data() + item.size(), b).ptr != item.data() + item.size()) {
      throw ValidationError("invalid-argument", fmt::format("period '{}' is not FIRST-LAST", item));
    }
    out.push_back({a, b});
  }
  return out;
}

std::string period_label(const akm::Period &p) { return fmt::format("{}-{}", p.first_year, p.last_year); }

Panel period_connected_sample(const Panel &panel, const akm::AkmFit &fit) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto &r = panel[i];
    if (fit.period.contains(r.year) && r.employed() && fit.psi_of(*r.firm_id) && fit.theta_of(r.person_id)) {
      rows.push_back(i);
    }
  }
  return panel.subset(rows);
}

void cmd_akm(const Globals &g, const PanelInputs &in, const AkmArgs &a) {
  Panel panel = load_inputs(g, in);
  if (!in.no_filters) {
    panel = apply_akm_filters(panel, FilterSpec::akm_defaults());
  }
  akm::AkmSpec spec;
  spec.periods = parse_periods(a.periods);
  spec.solver_tol = a.tol;
  spec.max_iter = a.max_iter;
  spec.threads = g.threads;
  auto fits = akm::fit_akm(panel, spec);

  const fs::path dir = make_dir(fs::path(g.out_dir) / "akm");
  csv::Writer workers(dir / "worker_effects.csv", {"person_id", "theta", "theta_std", "period"});
  csv::Writer firms(dir / "firm_effects.csv", {"firm_id", "psi", "psi_std", "period"});
  csv::Writer vd(dir / "variance_decomposition.csv", {"period", "component", "value", "share"});
  json report;
  report["version"] = version();
  report["periods"] = json::array();
  for (auto &fit : fits) {
    const Panel sample = period_connected_sample(panel, fit);
    fit = akm::standardize_indices(fit, sample);
    const auto label = period_label(fit.period);
    for (std::size_t i = 0; i < fit.person_ids.size(); ++i) {
      workers.row({std::to_string(fit.person_ids[i]), csv::format(fit.theta[i]),
                   csv::format(*fit.theta_std_of(fit.person_ids[i])), label});
    }
    for (std::size_t j = 0; j < fit.firm_ids.size(); ++j) {
      firms.row({std::to_string(fit.firm_ids[j]), csv::format(fit.psi[j]), csv::format(*fit.psi_std_of(fit.firm_ids[j])),
                 label});
    }
    const auto dec = akm::variance_decomposition(fit, sample);
    vd.row({label, "var_y", csv::format(dec.var_y), "1"});
    for (const auto &[name, value] : dec.components()) {
      vd.row({label, name, csv::format(value), csv::format(dec.var_y > 0.0 ? value / dec.var_y : 0.0)});
    }
    json p;
    p["period"] = label;
    p["n_obs"] = fit.n_obs;
    p["n_workers"] = fit.person_ids.size();
    p["n_firms"] = fit.firm_ids.size();
    p["iterations"] = fit.iterations;
    p["residual_history"] = fit.residual_history;
    p["dropped_columns"] = fit.dropped_columns;
    p["r2"] = fit.r2;
    p["resid_sd"] = fit.resid_sd;
    json cov = json::object();
    for (std::size_t k = 0; k < fit.covariates.size(); ++k) {
      cov[fit.covariates[k].name()] = fit.beta(static_cast<Eigen::Index>(k));
    }
    p["covariates"] = cov;
    p["connected_set"] = {{"kept_firms", fit.connected_set.kept_firms},
                          {"kept_workers", fit.connected_set.kept_workers},
                          {"kept_obs", fit.connected_set.kept_obs},
                          {"dropped_firm_share", fit.connected_set.dropped_firm_share},
                          {"dropped_worker_share", fit.connected_set.dropped_worker_share},
                          {"dropped_obs_share", fit.connected_set.dropped_obs_share}};
    json norm = json::array();
    for (const auto &n : fit.normalization) {
      norm.push_back({{"component", n.component}, {"n_obs", n.n_obs}, {"psi_shift", n.psi_shift}});
    }
    p["normalization"] = norm;
    p["standardization"] = {{"theta_mean", fit.standardization->theta_mean},
                            {"theta_sd", fit.standardization->theta_sd},
                            {"psi_mean", fit.standardization->psi_mean},
                            {"psi_sd", fit.standardization->psi_sd}};
    report["periods"].push_back(p);
  }
  write_json(dir / "fit_report.json", report);
}

/// Standardized firm effects per period as read back from akm/firm_effects.csv.
std::vector<akm::AkmFit> load_firm_quality(const fs::path &run_dir) {
  const fs::path p = run_dir / "akm" / "firm_effects.csv";
  require_file(p, "akm");
  const auto t = csv::read(p);
  const auto cf = t.column("firm_id"), cs = t.column("psi_std"), cp = t.column("period");
  std::map<std::string, std::vector<std::pair<std::int64_t, double>>> by_period;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    by_period[t.rows[r][cp]].emplace_back(csv::parse_int(t.rows[r][cf], t, r, "firm_id"),
                                          csv::parse_double(t.rows[r][cs], t, r, "psi_std"));
  }
  std::vector<akm::AkmFit> fits;
  for (auto &[label, rows] : by_period) {
    akm::AkmFit f;
    f.period = parse_periods(label).at(0);
    std::sort(rows.begin(), rows.end());
    for (const auto &[id, v] : rows) {
      f.firm_ids.push_back(id);
      f.psi.push_back(v);
    }
    f.standardization = akm::Standardization{};
    fits.push_back(std::move(f));
  }
  return fits;
}

// -------------------------------------------------------------- trajectory

struct TrajectoryArgs {
  std::string outcome = "annual_income";
  std::string indices = "EA_PGI";
  std::string quantiles = "0.1,0.9";
  std::string subsample = "pooled";
  std::string weights;
  int max_horizon = 25;
  bool no_standardize = false;
};

std::vector<double> person_weight_rows(const Panel &panel, const fs::path &path) {
  const auto t = csv::read(path);
  const auto cp = t.column("person_id"), cw = t.column("weight");
  std::map<std::int64_t, double> w;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    w[csv::parse_int(t.rows[r][cp], t, r, "person_id")] = csv::parse_double(t.rows[r][cw], t, r, "weight");
  }
  std::vector<double> out(panel.size(), 0.0);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    auto it = w.find(panel[i].person_id);
    out[i] = it == w.end() ? 0.0 : it->second;
  }
  return out;
}

std::vector<health::CciSeries> load_cci(const fs::path &run_dir) {
  const fs::path p = run_dir / "cci" / "cci.csv";
  require_file(p, "cci");
  const auto t = csv::read(p);
  const auto cp = t.column("person_id"), ca = t.column("cutoff_age"), cs = t.column("score");
  std::map<std::int64_t, health::CciSeries> m;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto id = csv::parse_int(t.rows[r][cp], t, r, "person_id");
    auto &s = m[id];
    s.person_id = id;
    s.scores[static_cast<int>(csv::parse_int(t.rows[r][ca], t, r, "cutoff_age"))] =
        static_cast<int>(csv::parse_int(t.rows[r][cs], t, r, "score"));
  }
  std::vector<health::CciSeries> out;
  for (auto &[id, s] : m) {
    out.push_back(std::move(s));
  }
  return out;
}

void cmd_trajectory(const Globals &g, const PanelInputs &in, const TrajectoryArgs &a) {
  Panel panel = trajectory_sample(load_inputs(g, in), in.no_filters);
  trajectory::TrajectorySpec spec;
  spec.outcome = trajectory::parse_outcome(a.outcome);
  spec.indices = split_list(a.indices);
  spec.subsample = trajectory::parse_subsample(a.subsample);
  spec.max_horizon = a.max_horizon;
  spec.validate();
  const auto quantiles = parse_doubles(a.quantiles, "--quantiles");
  if (!a.no_standardize) {
    panel = trajectory::standardize_index_columns(panel, spec.indices);
  }
  std::vector<double> y;
  switch (spec.outcome) {
  case trajectory::Outcome::firm_quality:
    y = trajectory::firm_quality_column(panel, load_firm_quality(g.out_dir));
    break;
  case trajectory::Outcome::cci:
    y = trajectory::cci_column(panel, load_cci(g.out_dir));
    break;
  default:
    y = trajectory::outcome_column(panel, spec.outcome);
  }
  std::vector<double> w;
  if (!a.weights.empty()) {
    if (fs::exists(a.weights)) {
      w = person_weight_rows(panel, a.weights);
    } else {
      spec.weights = a.weights;
    }
  }
  const auto fit = trajectory::fit_trajectory(panel, spec, y, w, g.threads);

  const fs::path dir = make_dir(fs::path(g.out_dir) / "trajectory");
  {
    csv::Writer m(dir / "margins.csv", {"index", "quantile", "horizon", "estimate", "se", "ci_lo", "ci_hi"});
    for (const auto &index : spec.indices) {
      for (const auto &curve : trajectory::margins(fit, quantiles, index)) {
        for (const auto &p : curve.points) {
          m.row({index, csv::format(curve.quantile), std::to_string(p.horizon), csv::format(p.estimate),
                 csv::format(p.se), csv::format(p.ci_lo), csv::format(p.ci_hi)});
        }
      }
    }
  }
  {
    csv::Writer c(dir / "coefficients.csv", {"index", "horizon", "beta", "se", "n_obs"});
    for (std::size_t k = 0; k < spec.indices.size(); ++k) {
      for (int h : fit.horizons) {
        c.row({spec.indices[k], std::to_string(h), fmtd(fit.beta(k, h)), fmtd(fit.beta_se(k, h)),
               std::to_string(fit.obs_per_horizon[static_cast<std::size_t>(h)])});
      }
    }
  }
  json j;
  j["version"] = version();
  j["outcome"] = std::string(trajectory::to_string(spec.outcome));
  j["subsample"] = std::string(trajectory::to_string(spec.subsample));
  j["indices"] = spec.indices;
  j["n_obs"] = fit.ls.n_obs;
  j["n_persons"] = fit.n_persons;
  j["n_clusters"] = fit.ls.n_clusters;
  j["n_columns"] = fit.ls.names.size();
  j["dropped_columns"] = fit.ls.dropped_names();
  j["obs_per_horizon"] = fit.obs_per_horizon;
  j["empty_horizons"] = fit.empty_horizons;
  j["r2"] = fit.ls.r2;
  j["residual_variance"] = fit.ls.resid_var;
  j["wald_interactions"] = {{"statistic", fit.interactions_test.statistic},
                            {"df", fit.interactions_test.df},
                            {"p_value", fit.interactions_test.p_value}};
  write_json(dir / "fit_report.json", j);
}

// ---------------------------------------------------------------- lifetime

struct LifetimeArgs {
  double rate = 0.03;
  int horizon_cap = 25;
  std::string indices = "EA_PGI";
  std::string quantiles = "0.1,0.9";
};

void cmd_lifetime(const Globals &g, const PanelInputs &in, const LifetimeArgs &a) {
  Panel panel = trajectory_sample(load_inputs(g, in), in.no_filters);
  const auto pv = trajectory::lifetime_income(panel, a.rate, a.horizon_cap);
  const auto indices = split_list(a.indices);
  const auto quantiles = parse_doubles(a.quantiles, "--quantiles");
  panel = trajectory::standardize_index_columns(panel, indices);
  std::vector<double> y;
  for (const auto &p : pv) {
    y.push_back(p.pv);
  }
  trajectory::ControlSet controls{trajectory::ControlSet::default_pcs(), true, true, false, true};
  const auto fit = trajectory::fit_person_level(panel, y, indices, controls);

  const fs::path dir = make_dir(fs::path(g.out_dir) / "lifetime");
  {
    csv::Writer w(dir / "pv_income.csv", {"person_id", "pv_income"});
    for (const auto &p : pv) {
      w.row({std::to_string(p.person_id), csv::format(p.pv)});
    }
  }
  csv::Writer m(dir / "margins_pv.csv", {"index", "quantile", "estimate", "se", "ci_lo", "ci_hi"});
  for (const auto &index : indices) {
    for (const auto &am : trajectory::adjusted_means(fit, quantiles, index)) {
      m.row({index, csv::format(am.quantile), csv::format(am.estimate), csv::format(am.se), csv::format(am.ci_lo),
             csv::format(am.ci_hi)});
    }
  }
}

// --------------------------------------------------------------- decompose

struct DecomposeArgs {
  std::string group_index = "EA_PGI";
  std::string group_deciles = "1,10";
  std::size_t bootstrap = 500;
  int max_horizon = 25;
};

void cmd_decompose(const Globals &g, const PanelInputs &in, const DecomposeArgs &a) {
  const Panel panel = trajectory_sample(load_inputs(g, in), in.no_filters);
  const auto hist = mobility::build_histories(panel, a.max_horizon);
  const auto deciles = mobility::index_deciles(panel, a.group_index);
  std::vector<std::string> group_of;
  for (int d : deciles) {
    group_of.push_back(d > 0 ? fmt::format("D{}", d) : std::string());
  }
  std::vector<std::string> groups{"all"};
  for (const auto &d : split_list(a.group_deciles)) {
    int v = 0;
    if (std::from_chars(d.data(), d.data() + d.size(), v).ptr != d.data() + d.size() || v < 1 || v > 10) {
      throw ValidationError("invalid-argument", fmt::format("--group-deciles: '{}' is not a decile 1..10", d));
    }
    groups.push_back(fmt::format("D{}", v));
  }
  std::vector<mobility::DecompositionBands> bands;
  if (a.bootstrap > 0) {
    bands = mobility::bootstrap_decomposition(hist, group_of, groups, a.bootstrap, g.seed, g.threads);
  }
  const fs::path dir = make_dir(fs::path(g.out_dir) / "decompose");
  csv::Writer w(dir / "decomposition.csv",
                {"group", "horizon", "component", "contribution", "cumulative", "ci_lo", "ci_hi", "share"});
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    std::vector<std::size_t> members;
    for (std::size_t p = 0; p < hist.size(); ++p) {
      if (groups[gi] == "all" || group_of[p] == groups[gi]) {
        members.push_back(p);
      }
    }
    const auto d = mobility::decompose_growth(hist, groups[gi], members);
    for (std::size_t t = 0; t < d.horizons.size(); ++t) {
      const auto &hd = d.horizons[t];
      for (std::size_t c = 0; c < 5; ++c) {
        const bool total = c == 4;
        const double contribution = total ? hd.total : hd.contribution[c];
        const double cumulative = total ? hd.cumulative_total : hd.cumulative[c];
        std::string lo, hi;
        if (!bands.empty() && t < bands[gi].cumulative.size()) {
          lo = fmtd(bands[gi].cumulative[t][c].lo);
          hi = fmtd(bands[gi].cumulative[t][c].hi);
        }
        w.row({groups[gi], std::to_string(hd.horizon), total ? "total" : mobility::kComponentNames[c],
               fmtd(contribution), fmtd(cumulative), lo, hi, total || !hd.defined ? "" : fmtd(hd.shares[c])});
      }
    }
  }
}

// ----------------------------------------------------------------- weights

struct WeightsArgs {
  std::string population;
  std::size_t min_cell = 5;
  std::string balance_vars;
};

void cmd_weights(const Globals &g, const PanelInputs &in, const WeightsArgs &a) {
  const Panel panel = load_inputs(g, in);
  require_file(a.population, "weights --population");
  const auto pop = inference::load_population_margins(a.population);
  const auto model = inference::estimate_ipw(panel, pop, a.min_cell);
  const auto vars = a.balance_vars.empty() ? pop.columns : split_list(a.balance_vars);
  const auto balance = inference::balance_report(panel, model, pop, vars);

  const fs::path dir = make_dir(fs::path(g.out_dir) / "weights");
  {
    csv::Writer w(dir / "weights.csv", {"person_id", "weight"});
    for (std::size_t p = 0; p < model.person_ids.size(); ++p) {
      w.row({std::to_string(model.person_ids[p]), csv::format(model.weights[p])});
    }
  }
  {
    csv::Writer w(dir / "balance.csv", {"variable", "population_mean", "unweighted_mean", "weighted_mean",
                                        "p_unweighted", "p_weighted", "p_unweighted_holm", "p_weighted_holm"});
    for (const auto &r : balance) {
      w.row({r.variable, csv::format(r.population_mean), csv::format(r.unweighted_mean), csv::format(r.weighted_mean),
             csv::format(r.p_unweighted), csv::format(r.p_weighted), csv::format(r.p_unweighted_holm),
             csv::format(r.p_weighted_holm)});
    }
  }
  std::vector<std::string> header = model.columns;
  for (const char *c : {"sample_share", "population_share", "ratio"}) {
    header.emplace_back(c);
  }
  csv::Writer w(dir / "cells.csv", header);
  for (const auto &[cell, share] : model.sample_share) {
    auto row = cell;
    row.push_back(csv::format(share));
    row.push_back(csv::format(model.population_share.at(cell)));
    row.push_back(csv::format(model.cell_ratio.at(cell)));
    w.row(row);
  }
}

// --------------------------------------------------------------------- cci

struct CciArgs {
  std::string diagnoses;
  std::string birth_years;
  std::string table;
  int first_cutoff = 19;
  int last_cutoff = 50;
};

void cmd_cci(const Globals &g, const CciArgs &a) {
  const fs::path dx = a.diagnoses.empty() ? fs::path(g.out_dir) / "diagnoses.csv" : fs::path(a.diagnoses);
  const fs::path by = a.birth_years.empty() ? fs::path(g.out_dir) / "birth_years.csv" : fs::path(a.birth_years);
  require_file(dx, "simulate");
  require_file(by, "simulate");
  const auto table = a.table.empty() ? default_table() : health::CharlsonTable::load(a.table);
  const auto records = health::load_diagnoses(dx);
  const auto births = health::load_birth_years(by);
  const auto series = health::cci_series(records, births, table, a.first_cutoff, a.last_cutoff);
  const fs::path dir = make_dir(fs::path(g.out_dir) / "cci");
  csv::Writer w(dir / "cci.csv", {"person_id", "cutoff_age", "score"});
  for (const auto &s : series) {
    for (const auto &[age, score] : s.scores) {
      w.row({std::to_string(s.person_id), std::to_string(age), std::to_string(score)});
    }
  }
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::string index = "EA_PGI";
};

std::size_t count_rows(const fs::path &p) {
  const auto text = read_file(p);
  const auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  return lines > 0 ? lines - 1 : 0;
}

void cmd_report(const Globals &g, const PanelInputs &in, const ReportArgs &a) {
  const fs::path run(g.out_dir);
  const fs::path workers_csv = run / "akm" / "worker_effects.csv";
  const fs::path margins_csv = run / "trajectory" / "margins.csv";
  const fs::path decomposition_csv = run / "decompose" / "decomposition.csv";
  require_file(workers_csv, "akm");
  require_file(run / "akm" / "firm_effects.csv", "akm");
  require_file(margins_csv, "trajectory");
  require_file(decomposition_csv, "decompose");
  const Panel raw = load_inputs(g, in);
  const fs::path dir = make_dir(run / "figure_data");

  // Predicted margins by index quantile.
  fs::copy_file(margins_csv, dir / "fig1_margins.csv", fs::copy_options::overwrite_existing);

  // Standardized worker effect on the index, tertiary-educated.
  {
    const auto t = csv::read(workers_csv);
    const auto cp = t.column("person_id"), cs = t.column("theta_std");
    std::map<std::int64_t, double> theta_std;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      theta_std.emplace(csv::parse_int(t.rows[r][cp], t, r, "person_id"),
                        csv::parse_double(t.rows[r][cs], t, r, "theta_std"));
    }
    const auto k = raw.index_position(a.index);
    std::vector<std::size_t> rows;
    std::vector<double> x, y;
    for (const auto &b : raw.person_blocks()) {
      auto it = theta_std.find(b.person_id);
      const double v = raw.index_value(b.begin, k);
      if (it == theta_std.end() || raw[b.begin].education_level != Education::tertiary || !std::isfinite(v)) {
        continue;
      }
      for (std::size_t i = b.begin; i < b.end; ++i) {
        rows.push_back(i);
      }
      x.push_back(v);
      y.push_back(it->second);
    }
    if (x.size() < 2) {
      throw ValidationError("empty-sample", "too few tertiary-educated persons with worker effects for the binscatter");
    }
    const Panel sub = raw.subset(rows);
    std::vector<std::string> pcs;
    for (const auto &name : trajectory::ControlSet::default_pcs()) {
      if (sub.find_index(name)) {
        pcs.push_back(name);
      }
    }
    const auto controls = trajectory::person_controls(sub, trajectory::ControlSet{pcs, true, true, false, true});
    const auto bs = trajectory::binscatter(x, y, &controls, 20);
    csv::Writer w(dir / "fig2_binscatter.csv", {"bin", "x_mean", "y_mean"});
    for (std::size_t b = 0; b < bs.bins.size(); ++b) {
      w.row({std::to_string(b + 1), csv::format(bs.bins[b].first), csv::format(bs.bins[b].second)});
    }
    csv::Writer f(dir / "fig2_binscatter_fit.csv", {"slope", "se", "n", "n_bins"});
    f.row({csv::format(bs.slope), csv::format(bs.slope_se), std::to_string(bs.n), std::to_string(bs.n_bins_used)});
  }

  // Firm quality and job count by horizon and index decile.
  {
    const Panel panel = trajectory_sample(raw, in.no_filters);
    const auto quality = trajectory::firm_quality_column(panel, load_firm_quality(run));
    const auto jobs = trajectory::job_count_column(panel);
    const auto deciles = mobility::index_deciles(panel, a.index);
    const auto blocks = panel.person_blocks();
    struct Acc {
      double q = 0.0, j = 0.0;
      std::size_t nq = 0, nj = 0;
    };
    std::map<std::pair<std::string, int>, Acc> acc;
    for (std::size_t p = 0; p < blocks.size(); ++p) {
      for (std::size_t i = blocks[p].begin; i < blocks[p].end; ++i) {
        const int h = panel[i].horizon();
        for (const std::string &grp : {std::string("all"), fmt::format("D{}", deciles[p])}) {
          if (grp != "all" && deciles[p] != 1 && deciles[p] != 10) {
            continue;
          }
          auto &c = acc[{grp, h}];
          c.j += jobs[i];
          ++c.nj;
          if (std::isfinite(quality[i])) {
            c.q += quality[i];
            ++c.nq;
          }
        }
      }
    }
    csv::Writer w(dir / "fig3_mobility_quality.csv",
                  {"group", "horizon", "mean_firm_quality", "mean_job_count", "n_obs"});
    for (const auto &[key, c] : acc) {
      w.row({key.first, std::to_string(key.second), c.nq > 0 ? csv::format(c.q / static_cast<double>(c.nq)) : "",
             csv::format(c.j / static_cast<double>(c.nj)), std::to_string(c.nj)});
    }
  }

  // Cumulative growth decomposition.
  fs::copy_file(decomposition_csv, dir / "fig4_decomposition.csv", fs::copy_options::overwrite_existing);

  json m;
  m["tool"] = "wagepanel";
  m["version"] = version();
  m["charlson_table_fnv1a64"] = hex64(default_table().checksum());
  m["seed"] = g.seed;
  if (fs::exists(run / "simulate.json")) {
    m["simulation_seed"] = json::parse(read_file(run / "simulate.json")).at("seed");
  }
  json inputs = json::array();
  for (const fs::path rel : {"panel.csv", "deflator.csv", "akm/worker_effects.csv", "akm/firm_effects.csv",
                             "trajectory/margins.csv", "decompose/decomposition.csv"}) {
    const fs::path p = run / rel;
    if (fs::exists(p)) {
      inputs.push_back({{"path", rel.generic_string()}, {"fnv1a64", hex64(health::fnv1a64(read_file(p)))}});
    }
  }
  m["inputs"] = inputs;
  json datasets = json::array();
  for (const char *name : {"fig1_margins", "fig2_binscatter", "fig2_binscatter_fit", "fig3_mobility_quality",
                           "fig4_decomposition"}) {
    const fs::path p = dir / (std::string(name) + ".csv");
    datasets.push_back({{"name", name},
                        {"path", (fs::path("figure_data") / p.filename()).generic_string()},
                        {"rows", count_rows(p)},
                        {"fnv1a64", hex64(health::fnv1a64(read_file(p)))}});
  }
  m["datasets"] = datasets;
  write_json(dir / "manifest.json", m);
}

void setup_logging(const std::string &level) {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("wagepanel");
    spdlog::set_default_logger(l);
    return l;
  }();
  const auto lv = spdlog::level::from_str(level);
  if (lv == spdlog::level::off && level != "off") {
    throw ValidationError("invalid-argument", fmt::format("unknown log level '{}'", level));
  }
  logger->set_level(lv);
}

} // namespace

std::string version() { return WAGEPANEL_VERSION; }

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Matched employer-employee panel toolkit", "wagepanel"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "run directory")->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();
  app.set_config("--config", "", "read flags from a key=value file (command-line flags win)");
  app.set_version_flag("--version",
                       fmt::format("wagepanel {}\ncharlson_quan2005 fnv1a64:{}", version(),
                                   hex64(default_table().checksum())));

  PanelInputs in;

  SimulateArgs sa;
  auto *sim = app.add_subcommand("simulate", "generate a synthetic panel with known effects");
  sim->add_option("--workers", sa.cfg.n_workers)->capture_default_str();
  sim->add_option("--firms", sa.cfg.n_firms)->capture_default_str();
  sim->add_option("--years", sa.cfg.n_years)->capture_default_str();
  sim->add_option("--start-year", sa.cfg.start_year)->capture_default_str();
  sim->add_option("--theta-sd", sa.cfg.theta_sd)->capture_default_str();
  sim->add_option("--psi-sd", sa.cfg.psi_sd)->capture_default_str();
  sim->add_option("--noise-sd", sa.cfg.noise_sd)->capture_default_str();
  sim->add_option("--pgi-theta", sa.cfg.pgi_effect_on_theta, "corr(theta, PGI) among tertiary")->capture_default_str();
  sim->add_option("--pgi-mobility", sa.cfg.pgi_effect_on_mobility)->capture_default_str();
  sim->add_option("--pgi-horizon-slope", sa.cfg.pgi_horizon_slope)->capture_default_str();
  sim->add_option("--pgi-education-r2", sa.cfg.pgi_education_r2)->capture_default_str();
  sim->add_option("--mobility", sa.cfg.base_mobility_rate)->capture_default_str();
  sim->add_option("--nonemployment", sa.cfg.nonemployment_rate)->capture_default_str();
  sim->add_option("--tertiary-share", sa.cfg.tertiary_share)->capture_default_str();
  sim->add_option("--discount-rate", sa.cfg.discount_rate)->capture_default_str();
  sim->add_option("--diagnosis-hazard", sa.hazard, "annual hazard per Charlson category")->capture_default_str();
  sim->add_option("--diagnosis-tilt", sa.cfg.diagnosis_pgi_tilt)->capture_default_str();

  auto *con = app.add_subcommand("connectivity", "component histogram of the mobility graph");
  add_panel_flags(con, in);

  AkmArgs aa;
  auto *akm_cmd = app.add_subcommand("akm", "two-way fixed-effects estimation");
  add_panel_flags(akm_cmd, in);
  akm_cmd->add_option("--periods", aa.periods, "FIRST-LAST,... or 'default' (empty = whole panel)");
  akm_cmd->add_option("--tol", aa.tol)->capture_default_str();
  akm_cmd->add_option("--max-iter", aa.max_iter)->capture_default_str();

  TrajectoryArgs ta;
  auto *traj = app.add_subcommand("trajectory", "index x horizon trajectory regression and margins");
  add_panel_flags(traj, in);
  traj->add_option("--outcome", ta.outcome, "annual_income|log_income|firm_quality|job_count|cci")
      ->capture_default_str();
  traj->add_option("--indices", ta.indices, "comma-separated index columns")->capture_default_str();
  traj->add_option("--quantiles", ta.quantiles)->capture_default_str();
  traj->add_option("--subsample", ta.subsample, "pooled|secondary|tertiary")->capture_default_str();
  traj->add_option("--weights", ta.weights, "weights.csv path or weight column name");
  traj->add_option("--max-horizon", ta.max_horizon)->capture_default_str();
  traj->add_flag("--no-standardize", ta.no_standardize, "use index columns as given");

  LifetimeArgs la;
  auto *life = app.add_subcommand("lifetime", "discounted lifetime income and adjusted means");
  add_panel_flags(life, in);
  life->add_option("--rate", la.rate)->capture_default_str();
  life->add_option("--horizon-cap", la.horizon_cap)->capture_default_str();
  life->add_option("--indices", la.indices)->capture_default_str();
  life->add_option("--quantiles", la.quantiles)->capture_default_str();

  DecomposeArgs da;
  auto *dec = app.add_subcommand("decompose", "earnings-growth decomposition by mobility group");
  add_panel_flags(dec, in);
  dec->add_option("--group-index", da.group_index)->capture_default_str();
  dec->add_option("--group-deciles", da.group_deciles)->capture_default_str();
  dec->add_option("--bootstrap", da.bootstrap, "replicates (0 = none)")->capture_default_str();
  dec->add_option("--max-horizon", da.max_horizon)->capture_default_str();

  WeightsArgs wa;
  auto *wts = app.add_subcommand("weights", "inverse-probability weights against population margins");
  add_panel_flags(wts, in);
  wts->add_option("--population", wa.population, "CSV: cell columns..., count")->required();
  wts->add_option("--min-cell", wa.min_cell)->capture_default_str();
  wts->add_option("--balance-vars", wa.balance_vars, "comma-separated (default: all cell columns)");

  CciArgs ca;
  auto *cci = app.add_subcommand("cci", "Charlson comorbidity scores by cutoff age");
  cci->add_option("--diagnoses", ca.diagnoses);
  cci->add_option("--birth-years", ca.birth_years);
  cci->add_option("--table", ca.table, "reference table CSV (default: built-in)");
  cci->add_option("--first-cutoff", ca.first_cutoff)->capture_default_str();
  cci->add_option("--last-cutoff", ca.last_cutoff)->capture_default_str();

  ReportArgs ra;
  auto *rep = app.add_subcommand("report", "figure-ready data bundle for a completed run");
  add_panel_flags(rep, in);
  rep->add_option("--index", ra.index)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    setup_logging(g.log_level);
    if (sim->parsed()) {
      cmd_simulate(g, sa);
    } else if (con->parsed()) {
      cmd_connectivity(g, in, out);
    } else if (akm_cmd->parsed()) {
      cmd_akm(g, in, aa);
    } else if (traj->parsed()) {
      cmd_trajectory(g, in, ta);
    } else if (life->parsed()) {
      cmd_lifetime(g, in, la);
    } else if (dec->parsed()) {
      cmd_decompose(g, in, da);
    } else if (wts->parsed()) {
      cmd_weights(g, in, wa);
    } else if (cci->parsed()) {
      cmd_cci(g, ca);
    } else if (rep->parsed()) {
      cmd_report(g, in, ra);
    }
  } catch (const ValidationError &e) {
    err << "error: " << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const ConvergenceError &e) {
    err << "error: convergence: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    err << "error: io: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  std::vector<const char *> argv;
  argv.push_back("wagepanel");
  for (const auto &a : args) {
    argv.push_back(a.c_str());
  }
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace wagepanel::cli
