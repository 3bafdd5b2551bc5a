#include "wagepanel/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "wagepanel/error.hpp"
#include "wagepanel/stats.hpp"

namespace wagepanel::trajectory {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double z975() {
  static const double z = stats::normal_quantile(0.975);
  return z;
}

bool in_subsample(const PersonYearRecord &r, Subsample s) {
  switch (s) {
  case Subsample::pooled:
    return true;
  case Subsample::secondary:
    return r.education_level == Education::secondary;
  case Subsample::tertiary:
    return r.education_level == Education::tertiary;
  }
  return false;
}

/// Levels of the indicator controls, fixed over an estimation sample.
struct ControlLevels {
  std::vector<std::size_t> pc_pos;
  std::vector<int> birth_years;          ///< excludes the first
  std::vector<std::pair<int, int>> g_by; ///< (gender, birth year), excludes the first
  std::vector<int> biobanks;             ///< excludes the first

  std::size_t pc_begin = 0, gender_col = 0, by_begin = 0, gby_begin = 0, bio_begin = 0;

  void add_columns(regression::SparseDesign &d, const Panel &panel, const ControlSet &c) {
    pc_begin = d.n_cols();
    for (const auto &name : c.pcs) {
      d.add_column(name);
    }
    gender_col = d.n_cols();
    if (c.gender) {
      d.add_column("gender");
    }
    by_begin = d.n_cols();
    for (int y : birth_years) {
      d.add_column(fmt::format("birth_year_{}", y));
    }
    gby_begin = d.n_cols();
    for (auto [g, y] : g_by) {
      d.add_column(fmt::format("gender_{}_x_birth_year_{}", g, y));
    }
    bio_begin = d.n_cols();
    for (int b : biobanks) {
      const auto &labels = panel.biobank_labels();
      d.add_column(fmt::format("biobank_{}", b < static_cast<int>(labels.size()) ? labels[static_cast<std::size_t>(b)]
                                                                                 : std::to_string(b)));
    }
  }

  /// False when a PC is missing for the row.
  bool row_ok(const Panel &panel, std::size_t row) const {
    for (auto k : pc_pos) {
      if (!std::isfinite(panel.index_value(row, k))) {
        return false;
      }
    }
    return true;
  }

  void fill(regression::SparseDesign &d, const Panel &panel, std::size_t row, const ControlSet &c) const {
    const auto &r = panel[row];
    for (std::size_t k = 0; k < pc_pos.size(); ++k) {
      d.set(pc_begin + k, panel.index_value(row, pc_pos[k]));
    }
    if (c.gender) {
      d.set(gender_col, r.gender);
    }
    if (auto it = std::lower_bound(birth_years.begin(), birth_years.end(), r.birth_year);
        it != birth_years.end() && *it == r.birth_year) {
      d.set(by_begin + static_cast<std::size_t>(it - birth_years.begin()), 1.0);
    }
    const std::pair<int, int> key{r.gender, r.birth_year};
    if (auto it = std::lower_bound(g_by.begin(), g_by.end(), key); it != g_by.end() && *it == key) {
      d.set(gby_begin + static_cast<std::size_t>(it - g_by.begin()), 1.0);
    }
    if (auto it = std::lower_bound(biobanks.begin(), biobanks.end(), r.biobank);
        it != biobanks.end() && *it == r.biobank) {
      d.set(bio_begin + static_cast<std::size_t>(it - biobanks.begin()), 1.0);
    }
  }
};

ControlLevels control_levels(const Panel &panel, std::span<const std::size_t> rows, const ControlSet &c) {
  ControlLevels lv;
  for (const auto &name : c.pcs) {
    lv.pc_pos.push_back(panel.index_position(name));
  }
  std::set<int> by, bio;
  std::set<std::pair<int, int>> gby;
  for (auto i : rows) {
    by.insert(panel[i].birth_year);
    bio.insert(panel[i].biobank);
    gby.insert({panel[i].gender, panel[i].birth_year});
  }
  if (c.birth_year && by.size() > 1) {
    lv.birth_years.assign(std::next(by.begin()), by.end());
  }
  if (c.gender_x_birth_year && gby.size() > 1) {
    lv.g_by.assign(std::next(gby.begin()), gby.end());
  }
  if (c.biobank && bio.size() > 1) {
    lv.biobanks.assign(std::next(bio.begin()), bio.end());
  }
  return lv;
}

std::vector<double> resolve_weights(const Panel &panel, const std::string &name) {
  std::vector<double> w(panel.size());
  if (name == "weight") {
    for (std::size_t i = 0; i < panel.size(); ++i) {
      w[i] = panel[i].weight;
    }
    return w;
  }
  const auto k = panel.index_position(name);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    w[i] = panel.index_value(i, k);
  }
  return w;
}

double quadratic_form(const Eigen::VectorXd &a, const Eigen::MatrixXd &v) { return a.dot(v * a); }

} // namespace

std::string_view to_string(Outcome o) {
  switch (o) {
  case Outcome::annual_income:
    return "annual_income";
  case Outcome::log_income:
    return "log_income";
  case Outcome::firm_quality:
    return "firm_quality";
  case Outcome::job_count:
    return "job_count";
  case Outcome::cci:
    return "cci";
  }
  return "?";
}

std::string_view to_string(Subsample s) {
  switch (s) {
  case Subsample::pooled:
    return "pooled";
  case Subsample::secondary:
    return "secondary";
  case Subsample::tertiary:
    return "tertiary";
  }
  return "?";
}

Outcome parse_outcome(std::string_view s) {
  for (auto o : {Outcome::annual_income, Outcome::log_income, Outcome::firm_quality, Outcome::job_count, Outcome::cci}) {
    if (s == to_string(o)) {
      return o;
    }
  }
  throw ValidationError("invalid-outcome", fmt::format("unknown outcome '{}'", s));
}

Subsample parse_subsample(std::string_view s) {
  for (auto v : {Subsample::pooled, Subsample::secondary, Subsample::tertiary}) {
    if (s == to_string(v)) {
      return v;
    }
  }
  throw ValidationError("invalid-subsample", fmt::format("unknown subsample '{}'", s));
}

std::vector<std::string> ControlSet::default_pcs(int n) {
  std::vector<std::string> out;
  for (int k = 1; k <= n; ++k) {
    out.push_back(fmt::format("PC{}", k));
  }
  return out;
}

ControlSet education_controls(int n_pcs) { return ControlSet{ControlSet::default_pcs(n_pcs), false, false, true, true}; }

void TrajectorySpec::validate() const {
  if (indices.empty()) {
    throw ValidationError("invalid-spec", "at least one index is required");
  }
  if (max_horizon < 0) {
    throw ValidationError("invalid-spec", "max_horizon must be nonnegative");
  }
  std::set<std::string> seen(indices.begin(), indices.end());
  if (seen.size() != indices.size()) {
    throw ValidationError("invalid-spec", "duplicate index names");
  }
}

std::vector<double> outcome_column(const Panel &panel, Outcome outcome) {
  std::vector<double> out(panel.size(), kNaN);
  switch (outcome) {
  case Outcome::annual_income:
    for (std::size_t i = 0; i < panel.size(); ++i) {
      out[i] = panel[i].annual_earnings;
    }
    return out;
  case Outcome::log_income:
    for (std::size_t i = 0; i < panel.size(); ++i) {
      if (panel[i].employed() && panel[i].annual_earnings > 0.0) {
        out[i] = std::log(panel[i].annual_earnings);
      }
    }
    return out;
  case Outcome::job_count:
    return job_count_column(panel);
  case Outcome::firm_quality:
  case Outcome::cci:
    break;
  }
  throw ValidationError("invalid-outcome",
                        fmt::format("outcome '{}' needs auxiliary inputs", to_string(outcome)));
}

std::vector<double> firm_quality_column(const Panel &panel, std::span<const akm::AkmFit> fits) {
  std::vector<double> out(panel.size(), kNaN);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto &r = panel[i];
    if (!r.firm_id) {
      continue;
    }
    for (const auto &f : fits) {
      if (f.period.contains(r.year)) {
        if (auto p = f.psi_std_of(*r.firm_id)) {
          out[i] = *p;
        }
        break;
      }
    }
  }
  return out;
}

std::vector<double> job_count_column(const Panel &panel) {
  std::vector<double> out(panel.size(), 0.0);
  for (const auto &b : panel.person_blocks()) {
    int count = 0;
    std::optional<std::int64_t> last;
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const auto &f = panel[i].firm_id;
      if (f) {
        if (!last || *last != *f) {
          ++count;
        }
        last = f;
      }
      out[i] = count;
    }
  }
  return out;
}

std::vector<double> cci_column(const Panel &panel, std::span<const health::CciSeries> series) {
  std::unordered_map<std::int64_t, const health::CciSeries *> by_person;
  for (const auto &s : series) {
    by_person[s.person_id] = &s;
  }
  std::vector<double> out(panel.size(), kNaN);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    auto it = by_person.find(panel[i].person_id);
    if (it == by_person.end()) {
      continue;
    }
    auto s = it->second->scores.find(panel[i].age());
    if (s != it->second->scores.end()) {
      out[i] = s->second;
    }
  }
  return out;
}

Panel standardize_index_columns(const Panel &panel, std::span<const std::string> names) {
  Panel out = panel;
  const auto blocks = panel.person_blocks();
  for (const auto &name : names) {
    const auto k = panel.index_position(name);
    std::vector<double> per_person;
    for (const auto &b : blocks) {
      const double v = panel.index_value(b.begin, k);
      if (std::isfinite(v)) {
        per_person.push_back(v);
      }
    }
    const double m = stats::mean(per_person);
    const double s = per_person.size() > 1 ? stats::sd(per_person) : 0.0;
    if (!(s > 0.0)) {
      throw ValidationError("zero-variance", fmt::format("index '{}' has no variation", name));
    }
    std::vector<double> col(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i) {
      col[i] = (panel.index_value(i, k) - m) / s;
    }
    out = out.with_index_column(name, col);
  }
  return out;
}

std::size_t TrajectoryFit::interaction_column(std::size_t index, int h) const {
  const auto nh = horizons.size();
  return nh + index * nh + static_cast<std::size_t>(h);
}

double TrajectoryFit::beta(std::size_t index, int h) const {
  const auto c = interaction_column(index, h);
  return ls.kept[c] ? ls.coef(static_cast<Eigen::Index>(c)) : kNaN;
}

double TrajectoryFit::beta_se(std::size_t index, int h) const {
  const auto c = static_cast<Eigen::Index>(interaction_column(index, h));
  return ls.kept[static_cast<std::size_t>(c)] ? std::sqrt(ls.cov(c, c)) : kNaN;
}

std::size_t TrajectoryFit::index_position(std::string_view name) const {
  for (std::size_t k = 0; k < spec.indices.size(); ++k) {
    if (spec.indices[k] == name) {
      return k;
    }
  }
  throw ValidationError("missing-column", fmt::format("index '{}' is not part of the fit", name));
}

TrajectoryFit fit_trajectory(const Panel &panel, const TrajectorySpec &spec, std::span<const double> outcome,
                             std::span<const double> row_weights, int threads) {
  spec.validate();
  if (outcome.size() != panel.size() || (!row_weights.empty() && row_weights.size() != panel.size())) {
    throw ValidationError("shape-mismatch", "outcome/weights must have one value per panel row");
  }
  std::vector<std::size_t> idx_pos;
  for (const auto &name : spec.indices) {
    idx_pos.push_back(panel.index_position(name));
  }
  std::vector<double> resolved;
  if (row_weights.empty() && spec.weights) {
    resolved = resolve_weights(panel, *spec.weights);
    row_weights = resolved;
  }

  ControlLevels pcs_only;
  for (const auto &name : spec.controls.pcs) {
    pcs_only.pc_pos.push_back(panel.index_position(name));
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto &r = panel[i];
    const int h = r.horizon();
    if (h < 0 || h > spec.max_horizon || !in_subsample(r, spec.subsample) || !std::isfinite(outcome[i])) {
      continue;
    }
    if (!row_weights.empty() && !(row_weights[i] > 0.0 && std::isfinite(row_weights[i]))) {
      continue;
    }
    bool ok = pcs_only.row_ok(panel, i);
    for (auto k : idx_pos) {
      ok = ok && std::isfinite(panel.index_value(i, k));
    }
    if (ok) {
      rows.push_back(i);
    }
  }
  if (rows.empty()) {
    throw ValidationError("empty-subsample",
                          fmt::format("no usable rows for subsample '{}'", to_string(spec.subsample)));
  }

  TrajectoryFit fit;
  fit.spec = spec;
  for (int h = 0; h <= spec.max_horizon; ++h) {
    fit.horizons.push_back(h);
  }
  regression::SparseDesign d;
  for (int h : fit.horizons) {
    d.add_column(fmt::format("h{}", h));
  }
  for (const auto &name : spec.indices) {
    for (int h : fit.horizons) {
      d.add_column(fmt::format("{}_x_h{}", name, h));
    }
  }
  ControlLevels lv = control_levels(panel, rows, spec.controls);
  lv.add_columns(d, panel, spec.controls);
  std::vector<int> years;
  if (spec.calendar_year) {
    std::set<int> ys;
    for (auto i : rows) {
      ys.insert(panel[i].year);
    }
    if (ys.size() > 1) {
      years.assign(std::next(ys.begin()), ys.end());
    }
  }
  const std::size_t year_begin = d.n_cols();
  for (int y : years) {
    d.add_column(fmt::format("year_{}", y));
  }

  const std::size_t nh = fit.horizons.size();
  fit.obs_per_horizon.assign(nh, 0);
  std::vector<double> y(rows.size()), w;
  std::vector<std::int64_t> clusters(rows.size());
  if (!row_weights.empty()) {
    w.resize(rows.size());
  }
  fit.index_samples.assign(spec.indices.size(), {});
  std::int64_t last_person = 0;
  bool first = true;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const std::size_t i = rows[n];
    const auto &r = panel[i];
    const auto h = static_cast<std::size_t>(r.horizon());
    d.set(h, 1.0);
    for (std::size_t k = 0; k < idx_pos.size(); ++k) {
      d.set(nh + k * nh + h, panel.index_value(i, idx_pos[k]));
    }
    lv.fill(d, panel, i, spec.controls);
    if (auto it = std::lower_bound(years.begin(), years.end(), r.year); it != years.end() && *it == r.year) {
      d.set(year_begin + static_cast<std::size_t>(it - years.begin()), 1.0);
    }
    d.end_row();
    y[n] = outcome[i];
    if (!w.empty()) {
      w[n] = row_weights[i];
    }
    clusters[n] = r.person_id;
    ++fit.obs_per_horizon[h];
    if (first || r.person_id != last_person) {
      ++fit.n_persons;
      for (std::size_t k = 0; k < idx_pos.size(); ++k) {
        fit.index_samples[k].push_back(panel.index_value(i, idx_pos[k]));
      }
      last_person = r.person_id;
      first = false;
    }
  }
  for (std::size_t h = 0; h < nh; ++h) {
    if (fit.obs_per_horizon[h] == 0) {
      fit.empty_horizons.push_back(static_cast<int>(h));
    }
  }
  if (!fit.empty_horizons.empty()) {
    spdlog::warn("trajectory: {} horizon cell(s) without observations", fit.empty_horizons.size());
  }

  fit.ls = regression::fit_least_squares(d, y, w, clusters, threads);
  std::vector<std::size_t> inter;
  for (std::size_t c = nh; c < nh + idx_pos.size() * nh; ++c) {
    inter.push_back(c);
  }
  fit.interactions_test = regression::wald_test(fit.ls, inter);
  return fit;
}

TrajectoryFit fit_trajectory(const Panel &panel, const TrajectorySpec &spec, int threads) {
  const auto y = outcome_column(panel, spec.outcome);
  return fit_trajectory(panel, spec, y, {}, threads);
}

std::vector<MarginCurve> margins(const TrajectoryFit &fit, std::span<const double> quantiles, std::string_view index) {
  const std::size_t k = fit.index_position(index);
  std::vector<double> means;
  for (const auto &s : fit.index_samples) {
    means.push_back(stats::mean(s));
  }
  std::vector<MarginCurve> out;
  for (double q : quantiles) {
    if (!(q > 0.0 && q < 1.0)) {
      throw ValidationError("invalid-quantile", fmt::format("quantile {} outside (0, 1)", q));
    }
    MarginCurve curve;
    curve.index = std::string(index);
    curve.quantile = q;
    curve.index_value = stats::quantile(fit.index_samples[k], q);
    const std::size_t nh = fit.horizons.size();
    for (int h : fit.horizons) {
      if (!fit.ls.kept[fit.horizon_column(h)]) {
        continue;
      }
      Eigen::VectorXd a = fit.ls.means;
      for (std::size_t c = 0; c < nh * (1 + fit.spec.indices.size()); ++c) {
        a(static_cast<Eigen::Index>(c)) = 0.0;
      }
      a(static_cast<Eigen::Index>(fit.horizon_column(h))) = 1.0;
      for (std::size_t j = 0; j < fit.spec.indices.size(); ++j) {
        a(static_cast<Eigen::Index>(fit.interaction_column(j, h))) = j == k ? curve.index_value : means[j];
      }
      MarginPoint p;
      p.horizon = h;
      p.estimate = a.dot(fit.ls.coef);
      p.se = std::sqrt(std::max(0.0, quadratic_form(a, fit.ls.cov)));
      p.ci_lo = p.estimate - z975() * p.se;
      p.ci_hi = p.estimate + z975() * p.se;
      curve.points.push_back(p);
    }
    out.push_back(std::move(curve));
  }
  return out;
}

std::vector<PresentValue> lifetime_income(const Panel &panel, double rate, int horizon_cap) {
  if (!(rate > -1.0)) {
    throw ValidationError("invalid-rate", fmt::format("discount rate {} must exceed -1", rate));
  }
  std::vector<PresentValue> out;
  for (const auto &b : panel.person_blocks()) {
    PresentValue pv{b.person_id, 0.0};
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const int h = panel[i].horizon();
      if (h >= 0 && h <= horizon_cap) {
        pv.pv += panel[i].annual_earnings / std::pow(1.0 + rate, h);
      }
    }
    out.push_back(pv);
  }
  return out;
}

regression::SparseDesign person_controls(const Panel &panel, const ControlSet &controls) {
  std::vector<std::size_t> firsts;
  for (const auto &b : panel.person_blocks()) {
    firsts.push_back(b.begin);
  }
  ControlLevels lv = control_levels(panel, firsts, controls);
  regression::SparseDesign d;
  d.add_column("intercept");
  lv.add_columns(d, panel, controls);
  for (auto i : firsts) {
    d.set(0, 1.0);
    lv.fill(d, panel, i, controls);
    d.end_row();
  }
  return d;
}

PersonRegression fit_person_level(const Panel &panel, std::span<const double> y, std::span<const std::string> indices,
                                  const ControlSet &controls, std::span<const double> person_weights) {
  const auto blocks = panel.person_blocks();
  if (y.size() != blocks.size() || (!person_weights.empty() && person_weights.size() != blocks.size())) {
    throw ValidationError("shape-mismatch", "person-level outcome must have one value per person");
  }
  std::vector<std::size_t> idx_pos;
  for (const auto &name : indices) {
    idx_pos.push_back(panel.index_position(name));
  }
  std::vector<std::size_t> firsts;
  std::vector<double> yy, ww;
  for (std::size_t p = 0; p < blocks.size(); ++p) {
    const auto i = blocks[p].begin;
    bool ok = std::isfinite(y[p]);
    for (auto k : idx_pos) {
      ok = ok && std::isfinite(panel.index_value(i, k));
    }
    if (ok) {
      firsts.push_back(i);
      yy.push_back(y[p]);
      if (!person_weights.empty()) {
        ww.push_back(person_weights[p]);
      }
    }
  }
  if (firsts.empty()) {
    throw ValidationError("empty-sample", "no persons with finite outcome and indices");
  }
  ControlLevels lv = control_levels(panel, firsts, controls);
  regression::SparseDesign d;
  d.add_column("intercept");
  for (const auto &name : indices) {
    d.add_column(name);
  }
  lv.add_columns(d, panel, controls);
  PersonRegression out;
  out.indices.assign(indices.begin(), indices.end());
  out.index_samples.assign(indices.size(), {});
  for (auto i : firsts) {
    d.set(0, 1.0);
    for (std::size_t k = 0; k < idx_pos.size(); ++k) {
      const double v = panel.index_value(i, idx_pos[k]);
      d.set(1 + k, v);
      out.index_samples[k].push_back(v);
    }
    lv.fill(d, panel, i, controls);
    d.end_row();
  }
  out.ls = regression::fit_least_squares(d, yy, ww);
  return out;
}

std::vector<AdjustedMean> adjusted_means(const PersonRegression &fit, std::span<const double> quantiles,
                                         std::string_view index) {
  auto it = std::find(fit.indices.begin(), fit.indices.end(), index);
  if (it == fit.indices.end()) {
    throw ValidationError("missing-column", fmt::format("index '{}' is not part of the fit", index));
  }
  const auto k = static_cast<std::size_t>(it - fit.indices.begin());
  std::vector<AdjustedMean> out;
  for (double q : quantiles) {
    if (!(q > 0.0 && q < 1.0)) {
      throw ValidationError("invalid-quantile", fmt::format("quantile {} outside (0, 1)", q));
    }
    AdjustedMean m;
    m.index = std::string(index);
    m.quantile = q;
    m.index_value = stats::quantile(fit.index_samples[k], q);
    Eigen::VectorXd a = fit.ls.means;
    a(static_cast<Eigen::Index>(1 + k)) = m.index_value;
    m.estimate = a.dot(fit.ls.coef);
    m.se = std::sqrt(std::max(0.0, quadratic_form(a, fit.ls.cov)));
    m.ci_lo = m.estimate - z975() * m.se;
    m.ci_hi = m.estimate + z975() * m.se;
    out.push_back(m);
  }
  return out;
}

namespace {

std::vector<double> residualize(std::span<const double> v, const regression::SparseDesign *controls) {
  if (controls) {
    return regression::fit_least_squares(*controls, v).residuals;
  }
  const double m = stats::mean(v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] - m;
  }
  return out;
}

void standardize(std::vector<double> &v) {
  const double m = stats::mean(v);
  const double s = stats::sd(v);
  for (auto &x : v) {
    x = s > 0.0 ? (x - m) / s : 0.0;
  }
}

regression::SparseDesign intercept_design(std::size_t n) {
  regression::SparseDesign d;
  d.add_column("intercept");
  for (std::size_t i = 0; i < n; ++i) {
    d.set(0, 1.0);
    d.end_row();
  }
  return d;
}

regression::SparseDesign append_column(const regression::SparseDesign &d, std::span<const double> v,
                                       const std::string &name) {
  regression::SparseDesign out;
  out.names = d.names;
  const auto c = out.add_column(name);
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    for (std::size_t a = d.row_start[i]; a < d.row_start[i + 1]; ++a) {
      out.set(d.cols[a], d.vals[a]);
    }
    out.set(c, v[i]);
    out.end_row();
  }
  return out;
}

} // namespace

Binscatter binscatter(std::span<const double> x, std::span<const double> y, const regression::SparseDesign *controls,
                      std::size_t n_bins) {
  if (x.size() != y.size() || (controls && controls->n_rows() != x.size())) {
    throw ValidationError("shape-mismatch", "binscatter inputs differ in length");
  }
  if (n_bins < 2) {
    throw ValidationError("invalid-bins", "binscatter needs at least 2 bins");
  }
  if (x.size() < 2) {
    throw ValidationError("empty-sample", "binscatter needs at least 2 observations");
  }
  std::vector<double> xs = residualize(x, controls);
  std::vector<double> ys = residualize(y, controls);
  standardize(xs);
  standardize(ys);

  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::size_t distinct = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (r == 0 || xs[order[r]] != xs[order[r - 1]]) {
      ++distinct;
    }
  }
  Binscatter out;
  out.n = xs.size();
  out.n_bins_used = std::min(n_bins, distinct);
  if (out.n_bins_used < n_bins) {
    spdlog::warn("binscatter: only {} distinct x values, using {} bins instead of {}", distinct, out.n_bins_used,
                 n_bins);
  }
  const std::size_t n = xs.size();
  for (std::size_t b = 0; b < out.n_bins_used; ++b) {
    double sx = 0.0, sy = 0.0;
    const std::size_t lo = n * b / out.n_bins_used, hi = n * (b + 1) / out.n_bins_used;
    for (std::size_t r = lo; r < hi; ++r) {
      sx += xs[order[r]];
      sy += ys[order[r]];
    }
    const double cnt = static_cast<double>(hi - lo);
    out.bins.emplace_back(sx / cnt, sy / cnt);
  }
  const auto d = append_column(intercept_design(n), xs, "x");
  const auto ls = regression::fit_least_squares(d, ys);
  out.slope = ls.coef(1);
  out.slope_se = std::sqrt(std::max(0.0, ls.cov(1, 1)));
  return out;
}

double incremental_r2(std::span<const double> outcome, std::span<const double> index,
                      const regression::SparseDesign *controls) {
  if (outcome.size() != index.size() || (controls && controls->n_rows() != outcome.size())) {
    throw ValidationError("shape-mismatch", "incremental_r2 inputs differ in length");
  }
  const regression::SparseDesign base = controls ? *controls : intercept_design(outcome.size());
  const double r2_base = regression::fit_least_squares(base, outcome).r2;
  const double r2_full = regression::fit_least_squares(append_column(base, index, "index"), outcome).r2;
  return r2_full - r2_base;
}

} // namespace wagepanel::trajectory
