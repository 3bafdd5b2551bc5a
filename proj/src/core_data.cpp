#include "wagepanel/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "wagepanel/csv.hpp"
#include "wagepanel/error.hpp"
#include "wagepanel/stats.hpp"

namespace wagepanel {

std::string_view to_string(Education e) { return e == Education::tertiary ? "tertiary" : "secondary"; }

std::optional<Education> parse_education(std::string_view s) {
  if (s == "secondary") {
    return Education::secondary;
  }
  if (s == "tertiary") {
    return Education::tertiary;
  }
  return std::nullopt;
}

std::optional<double> monthly_earnings(const PersonYearRecord &rec) {
  if (rec.months_worked <= 0) {
    return std::nullopt;
  }
  return rec.annual_earnings / rec.months_worked;
}

Panel::Panel(std::vector<PersonYearRecord> records, std::vector<std::string> index_names,
             std::vector<double> index_values, std::map<int, double> deflator,
             std::vector<std::string> biobank_labels)
    : index_names_(std::move(index_names)), deflator_(std::move(deflator)),
      biobank_labels_(std::move(biobank_labels)) {
  const std::size_t k = index_names_.size();
  if (index_values.size() != records.size() * k) {
    throw ValidationError("shape", "index value matrix does not match record count");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  const bool sorted = std::is_sorted(records.begin(), records.end(), [](const auto &a, const auto &b) {
    return std::tie(a.person_id, a.year) < std::tie(b.person_id, b.year);
  });
  if (!sorted) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(records[a].person_id, records[a].year) < std::tie(records[b].person_id, records[b].year);
    });
  }
  records_.reserve(records.size());
  index_values_.reserve(index_values.size());
  for (std::size_t i : order) {
    records_.push_back(records[i]);
    index_values_.insert(index_values_.end(), index_values.begin() + static_cast<std::ptrdiff_t>(i * k),
                         index_values.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
  }

  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto &r = records_[i];
    if (i > 0 && records_[i - 1].person_id == r.person_id && records_[i - 1].year == r.year) {
      throw ValidationError("duplicate-key",
                            fmt::format("duplicate (person_id, year) = ({}, {})", r.person_id, r.year));
    }
    if (!(r.annual_earnings >= 0.0) || !std::isfinite(r.annual_earnings)) {
      throw ValidationError("invalid-value", fmt::format("person {} year {}: earnings must be finite and >= 0",
                                                         r.person_id, r.year));
    }
    if (r.months_worked < 0 || r.months_worked > 12) {
      throw ValidationError("invalid-value",
                            fmt::format("person {} year {}: months_worked outside 0..12", r.person_id, r.year));
    }
    if ((r.months_worked == 0) != !r.firm_id.has_value()) {
      throw ValidationError("invalid-value", fmt::format("person {} year {}: months_worked = 0 iff firm_id is absent",
                                                         r.person_id, r.year));
    }
    if (!(r.weight > 0.0) || !std::isfinite(r.weight)) {
      throw ValidationError("invalid-value", fmt::format("person {} year {}: weight must be positive", r.person_id,
                                                         r.year));
    }
    if (r.biobank < 0 || static_cast<std::size_t>(r.biobank) >= biobank_labels_.size()) {
      throw ValidationError("invalid-value", fmt::format("person {} year {}: biobank code out of range",
                                                         r.person_id, r.year));
    }
    const auto d = deflator_.find(r.year);
    if (d == deflator_.end()) {
      throw ValidationError("deflator-gap", fmt::format("deflator has no entry for year {}", r.year));
    }
  }
  for (const auto &[year, value] : deflator_) {
    if (!(value > 0.0)) {
      throw ValidationError("invalid-value", fmt::format("deflator for year {} must be positive", year));
    }
  }
}

std::optional<std::size_t> Panel::find_index(std::string_view name) const {
  for (std::size_t k = 0; k < index_names_.size(); ++k) {
    if (index_names_[k] == name) {
      return k;
    }
  }
  return std::nullopt;
}

std::size_t Panel::index_position(std::string_view name) const {
  if (auto k = find_index(name)) {
    return *k;
  }
  throw ValidationError("missing-column", fmt::format("panel has no index column '{}'", name));
}

std::vector<double> Panel::index_column(std::string_view name) const {
  const std::size_t k = index_position(name);
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out[i] = index_value(i, k);
  }
  return out;
}

std::vector<PersonBlock> Panel::person_blocks() const {
  std::vector<PersonBlock> out;
  std::size_t i = 0;
  while (i < records_.size()) {
    std::size_t j = i + 1;
    while (j < records_.size() && records_[j].person_id == records_[i].person_id) {
      ++j;
    }
    out.push_back({records_[i].person_id, i, j});
    i = j;
  }
  return out;
}

std::size_t Panel::person_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (i == 0 || records_[i].person_id != records_[i - 1].person_id) {
      ++n;
    }
  }
  return n;
}

Panel Panel::subset(std::span<const std::size_t> rows) const {
  const std::size_t k = index_names_.size();
  std::vector<PersonYearRecord> recs;
  std::vector<double> vals;
  recs.reserve(rows.size());
  vals.reserve(rows.size() * k);
  for (std::size_t r : rows) {
    recs.push_back(records_.at(r));
    for (std::size_t c = 0; c < k; ++c) {
      vals.push_back(index_values_[r * k + c]);
    }
  }
  Panel p(std::move(recs), index_names_, std::move(vals), deflator_, biobank_labels_);
  p.notes_ = notes_;
  return p;
}

Panel Panel::with_index_column(const std::string &name, std::span<const double> values) const {
  if (values.size() != size()) {
    throw ValidationError("shape", fmt::format("column '{}' has {} values for {} rows", name, values.size(), size()));
  }
  auto names = index_names_;
  const auto existing = find_index(name);
  const std::size_t k_old = index_names_.size();
  if (!existing) {
    names.push_back(name);
  }
  const std::size_t k_new = names.size();
  std::vector<double> vals(size() * k_new);
  for (std::size_t r = 0; r < size(); ++r) {
    for (std::size_t c = 0; c < k_old; ++c) {
      vals[r * k_new + c] = index_values_[r * k_old + c];
    }
    vals[r * k_new + (existing ? *existing : k_old)] = values[r];
  }
  Panel p(records_, std::move(names), std::move(vals), deflator_, biobank_labels_);
  p.notes_ = notes_;
  return p;
}

void FilterSpec::validate() const {
  if (min_age < 0 || max_age < 0 || min_earnings_fraction_of_median < 0.0 || min_firm_size < 0 || min_months < 0 ||
      horizon_cap < 0 || (require_followup_past_age && *require_followup_past_age < 0)) {
    throw ValidationError("invalid-config", "filter thresholds must be nonnegative");
  }
}

// ---------------------------------------------------------------------------
// IO

namespace {

const std::vector<std::string> kFixedColumns = {
    "person_id",       "year",           "birth_year",       "gender",          "firm_id",
    "annual_earnings", "months_worked",  "education_level",  "education_field", "institution_id",
    "graduation_year", "biobank"};

} // namespace

std::map<int, double> load_deflator(const std::filesystem::path &deflator_csv) {
  const auto t = csv::read(deflator_csv);
  const auto cy = t.column("year");
  const auto cd = t.column("deflator");
  std::map<int, double> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const int year = static_cast<int>(csv::parse_int(t.rows[i][cy], t, i, "year"));
    const double d = csv::parse_double(t.rows[i][cd], t, i, "deflator");
    if (!(d > 0.0)) {
      throw ValidationError("invalid-value", fmt::format("{}:{}: deflator must be positive", deflator_csv.string(),
                                                         t.line_numbers[i]));
    }
    if (!out.emplace(year, d).second) {
      throw ValidationError("duplicate-key",
                            fmt::format("{}:{}: year {} repeated", deflator_csv.string(), t.line_numbers[i], year));
    }
  }
  int prev = 0;
  bool first = true;
  for (const auto &[year, _] : out) {
    if (!first && year != prev + 1) {
      throw ValidationError("deflator-gap",
                            fmt::format("{}: years {} and {} are not consecutive", deflator_csv.string(), prev, year));
    }
    prev = year;
    first = false;
  }
  return out;
}

Panel load_panel(const std::filesystem::path &panel_csv, const std::filesystem::path &deflator_csv) {
  const auto deflator = load_deflator(deflator_csv);
  const auto t = csv::read(panel_csv);
  std::vector<std::size_t> fixed;
  for (const auto &name : kFixedColumns) {
    fixed.push_back(t.column(name));
  }
  const auto weight_col = t.find_column("weight");
  std::vector<std::size_t> index_cols;
  std::vector<std::string> index_names;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (std::find(fixed.begin(), fixed.end(), c) == fixed.end() && (!weight_col || c != *weight_col)) {
      index_cols.push_back(c);
      index_names.push_back(t.header[c]);
    }
  }

  std::vector<PersonYearRecord> recs;
  std::vector<double> vals;
  std::vector<std::string> biobanks;
  std::map<std::string, int> biobank_code;
  std::map<std::pair<std::int64_t, int>, std::size_t> seen;
  recs.reserve(t.rows.size());
  vals.reserve(t.rows.size() * index_cols.size());

  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto &row = t.rows[i];
    auto field = [&](std::size_t k) -> const std::string & { return row[fixed[k]]; };
    PersonYearRecord r;
    r.person_id = csv::parse_int(field(0), t, i, "person_id");
    r.year = static_cast<int>(csv::parse_int(field(1), t, i, "year"));
    r.birth_year = static_cast<int>(csv::parse_int(field(2), t, i, "birth_year"));
    r.gender = static_cast<int>(csv::parse_int(field(3), t, i, "gender"));
    r.firm_id = csv::parse_optional_int(field(4), t, i, "firm_id");
    r.annual_earnings = csv::parse_double(field(5), t, i, "annual_earnings");
    r.months_worked = static_cast<int>(csv::parse_int(field(6), t, i, "months_worked"));
    const auto edu = parse_education(field(7));
    if (!edu) {
      throw ValidationError("invalid-value", fmt::format("{}:{}: education_level must be secondary or tertiary, got '{}'",
                                                         panel_csv.string(), t.line_numbers[i], field(7)));
    }
    r.education_level = *edu;
    if (auto f = csv::parse_optional_int(field(8), t, i, "education_field")) {
      r.education_field = static_cast<int>(*f);
    }
    r.institution_id = csv::parse_optional_int(field(9), t, i, "institution_id");
    r.graduation_year = static_cast<int>(csv::parse_int(field(10), t, i, "graduation_year"));
    const auto &bb = field(11);
    auto [it, inserted] = biobank_code.emplace(bb, static_cast<int>(biobanks.size()));
    if (inserted) {
      biobanks.push_back(bb);
    }
    r.biobank = it->second;
    if (weight_col && !row[*weight_col].empty()) {
      r.weight = csv::parse_double(row[*weight_col], t, i, "weight");
    }
    if (r.gender != 0 && r.gender != 1) {
      throw ValidationError("invalid-value",
                            fmt::format("{}:{}: gender must be 0 or 1", panel_csv.string(), t.line_numbers[i]));
    }
    if (r.annual_earnings < 0.0 || r.months_worked < 0 || r.months_worked > 12 ||
        (r.months_worked == 0) != !r.firm_id.has_value()) {
      throw ValidationError("invalid-value",
                            fmt::format("{}:{}: inconsistent employment fields (earnings >= 0, months 0..12, "
                                        "months = 0 iff firm_id empty)",
                                        panel_csv.string(), t.line_numbers[i]));
    }
    if (!deflator.contains(r.year)) {
      throw ValidationError("deflator-gap", fmt::format("{}:{}: year {} missing from {}", panel_csv.string(),
                                                        t.line_numbers[i], r.year, deflator_csv.string()));
    }
    auto [dup, fresh] = seen.emplace(std::make_pair(r.person_id, r.year), i);
    if (!fresh) {
      throw ValidationError("duplicate-key",
                            fmt::format("{}: rows {} and {} share (person_id, year) = ({}, {})", panel_csv.string(),
                                        t.line_numbers[dup->second], t.line_numbers[i], r.person_id, r.year));
    }
    for (std::size_t c : index_cols) {
      vals.push_back(row[c].empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : csv::parse_double(row[c], t, i, t.header[c]));
    }
    recs.push_back(r);
  }
  if (biobanks.empty()) {
    biobanks.push_back("default");
  }
  Panel nominal(std::move(recs), std::move(index_names), std::move(vals), deflator, std::move(biobanks));
  return deflate(nominal);
}

void write_deflator(const std::map<int, double> &deflator, const std::filesystem::path &deflator_csv) {
  csv::Writer w(deflator_csv, {"year", "deflator"});
  for (const auto &[year, d] : deflator) {
    w.row({std::to_string(year), csv::format(d)});
  }
  w.close();
}

void write_panel(const Panel &panel, const std::filesystem::path &panel_csv) {
  auto header = kFixedColumns;
  for (const auto &n : panel.index_names()) {
    header.push_back(n);
  }
  csv::Writer w(panel_csv, header);
  const std::size_t k = panel.index_names().size();
  std::vector<std::string> f;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto &r = panel[i];
    f.clear();
    f.push_back(std::to_string(r.person_id));
    f.push_back(std::to_string(r.year));
    f.push_back(std::to_string(r.birth_year));
    f.push_back(std::to_string(r.gender));
    f.push_back(r.firm_id ? std::to_string(*r.firm_id) : "");
    f.push_back(csv::format(r.annual_earnings * panel.deflator().at(r.year)));
    f.push_back(std::to_string(r.months_worked));
    f.emplace_back(to_string(r.education_level));
    f.push_back(r.education_field ? fmt::format("{:03d}", *r.education_field) : "");
    f.push_back(r.institution_id ? std::to_string(*r.institution_id) : "");
    f.push_back(std::to_string(r.graduation_year));
    f.push_back(panel.biobank_labels().at(static_cast<std::size_t>(r.biobank)));
    for (std::size_t c = 0; c < k; ++c) {
      const double v = panel.index_value(i, c);
      f.push_back(std::isnan(v) ? "" : csv::format(v));
    }
    w.row(f);
  }
  w.close();
}

Panel deflate(const Panel &nominal) {
  const auto &d = nominal.deflator();
  return nominal.rescale_earnings([&](int year) { return 1.0 / d.at(year); }, d);
}

// ---------------------------------------------------------------------------
// Selection and filters

std::optional<std::int64_t> select_main_employer(std::span<const EmploymentSpell> spells) {
  const EmploymentSpell *best = nullptr;
  for (const auto &s : spells) {
    if (!s.ongoing_at_year_end) {
      continue;
    }
    if (best == nullptr || s.earnings > best->earnings ||
        (s.earnings == best->earnings && s.firm_id < best->firm_id)) {
      best = &s;
    }
  }
  if (best == nullptr) {
    return std::nullopt;
  }
  return best->firm_id;
}

std::map<int, double> yearly_median_monthly_earnings(const Panel &panel) {
  std::map<int, std::vector<double>> by_year;
  for (const auto &r : panel.records()) {
    if (auto m = monthly_earnings(r)) {
      by_year[r.year].push_back(*m);
    }
  }
  std::map<int, double> out;
  for (auto &[year, v] : by_year) {
    out[year] = stats::quantile(v, 0.5);
  }
  return out;
}

Panel apply_akm_filters(const Panel &panel, const FilterSpec &spec) {
  return apply_akm_filters(panel, spec, yearly_median_monthly_earnings(panel));
}

Panel apply_akm_filters(const Panel &panel, const FilterSpec &spec, const std::map<int, double> &year_medians) {
  spec.validate();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto &r = panel[i];
    if (!r.employed() || r.age() < spec.min_age || r.age() > spec.max_age || r.months_worked < spec.min_months) {
      continue;
    }
    const auto med = year_medians.find(r.year);
    const double floor = med == year_medians.end() ? 0.0 : spec.min_earnings_fraction_of_median * med->second;
    if (*monthly_earnings(r) < floor) {
      continue;
    }
    keep.push_back(i);
  }
  // Firm size is the number of retained workers at the firm-year, evaluated once.
  std::map<std::pair<std::int64_t, int>, int> firm_year_size;
  for (std::size_t i : keep) {
    ++firm_year_size[{*panel[i].firm_id, panel[i].year}];
  }
  std::vector<std::size_t> rows;
  rows.reserve(keep.size());
  for (std::size_t i : keep) {
    if (firm_year_size[{*panel[i].firm_id, panel[i].year}] >= spec.min_firm_size) {
      rows.push_back(i);
    }
  }
  if (rows.empty()) {
    spdlog::warn("apply_akm_filters: no person-years survive the filters (empty panel)");
  }
  return panel.subset(rows);
}

Panel apply_trajectory_filters(const Panel &panel, const FilterSpec &spec) {
  spec.validate();
  std::vector<std::size_t> rows;
  for (const auto &b : panel.person_blocks()) {
    const auto &last = panel[b.end - 1];
    if (spec.require_followup_past_age && last.education_level == Education::secondary &&
        last.age() <= *spec.require_followup_past_age) {
      continue;
    }
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const int h = panel[i].horizon();
      if (h >= 0 && h <= spec.horizon_cap) {
        rows.push_back(i);
      }
    }
  }
  return panel.subset(rows);
}

} // namespace wagepanel
