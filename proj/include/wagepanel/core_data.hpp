#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wagepanel {

enum class Education : std::uint8_t { secondary, tertiary };

std::string_view to_string(Education e);
std::optional<Education> parse_education(std::string_view s);

/// One worker-year. Earnings are in real currency units once the record sits
/// inside a Panel built by load_panel or the simulator.
struct PersonYearRecord {
  std::int64_t person_id = 0;
  int year = 0;
  int birth_year = 0;
  int gender = 0;
  std::optional<std::int64_t> firm_id; ///< absent = nonemployed
  double annual_earnings = 0.0;
  int months_worked = 0;
  Education education_level = Education::secondary;
  std::optional<int> education_field;
  std::optional<std::int64_t> institution_id;
  int graduation_year = 0;
  int biobank = 0; ///< code into Panel::biobank_labels()
  double weight = 1.0;

  int age() const { return year - birth_year; }
  int horizon() const { return year - graduation_year; }
  bool employed() const { return firm_id.has_value() && months_worked > 0; }
};

/// Annual earnings divided by months worked; nullopt when no months were worked.
std::optional<double> monthly_earnings(const PersonYearRecord &rec);

/// Contiguous block of rows that belong to one person.
struct PersonBlock {
  std::int64_t person_id;
  std::size_t begin;
  std::size_t end;
};

/// Immutable person-year panel sorted by (person_id, year).
///
/// Earnings are held in real terms; `deflator()` is the price index that
/// maps them back to nominal values when the panel is written out.
///
/// Index values ("EA_PGI", "PC1", ...) are stored row-major alongside the
/// records; NaN marks a missing value.
class Panel {
public:
  Panel() = default;

  /// Sorts records by (person_id, year) and validates invariants. Throws
  /// ValidationError on duplicate keys, negative earnings, inconsistent
  /// employment fields or deflator gaps.
  Panel(std::vector<PersonYearRecord> records, std::vector<std::string> index_names, std::vector<double> index_values,
        std::map<int, double> deflator, std::vector<std::string> biobank_labels = {"default"});

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<PersonYearRecord> &records() const { return records_; }
  const PersonYearRecord &operator[](std::size_t i) const { return records_[i]; }

  const std::vector<std::string> &index_names() const { return index_names_; }
  std::optional<std::size_t> find_index(std::string_view name) const;
  /// Throws ValidationError("missing-column") when absent.
  std::size_t index_position(std::string_view name) const;
  double index_value(std::size_t row, std::size_t k) const { return index_values_[row * index_names_.size() + k]; }
  std::vector<double> index_column(std::string_view name) const;

  const std::map<int, double> &deflator() const { return deflator_; }
  const std::vector<std::string> &biobank_labels() const { return biobank_labels_; }
  std::vector<std::string> &notes() { return notes_; }
  const std::vector<std::string> &notes() const { return notes_; }

  std::vector<PersonBlock> person_blocks() const;
  std::size_t person_count() const;

  /// New panel holding `rows` (ascending) with the same columns and deflator.
  Panel subset(std::span<const std::size_t> rows) const;

  /// New panel with an extra (or replaced) index column.
  Panel with_index_column(const std::string &name, std::span<const double> values) const;

  /// New panel with every record's earnings multiplied by `factor(year)`.
  template <class F> Panel rescale_earnings(F &&factor, std::map<int, double> new_deflator) const {
    auto recs = records_;
    for (auto &r : recs) {
      r.annual_earnings *= factor(r.year);
    }
    return Panel(std::move(recs), index_names_, index_values_, std::move(new_deflator), biobank_labels_);
  }

private:
  std::vector<PersonYearRecord> records_;
  std::vector<std::string> index_names_;
  std::vector<double> index_values_;
  std::map<int, double> deflator_;
  std::vector<std::string> biobank_labels_{"default"};
  std::vector<std::string> notes_;
};

struct FilterSpec {
  int min_age = 20;
  int max_age = 60;
  double min_earnings_fraction_of_median = 0.5;
  int min_firm_size = 5;
  int min_months = 4;
  std::optional<int> require_followup_past_age;
  int horizon_cap = 25;

  static FilterSpec akm_defaults() { return {}; }
  static FilterSpec trajectory_defaults() {
    FilterSpec s;
    s.require_followup_past_age = 30;
    return s;
  }
  void validate() const;
};

/// Reads the panel and deflator CSVs and returns a panel in real terms.
Panel load_panel(const std::filesystem::path &panel_csv, const std::filesystem::path &deflator_csv);
std::map<int, double> load_deflator(const std::filesystem::path &deflator_csv);

/// Writes nominal earnings (real x deflator) so that load_panel round-trips.
void write_panel(const Panel &panel, const std::filesystem::path &panel_csv);
void write_deflator(const std::map<int, double> &deflator, const std::filesystem::path &deflator_csv);

/// Divides earnings by the deflator of their year (nominal to real). The
/// deflator table is kept so that write_panel reproduces the nominal file.
Panel deflate(const Panel &nominal);

struct EmploymentSpell {
  std::int64_t firm_id;
  double earnings;
  bool ongoing_at_year_end = true;
};

/// Highest-paying spell ongoing at year end, ties to the smallest firm_id.
std::optional<std::int64_t> select_main_employer(std::span<const EmploymentSpell> spells);

/// Median monthly earnings per year over employed records.
std::map<int, double> yearly_median_monthly_earnings(const Panel &panel);

Panel apply_akm_filters(const Panel &panel, const FilterSpec &spec);
/// Same as above with an externally fixed per-year median (makes the filter idempotent).
Panel apply_akm_filters(const Panel &panel, const FilterSpec &spec, const std::map<int, double> &year_medians);

Panel apply_trajectory_filters(const Panel &panel, const FilterSpec &spec);

} // namespace wagepanel
