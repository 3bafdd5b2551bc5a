#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wagepanel/core_data.hpp"

namespace wagepanel::inference {

using CellKey = std::vector<std::string>;

/// Population counts per cell. Columns name panel fields (birth_year,
/// graduation_year, education_level, gender, biobank) or index columns.
struct PopulationMargins {
  std::vector<std::string> columns;
  std::map<CellKey, double> counts;

  double total() const;
};

/// CSV: cell columns..., count.
PopulationMargins load_population_margins(const std::filesystem::path &path);

/// Canonical text of a cell value: trimmed, and numbers reformatted so "1.0" and "1" agree.
std::string normalize_cell_value(std::string_view v);

/// Cell of each person (first record), in panel person order.
std::vector<CellKey> person_cells(const Panel &panel, std::span<const std::string> columns);

struct PooledCell {
  CellKey cell;
  CellKey into;
};

struct WeightModel {
  std::vector<std::string> columns;
  std::map<CellKey, double> sample_share;
  std::map<CellKey, double> population_share;
  /// Population-to-sample share ratio per cell, before normalization.
  std::map<CellKey, double> cell_ratio;
  std::vector<PooledCell> pooled;
  double unreachable_mass = 0.0; ///< population share of cells absent from the sample
  std::vector<std::int64_t> person_ids;
  std::vector<double> weights; ///< aligned with person_ids, mean 1

  double weight_of(std::int64_t person_id) const;
};

/// Saturated cell weights. Cells with fewer than `min_cell_count` sampled
/// persons are merged with the nearest cell along graduation_year.
WeightModel estimate_ipw(const Panel &panel, const PopulationMargins &population, std::size_t min_cell_count = 5);

/// Holm step-down adjustment, returned in input order.
std::vector<double> holm_adjust(std::span<const double> p);

struct BalanceRow {
  std::string variable;
  double population_mean = 0.0;
  double unweighted_mean = 0.0;
  double weighted_mean = 0.0;
  double p_unweighted = 1.0;
  double p_weighted = 1.0;
  double p_unweighted_holm = 1.0;
  double p_weighted_holm = 1.0;
};

/// Sample vs population means of cell variables. Population moments come
/// from the margin counts, so every variable must be a cell column.
std::vector<BalanceRow> balance_report(const Panel &panel, const WeightModel &model,
                                       const PopulationMargins &population, std::span<const std::string> variables);

struct BootstrapResult {
  std::vector<std::vector<double>> replicates; ///< [rep][statistic]; empty for failed reps
  std::vector<std::size_t> failed;             ///< replicate numbers excluded
  std::vector<double> ci_lo, ci_hi;            ///< percentile bands per statistic

  std::size_t n_ok() const { return replicates.size() - failed.size(); }
};

/// Draw of `n` person indices (with replacement) for replicate `rep`.
std::vector<std::size_t> bootstrap_draw(std::size_t n, std::uint64_t seed, std::size_t rep);

/// Resamples persons with replacement; `statistic` receives the drawn person
/// indices. A replicate that throws or yields a non-finite value is excluded.
BootstrapResult block_bootstrap(std::size_t n_persons,
                                const std::function<std::vector<double>(std::span<const std::size_t>)> &statistic,
                                std::size_t n_reps, std::uint64_t seed, int threads = 1, double level = 0.95);

} // namespace wagepanel::inference
