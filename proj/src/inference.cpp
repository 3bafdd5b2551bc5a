#include "wagepanel/inference.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "wagepanel/csv.hpp"
#include "wagepanel/error.hpp"
#include "wagepanel/parallel.hpp"
#include "wagepanel/rng.hpp"
#include "wagepanel/stats.hpp"

namespace wagepanel::inference {

double PopulationMargins::total() const {
  double s = 0.0;
  for (const auto &[k, c] : counts) {
    s += c;
  }
  return s;
}

std::string normalize_cell_value(std::string_view v) {
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) {
    v.remove_prefix(1);
  }
  while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) {
    v.remove_suffix(1);
  }
  double d = 0.0;
  const auto *end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, d);
  if (ec == std::errc() && ptr == end && !v.empty()) {
    return fmt::format("{}", d);
  }
  return std::string(v);
}

PopulationMargins load_population_margins(const std::filesystem::path &path) {
  const auto t = csv::read(path);
  const auto count_col = t.column("count");
  PopulationMargins out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != count_col) {
      out.columns.push_back(t.header[c]);
    }
  }
  if (out.columns.empty()) {
    throw ValidationError("missing-column", fmt::format("{}: no cell columns", path.string()));
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    CellKey key;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c != count_col) {
        key.push_back(normalize_cell_value(t.rows[r][c]));
      }
    }
    const double n = csv::parse_double(t.rows[r][count_col], t, r, "count");
    if (!(n >= 0.0)) {
      throw ValidationError("invalid-count", fmt::format("{}:{}: negative count", path.string(), t.line_numbers[r]));
    }
    out.counts[key] += n;
  }
  return out;
}

namespace {

std::string field_value(const Panel &panel, std::size_t row, const std::string &column) {
  const auto &r = panel[row];
  if (column == "birth_year") {
    return std::to_string(r.birth_year);
  }
  if (column == "graduation_year") {
    return std::to_string(r.graduation_year);
  }
  if (column == "gender") {
    return std::to_string(r.gender);
  }
  if (column == "education_level") {
    return std::string(to_string(r.education_level));
  }
  if (column == "biobank") {
    return std::to_string(r.biobank);
  }
  return fmt::format("{}", panel.index_value(row, panel.index_position(column)));
}

double numeric_value(const std::string &column, const std::string &v) {
  if (column == "education_level") {
    return v == "tertiary" ? 1.0 : 0.0;
  }
  double d = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError("non-numeric", fmt::format("cell value '{}' of '{}' is not numeric", v, column));
  }
  return d;
}

} // namespace

std::vector<CellKey> person_cells(const Panel &panel, std::span<const std::string> columns) {
  std::vector<CellKey> out;
  for (const auto &b : panel.person_blocks()) {
    CellKey key;
    for (const auto &c : columns) {
      key.push_back(normalize_cell_value(field_value(panel, b.begin, c)));
    }
    out.push_back(std::move(key));
  }
  return out;
}

double WeightModel::weight_of(std::int64_t person_id) const {
  auto it = std::lower_bound(person_ids.begin(), person_ids.end(), person_id);
  if (it == person_ids.end() || *it != person_id) {
    throw ValidationError("unknown-person", fmt::format("no weight for person {}", person_id));
  }
  return weights[static_cast<std::size_t>(it - person_ids.begin())];
}

WeightModel estimate_ipw(const Panel &panel, const PopulationMargins &population, std::size_t min_cell_count) {
  WeightModel m;
  m.columns = population.columns;
  const auto cells = person_cells(panel, population.columns);
  if (cells.empty()) {
    throw ValidationError("empty-sample", "no persons to weight");
  }
  std::map<CellKey, std::size_t> sample_count;
  for (const auto &c : cells) {
    ++sample_count[c];
  }
  for (const auto &[c, n] : sample_count) {
    if (!population.counts.contains(c)) {
      throw ValidationError("missing-cell", fmt::format("sample cell ({}) is absent from the population table",
                                                        fmt::join(c, ",")));
    }
  }
  const double pop_total = population.total();
  const double n = static_cast<double>(cells.size());
  for (const auto &[c, cnt] : population.counts) {
    m.population_share[c] = cnt / pop_total;
    if (!sample_count.contains(c)) {
      m.unreachable_mass += cnt / pop_total;
    }
  }
  if (m.unreachable_mass > 0.0) {
    spdlog::warn("ipw: population cells absent from the sample hold {:.4f} of the population mass",
                 m.unreachable_mass);
  }

  // Pool thin cells along graduation_year: groups are sets of cells.
  std::vector<CellKey> keys;
  for (const auto &[c, cnt] : sample_count) {
    keys.push_back(c);
  }
  std::vector<std::size_t> group(keys.size());
  std::iota(group.begin(), group.end(), 0);
  auto root = [&](std::size_t i) {
    while (group[i] != i) {
      i = group[i];
    }
    return i;
  };
  const auto gy = std::find(m.columns.begin(), m.columns.end(), "graduation_year");
  if (gy != m.columns.end() && min_cell_count > 1) {
    const auto gpos = static_cast<std::size_t>(gy - m.columns.begin());
    auto group_count = [&](std::size_t g) {
      std::size_t s = 0;
      for (std::size_t i = 0; i < keys.size(); ++i) {
        if (root(i) == g) {
          s += sample_count[keys[i]];
        }
      }
      return s;
    };
    for (bool merged = true; merged;) {
      merged = false;
      for (std::size_t i = 0; i < keys.size() && !merged; ++i) {
        if (root(i) != i || group_count(i) >= min_cell_count) {
          continue;
        }
        const double year = numeric_value("graduation_year", keys[i][gpos]);
        std::optional<std::size_t> best;
        double best_gap = 0.0;
        for (std::size_t j = 0; j < keys.size(); ++j) {
          if (root(j) == i) {
            continue;
          }
          bool same = true;
          for (std::size_t c = 0; c < m.columns.size(); ++c) {
            same = same && (c == gpos || keys[j][c] == keys[i][c]);
          }
          if (!same) {
            continue;
          }
          const double gap = std::fabs(numeric_value("graduation_year", keys[j][gpos]) - year);
          if (!best || gap < best_gap) {
            best = j;
            best_gap = gap;
          }
        }
        if (best) {
          const auto into = root(*best);
          group[i] = into;
          m.pooled.push_back({keys[i], keys[into]});
          merged = true;
        }
      }
    }
    if (!m.pooled.empty()) {
      spdlog::info("ipw: pooled {} thin cell(s) along graduation_year", m.pooled.size());
    }
  }

  std::map<std::size_t, std::pair<double, double>> group_shares; // root -> (population, sample)
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto &gs = group_shares[root(i)];
    gs.first += m.population_share[keys[i]];
    gs.second += static_cast<double>(sample_count[keys[i]]) / n;
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto &gs = group_shares[root(i)];
    m.sample_share[keys[i]] = static_cast<double>(sample_count[keys[i]]) / n;
    m.cell_ratio[keys[i]] = gs.first / gs.second;
  }

  const auto blocks = panel.person_blocks();
  m.person_ids.reserve(blocks.size());
  m.weights.reserve(blocks.size());
  double total = 0.0;
  for (std::size_t p = 0; p < blocks.size(); ++p) {
    m.person_ids.push_back(blocks[p].person_id);
    m.weights.push_back(m.cell_ratio[cells[p]]);
    total += m.weights.back();
  }
  const double scale = n / total;
  for (auto &w : m.weights) {
    w *= scale;
  }
  return m;
}

std::vector<double> holm_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - r) * p[order[r]]));
    out[order[r]] = running;
  }
  return out;
}

std::vector<BalanceRow> balance_report(const Panel &panel, const WeightModel &model,
                                       const PopulationMargins &population, std::span<const std::string> variables) {
  std::vector<BalanceRow> rows;
  const auto cells = person_cells(panel, model.columns);
  const double pop_n = population.total();
  for (const auto &var : variables) {
    auto it = std::find(population.columns.begin(), population.columns.end(), var);
    if (it == population.columns.end()) {
      throw ValidationError("missing-column", fmt::format("balance variable '{}' is not a population cell column", var));
    }
    const auto c = static_cast<std::size_t>(it - population.columns.begin());
    double pm = 0.0, pm2 = 0.0;
    for (const auto &[key, cnt] : population.counts) {
      const double v = numeric_value(var, key[c]);
      pm += cnt * v;
      pm2 += cnt * v * v;
    }
    pm /= pop_n;
    const double pop_var = std::max(0.0, pm2 / pop_n - pm * pm);

    std::vector<double> x(cells.size());
    for (std::size_t p = 0; p < cells.size(); ++p) {
      x[p] = numeric_value(var, cells[p][c]);
    }
    auto test = [&](std::span<const double> w, double &mean_out) {
      double sw = 0.0, swx = 0.0;
      for (std::size_t p = 0; p < x.size(); ++p) {
        sw += w[p];
        swx += w[p] * x[p];
      }
      const double mean = swx / sw;
      double v = 0.0;
      for (std::size_t p = 0; p < x.size(); ++p) {
        v += w[p] * w[p] * (x[p] - mean) * (x[p] - mean);
      }
      v /= sw * sw;
      mean_out = mean;
      const double se = std::sqrt(v + pop_var / pop_n);
      const double diff = mean - pm;
      if (se == 0.0) {
        return std::fabs(diff) < 1e-12 * std::max(1.0, std::fabs(pm)) ? 1.0 : 0.0;
      }
      return stats::normal_two_sided_p(diff / se);
    };
    BalanceRow row;
    row.variable = var;
    row.population_mean = pm;
    const std::vector<double> ones(x.size(), 1.0);
    row.p_unweighted = test(ones, row.unweighted_mean);
    row.p_weighted = test(model.weights, row.weighted_mean);
    rows.push_back(row);
  }
  std::vector<double> pu, pw;
  for (const auto &r : rows) {
    pu.push_back(r.p_unweighted);
    pw.push_back(r.p_weighted);
  }
  const auto hu = holm_adjust(pu);
  const auto hw = holm_adjust(pw);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].p_unweighted_holm = hu[i];
    rows[i].p_weighted_holm = hw[i];
  }
  return rows;
}

std::vector<std::size_t> bootstrap_draw(std::size_t n, std::uint64_t seed, std::size_t rep) {
  Rng rng = Rng::substream(seed, rep);
  std::vector<std::size_t> idx(n);
  for (auto &i : idx) {
    i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
  }
  return idx;
}

BootstrapResult block_bootstrap(std::size_t n_persons,
                                const std::function<std::vector<double>(std::span<const std::size_t>)> &statistic,
                                std::size_t n_reps, std::uint64_t seed, int threads, double level) {
  if (n_reps < 2) {
    throw ValidationError("invalid-reps", "the bootstrap needs at least 2 replicates");
  }
  if (n_persons == 0) {
    throw ValidationError("empty-sample", "no persons to resample");
  }
  BootstrapResult out;
  out.replicates.assign(n_reps, {});
  std::vector<char> ok(n_reps, 0);
  parallel_for(n_reps, threads, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      const auto idx = bootstrap_draw(n_persons, seed, r);
      try {
        auto v = statistic(idx);
        ok[r] = std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
        out.replicates[r] = std::move(v);
      } catch (const std::exception &) {
        ok[r] = 0;
      }
    }
  });
  std::size_t k = 0;
  for (std::size_t r = 0; r < n_reps; ++r) {
    if (!ok[r]) {
      out.failed.push_back(r);
      out.replicates[r].clear();
    } else {
      k = out.replicates[r].size();
    }
  }
  if (!out.failed.empty()) {
    spdlog::warn("bootstrap: {} of {} replicates failed and were excluded", out.failed.size(), n_reps);
  }
  const double a = (1.0 - level) / 2.0;
  out.ci_lo.assign(k, std::numeric_limits<double>::quiet_NaN());
  out.ci_hi.assign(k, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> col;
    for (std::size_t r = 0; r < n_reps; ++r) {
      if (ok[r] && out.replicates[r].size() == k) {
        col.push_back(out.replicates[r][j]);
      }
    }
    if (!col.empty()) {
      std::sort(col.begin(), col.end());
      out.ci_lo[j] = stats::quantile_sorted(col, a);
      out.ci_hi[j] = stats::quantile_sorted(col, 1.0 - a);
    }
  }
  return out;
}

} // namespace wagepanel::inference
