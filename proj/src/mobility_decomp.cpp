#include "wagepanel/mobility_decomp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wagepanel/error.hpp"
#include "wagepanel/inference.hpp"
#include "wagepanel/stats.hpp"

namespace wagepanel::mobility {

namespace {

/// Weighted mean updated in place; stays exact when every value is equal.
struct RunningMean {
  double w = 0.0;
  double m = 0.0;
  void add(double wi, double x) {
    w += wi;
    m += wi / w * (x - m);
  }
};

} // namespace

std::vector<PersonHistory> build_histories(const Panel &panel, int max_horizon) {
  std::vector<PersonHistory> out;
  for (const auto &b : panel.person_blocks()) {
    PersonHistory h;
    h.person_id = b.person_id;
    h.states.resize(static_cast<std::size_t>(max_horizon) + 1);
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const auto &r = panel[i];
      const int t = r.horizon();
      if (t < 0 || t > max_horizon) {
        continue;
      }
      auto &s = h.states[static_cast<std::size_t>(t)];
      s.observed = true;
      s.employed = r.employed() && r.annual_earnings > 0.0;
      if (s.employed) {
        s.firm_id = *r.firm_id;
        s.log_earnings = std::log(r.annual_earnings);
      }
    }
    out.push_back(std::move(h));
  }
  return out;
}

GrowthDecomposition decompose_growth(std::span<const PersonHistory> histories, std::string group,
                                     std::span<const std::size_t> members, std::span<const double> weights) {
  GrowthDecomposition out;
  out.group = std::move(group);
  std::size_t max_h = 0;
  for (const auto &h : histories) {
    max_h = std::max(max_h, h.states.size());
  }
  const std::size_t n_sel = members.empty() ? histories.size() : members.size();
  std::array<double, 4> cum{};
  double cum_total = 0.0;
  for (std::size_t t = 1; t < max_h; ++t) {
    // E_{t-1}, E_t, stayer and mover changes, entrants, exiters, continuers at t and t-1.
    RunningMean prev, now, d_s, d_m, y_n, y_x, c_now, c_prev;
    for (std::size_t k = 0; k < n_sel; ++k) {
      const std::size_t p = members.empty() ? k : members[k];
      const auto &st = histories[p].states;
      if (t >= st.size() || !st[t - 1].observed || !st[t].observed) {
        continue;
      }
      const double w = weights.empty() ? 1.0 : weights[k];
      const auto &a = st[t - 1];
      const auto &b = st[t];
      if (a.employed) {
        prev.add(w, a.log_earnings);
      }
      if (b.employed) {
        now.add(w, b.log_earnings);
      }
      if (a.employed && b.employed) {
        (a.firm_id == b.firm_id ? d_s : d_m).add(w, b.log_earnings - a.log_earnings);
        c_now.add(w, b.log_earnings);
        c_prev.add(w, a.log_earnings);
      } else if (b.employed) {
        y_n.add(w, b.log_earnings);
      } else if (a.employed) {
        y_x.add(w, a.log_earnings);
      }
    }
    HorizonDecomposition hd;
    hd.horizon = static_cast<int>(t);
    hd.counts = {d_s.w, d_m.w, y_n.w, y_x.w};
    hd.defined = prev.w > 0.0 && now.w > 0.0;
    if (hd.defined) {
      const double n_c = c_now.w;
      hd.shares[stayer] = n_c > 0.0 ? d_s.w / n_c : 0.0;
      hd.shares[mover] = n_c > 0.0 ? d_m.w / n_c : 0.0;
      hd.shares[entrant] = y_n.w / now.w;
      hd.shares[exiter] = y_x.w / prev.w;
      hd.contribution[stayer] = hd.shares[stayer] * d_s.m;
      hd.contribution[mover] = hd.shares[mover] * d_m.m;
      hd.contribution[entrant] = y_n.w > 0.0 ? hd.shares[entrant] * (y_n.m - c_now.m) : 0.0;
      hd.contribution[exiter] = y_x.w > 0.0 ? -hd.shares[exiter] * (y_x.m - c_prev.m) : 0.0;
      hd.total = now.m - prev.m;
      for (std::size_t c = 0; c < 4; ++c) {
        cum[c] += hd.contribution[c];
      }
      cum_total += hd.total;
    } else {
      hd.total = std::numeric_limits<double>::quiet_NaN();
      hd.contribution.fill(std::numeric_limits<double>::quiet_NaN());
    }
    hd.cumulative = cum;
    hd.cumulative_total = cum_total;
    out.horizons.push_back(hd);
  }
  return out;
}

std::vector<int> index_deciles(const Panel &panel, const std::string &index) {
  const auto k = panel.index_position(index);
  const auto blocks = panel.person_blocks();
  std::vector<double> values, finite;
  for (const auto &b : blocks) {
    values.push_back(panel.index_value(b.begin, k));
    if (std::isfinite(values.back())) {
      finite.push_back(values.back());
    }
  }
  if (finite.empty()) {
    throw ValidationError("empty-sample", "index has no finite values");
  }
  std::sort(finite.begin(), finite.end());
  std::array<double, 9> cuts{};
  for (std::size_t d = 0; d < 9; ++d) {
    cuts[d] = stats::quantile_sorted(finite, static_cast<double>(d + 1) / 10.0);
  }
  std::vector<int> out;
  for (double v : values) {
    if (!std::isfinite(v)) {
      out.push_back(0);
      continue;
    }
    int d = 1;
    for (double c : cuts) {
      d += v > c ? 1 : 0;
    }
    out.push_back(d);
  }
  return out;
}

std::vector<DecompositionBands> bootstrap_decomposition(std::span<const PersonHistory> histories,
                                                        std::span<const std::string> group_of,
                                                        std::span<const std::string> groups, std::size_t n_reps,
                                                        std::uint64_t seed, int threads) {
  if (group_of.size() != histories.size()) {
    throw ValidationError("shape-mismatch", "one group label per person is required");
  }
  std::size_t n_h = 0;
  for (const auto &h : histories) {
    n_h = std::max(n_h, h.states.size());
  }
  n_h = n_h > 0 ? n_h - 1 : 0;
  const std::size_t per_group = n_h * 5;

  auto statistic = [&](std::span<const std::size_t> draw) {
    // Multiplicity of each person in the draw.
    std::vector<double> mult(histories.size(), 0.0);
    for (auto i : draw) {
      mult[i] += 1.0;
    }
    std::vector<double> v;
    v.reserve(groups.size() * per_group);
    for (const auto &g : groups) {
      std::vector<std::size_t> members;
      std::vector<double> w;
      for (std::size_t p = 0; p < histories.size(); ++p) {
        if (mult[p] > 0.0 && (g == "all" || group_of[p] == g)) {
          members.push_back(p);
          w.push_back(mult[p]);
        }
      }
      const auto d = decompose_growth(histories, g, members, w);
      for (std::size_t t = 0; t < n_h; ++t) {
        if (t < d.horizons.size()) {
          for (std::size_t c = 0; c < 4; ++c) {
            v.push_back(d.horizons[t].cumulative[c]);
          }
          v.push_back(d.horizons[t].cumulative_total);
        } else {
          v.insert(v.end(), 5, 0.0);
        }
      }
    }
    return v;
  };
  const auto boot = inference::block_bootstrap(histories.size(), statistic, n_reps, seed, threads);
  std::vector<DecompositionBands> out;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    DecompositionBands b;
    b.group = groups[gi];
    b.n_reps = n_reps;
    b.n_failed = boot.failed.size();
    b.cumulative.resize(n_h);
    for (std::size_t t = 0; t < n_h; ++t) {
      for (std::size_t c = 0; c < 5; ++c) {
        const std::size_t j = gi * per_group + t * 5 + c;
        if (j < boot.ci_lo.size()) {
          b.cumulative[t][c] = {boot.ci_lo[j], boot.ci_hi[j]};
        }
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

} // namespace wagepanel::mobility
