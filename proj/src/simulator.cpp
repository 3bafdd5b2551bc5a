#include "wagepanel/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include <fmt/format.h>

#include "wagepanel/error.hpp"
#include "wagepanel/rng.hpp"
#include "wagepanel/stats.hpp"

namespace wagepanel::sim {

namespace {

constexpr std::uint64_t kFirmStreamSalt = 0xF1F1F1F1ULL;
constexpr std::uint64_t kDiagnosisStreamSalt = 0xD1A6D1A6ULL;

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

} // namespace

void SimConfig::validate() const {
  if (n_workers <= 0 || n_years <= 0) {
    throw ValidationError("invalid-config", "n_workers and n_years must be positive");
  }
  if (n_firms < 1 || (n_firms < 2 && base_mobility_rate > 0.0)) {
    throw ValidationError("invalid-config", "n_firms must be at least 2 when workers can move");
  }
  if (theta_sd < 0.0 || psi_sd < 0.0 || noise_sd < 0.0) {
    throw ValidationError("invalid-config", "standard deviations must be nonnegative");
  }
  if (!is_probability(base_mobility_rate) || !is_probability(nonemployment_rate) || !is_probability(tertiary_share) ||
      !is_probability(pgi_education_r2)) {
    throw ValidationError("invalid-config", "probabilities must lie in [0, 1]");
  }
  if (std::fabs(pgi_effect_on_theta) > 1.0 || std::fabs(pgi_effect_on_theta_secondary) > 1.0) {
    throw ValidationError("invalid-config", "PGI-theta correlations must lie in [-1, 1]");
  }
  if (n_pcs < 0 || discount_rate <= -1.0) {
    throw ValidationError("invalid-config", "n_pcs must be >= 0 and discount_rate > -1");
  }
  for (double h : diagnosis_hazards) {
    if (!is_probability(h)) {
      throw ValidationError("invalid-config", "diagnosis hazards must lie in [0, 1]");
    }
  }
}

Simulation simulate_panel(const SimConfig &cfg) {
  cfg.validate();
  Simulation out;

  // Firms.
  std::vector<double> psi(static_cast<std::size_t>(cfg.n_firms));
  {
    Rng rng = Rng::substream(cfg.firm_seed.value_or(cfg.seed) ^ kFirmStreamSalt, 0);
    for (auto &p : psi) {
      p = cfg.psi_sd * rng.normal();
    }
  }
  std::vector<double> softmax_cdf(psi.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < psi.size(); ++j) {
    acc += std::exp(psi[j]);
    softmax_cdf[j] = acc;
  }
  for (std::size_t j = 0; j < psi.size(); ++j) {
    out.truth.psi[static_cast<std::int64_t>(j + 1)] = psi[j];
  }

  // Education threshold on the latent L = sqrt(r2) PGI + sqrt(1 - r2) u, and
  // the conditional moments of the PGI among the tertiary-educated.
  const double loading = std::sqrt(cfg.pgi_education_r2);
  const double share = cfg.tertiary_share;
  const double threshold = share <= 0.0   ? INFINITY
                           : share >= 1.0 ? -INFINITY
                                          : stats::normal_quantile(1.0 - share);
  double mu_t = 0.0, sd_t = 1.0, mu_s = 0.0, sd_s = 1.0;
  if (std::isfinite(threshold)) {
    const double phi = std::exp(-0.5 * threshold * threshold) / std::sqrt(2.0 * std::numbers::pi);
    const double lam_t = phi / share;          // E[L | L > k]
    const double lam_s = -phi / (1.0 - share); // E[L | L <= k]
    mu_t = loading * lam_t;
    sd_t = std::sqrt(1.0 - loading * loading * lam_t * (lam_t - threshold));
    mu_s = loading * lam_s;
    sd_s = std::sqrt(1.0 - loading * loading * lam_s * (lam_s - threshold));
  }

  for (int h = 0; h <= 25; ++h) {
    out.truth.beta_t[h] = cfg.pgi_horizon_slope * h;
  }

  std::vector<std::string> index_names = {"EA_PGI", "EA_PGI_father", "EA_PGI_mother"};
  for (int k = 1; k <= cfg.n_pcs; ++k) {
    index_names.push_back(fmt::format("PC{}", k));
  }
  index_names.push_back("EDU_YEARS");
  const std::size_t n_idx = index_names.size();

  std::vector<PersonYearRecord> records;
  std::vector<double> values;
  const int grad_window = std::max(1, cfg.n_years / 3);

  for (int p = 0; p < cfg.n_workers; ++p) {
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(p));
    const std::int64_t pid = p + 1;
    const double father = rng.normal();
    const double mother = rng.normal();
    const double pgi = 0.5 * (father + mother) + std::sqrt(0.5) * rng.normal();
    std::vector<double> pcs(static_cast<std::size_t>(cfg.n_pcs));
    for (auto &v : pcs) {
      v = rng.normal();
    }
    const double latent = loading * pgi + std::sqrt(1.0 - loading * loading) * rng.normal();
    const bool tertiary = latent > threshold;
    const double edu_years = 14.0 + 2.5 * latent;
    const int gender = rng.bernoulli(0.5) ? 1 : 0;
    const int biobank = rng.bernoulli(0.5) ? 1 : 0;
    const int grad_year = cfg.start_year + static_cast<int>(rng.uniform_int(0, grad_window - 1));
    // Same age range for both levels, so birth cohort carries no information on education.
    const int grad_age = static_cast<int>(rng.uniform_int(19, 28));
    const int birth_year = grad_year - grad_age;
    const int field = 100 * static_cast<int>(rng.uniform_int(1, 9)) + static_cast<int>(rng.uniform_int(0, 9));
    const std::int64_t institution = rng.uniform_int(1, 20);

    const double r = tertiary ? cfg.pgi_effect_on_theta : cfg.pgi_effect_on_theta_secondary;
    const double z_pgi = tertiary ? (pgi - mu_t) / sd_t : (pgi - mu_s) / sd_s;
    const double theta = cfg.base_log_monthly + (tertiary ? cfg.tertiary_premium : 0.0) +
                         cfg.theta_sd * (r * z_pgi + std::sqrt(1.0 - r * r) * rng.normal());
    out.truth.theta[pid] = theta;

    const double move_rate =
        std::clamp(cfg.base_mobility_rate * (1.0 + (tertiary ? cfg.pgi_effect_on_mobility * pgi : 0.0)), 0.0, 1.0);

    const int n_obs = cfg.last_year() - grad_year + 1;
    std::vector<bool> employed(static_cast<std::size_t>(n_obs));
    for (auto &&e : employed) {
      e = !rng.bernoulli(cfg.nonemployment_rate);
    }
    std::size_t firm = 0;
    bool has_firm = false;
    for (int k = 0; k < n_obs; ++k) {
      const int year = grad_year + k;
      PersonYearRecord rec;
      rec.person_id = pid;
      rec.year = year;
      rec.birth_year = birth_year;
      rec.gender = gender;
      rec.education_level = tertiary ? Education::tertiary : Education::secondary;
      rec.education_field = field;
      rec.institution_id = institution;
      rec.graduation_year = grad_year;
      rec.biobank = biobank;
      const auto ku = static_cast<std::size_t>(k);
      if (employed[ku]) {
        const bool entrant = k > 0 && !employed[ku - 1];
        const bool exiter = k + 1 < n_obs && !employed[ku + 1];
        if (!has_firm || entrant) {
          firm = static_cast<std::size_t>(rng.uniform_int(0, cfg.n_firms - 1));
          has_firm = true;
        } else if (rng.bernoulli(move_rate)) {
          const std::size_t current = firm;
          std::size_t dest;
          do {
            dest = rng.categorical_cdf(softmax_cdf);
          } while (dest == current);
          firm = dest;
        }
        int months = 12;
        if (entrant || exiter) {
          months = static_cast<int>(rng.uniform_int(1, 11));
        }
        const double a = (year - birth_year - 40) / 10.0;
        const double xb = (tertiary ? cfg.year_trend_tertiary : cfg.year_trend_secondary) * (year - cfg.start_year) +
                          cfg.age_quadratic * a * a + cfg.age_cubic * a * a * a;
        const double pgi_term = tertiary ? cfg.pgi_horizon_slope * k * pgi : 0.0;
        const double log_monthly = theta + psi[firm] + xb + pgi_term + cfg.noise_sd * rng.normal();
        rec.firm_id = static_cast<std::int64_t>(firm + 1);
        rec.months_worked = months;
        rec.annual_earnings = std::exp(log_monthly) * months;
      } else {
        has_firm = false;
      }
      records.push_back(rec);
      values.push_back(pgi);
      values.push_back(father);
      values.push_back(mother);
      values.insert(values.end(), pcs.begin(), pcs.end());
      values.push_back(edu_years);
    }
    (void)n_idx;
  }

  std::map<int, double> deflator;
  for (int y = cfg.start_year; y <= cfg.last_year(); ++y) {
    deflator[y] = std::pow(1.0 + cfg.annual_inflation, y - 2010);
  }
  out.panel = Panel(std::move(records), std::move(index_names), std::move(values), std::move(deflator),
                    {"THL", "BSB"});
  out.panel.notes().push_back(fmt::format("simulated: seed={} workers={} firms={} years={}", cfg.seed,
                                          cfg.n_workers, cfg.n_firms, cfg.n_years));
  return out;
}

std::vector<health::DiagnosisRecord> simulate_diagnoses(const SimConfig &cfg, const Panel &panel,
                                                        const health::CharlsonTable &table) {
  cfg.validate();
  const auto &cats = table.categories();
  if (!cfg.diagnosis_hazards.empty() && cfg.diagnosis_hazards.size() != cats.size()) {
    throw ValidationError("invalid-config", fmt::format("expected {} diagnosis hazards, got {}", cats.size(),
                                                        cfg.diagnosis_hazards.size()));
  }
  std::vector<health::DiagnosisRecord> out;
  if (cfg.diagnosis_hazards.empty()) {
    return out;
  }
  const auto pgi_col = panel.find_index("EA_PGI");
  int first_year = INT32_MAX, last_year = INT32_MIN;
  for (const auto &r : panel.records()) {
    first_year = std::min(first_year, r.year);
    last_year = std::max(last_year, r.year);
  }
  for (const auto &b : panel.person_blocks()) {
    Rng rng = Rng::substream(cfg.seed ^ kDiagnosisStreamSalt, static_cast<std::uint64_t>(b.person_id));
    const double pgi = pgi_col ? panel.index_value(b.begin, *pgi_col) : 0.0;
    const double tilt = std::exp(cfg.diagnosis_pgi_tilt * (std::isnan(pgi) ? 0.0 : pgi));
    for (std::size_t c = 0; c < cats.size(); ++c) {
      const double hazard = std::min(1.0, cfg.diagnosis_hazards[c] * tilt);
      if (hazard <= 0.0) {
        continue;
      }
      for (int year = first_year; year <= last_year; ++year) {
        if (rng.uniform() < hazard) {
          const bool icd10 = year >= cfg.icd10_start_year;
          const auto &list = icd10 ? cats[c].icd10_prefixes : cats[c].icd9_prefixes;
          const auto pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(list.size()) - 1));
          out.push_back({b.person_id, year, icd10 ? 10 : 9, list[pick]});
          break;
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    return std::tie(a.person_id, a.event_year, a.code) < std::tie(b.person_id, b.event_year, b.code);
  });
  return out;
}

} // namespace wagepanel::sim
