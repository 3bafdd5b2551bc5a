#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wagepanel/core_data.hpp"

namespace wagepanel::mobility {

enum Component : std::size_t { stayer = 0, mover = 1, entrant = 2, exiter = 3 };
inline constexpr std::array<const char *, 4> kComponentNames{"stayer", "mover", "entrant", "exiter"};

/// Employment state of one person at one horizon.
struct HorizonState {
  bool observed = false;
  bool employed = false;
  std::int64_t firm_id = 0;
  double log_earnings = 0.0;
};

struct PersonHistory {
  std::int64_t person_id = 0;
  std::vector<HorizonState> states; ///< index = horizon
};

/// Histories over horizons 0..max_horizon; the outcome is log annual earnings.
std::vector<PersonHistory> build_histories(const Panel &panel, int max_horizon = 25);

struct HorizonDecomposition {
  int horizon = 0;
  bool defined = false; ///< false when E_t or E_{t-1} is empty
  /// s_stayer, s_mover (among continuers), n_entrant (of E_t), x_exiter (of E_{t-1}).
  std::array<double, 4> shares{};
  std::array<double, 4> contribution{};
  std::array<double, 4> cumulative{};
  double total = 0.0; ///< mean over E_t minus mean over E_{t-1}
  double cumulative_total = 0.0;
  std::array<double, 4> counts{}; ///< weighted stayers, movers, entrants, exiters
};

struct GrowthDecomposition {
  std::string group;
  std::vector<HorizonDecomposition> horizons; ///< t = 1..max_horizon
};

/// Decomposition over the persons selected by `members` (empty = all), each
/// counted with `weights[p]` (empty = 1).
GrowthDecomposition decompose_growth(std::span<const PersonHistory> histories, std::string group,
                                     std::span<const std::size_t> members = {},
                                     std::span<const double> weights = {});

/// Decile (1..10) of each person's index value, by type-7 quantile cut points
/// over persons. NaN values get decile 0.
std::vector<int> index_deciles(const Panel &panel, const std::string &index);

struct Band {
  double lo = 0.0;
  double hi = 0.0;
};

struct DecompositionBands {
  std::string group;
  /// Per horizon t = 1..max: percentile bands of cumulative stayer, mover,
  /// entrant, exiter contributions and the cumulative total.
  std::vector<std::array<Band, 5>> cumulative;
  std::size_t n_reps = 0;
  std::size_t n_failed = 0;
};

/// Resamples whole persons from the pool; group labels travel with persons.
/// `group_of[p]` names the group of person p (empty string = none) and
/// `groups` lists the groups to report ("all" covers every person).
std::vector<DecompositionBands> bootstrap_decomposition(std::span<const PersonHistory> histories,
                                                        std::span<const std::string> group_of,
                                                        std::span<const std::string> groups, std::size_t n_reps,
                                                        std::uint64_t seed, int threads = 1);

} // namespace wagepanel::mobility
