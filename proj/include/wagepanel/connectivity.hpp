#pragma once

#include <cstdint>
#include <vector>

#include "wagepanel/core_data.hpp"

namespace wagepanel::connectivity {

/// Disjoint-set forest with union by size and path halving.
class UnionFind {
public:
  explicit UnionFind(std::size_t n);

  std::size_t find(std::size_t x);
  /// Returns true if two distinct sets were merged.
  bool unite(std::size_t a, std::size_t b);
  bool same(std::size_t a, std::size_t b) { return find(a) == find(b); }
  std::size_t set_size(std::size_t x) { return size_[find(x)]; }
  std::size_t count() const { return components_; }

private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
  std::size_t components_;
};

struct ComponentSize {
  std::size_t n_firms = 0;
  std::size_t n_workers = 0;
  std::size_t n_obs = 0;
  std::int64_t min_firm_id = 0;
};

/// Bipartite worker-firm structure. Components live on the firm projection:
/// two firms share a label iff a chain of workers links them. Labels are
/// dense, ordered by descending n_obs, then descending n_firms, then
/// ascending smallest firm_id (label 0 = largest).
struct MobilityGraph {
  std::vector<std::int64_t> firms;   ///< sorted firm ids
  std::vector<std::int64_t> workers; ///< sorted person ids with at least one employed row
  /// Unique (worker index, firm index) incidences, sorted.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<int> component_of_firm; ///< aligned with `firms`
  std::vector<int> component_of_worker;
  std::vector<ComponentSize> component_sizes;

  std::size_t n_components() const { return component_sizes.size(); }
  /// Label of `firm_id`, or -1 if the firm is not in the graph.
  int component_of(std::int64_t firm_id) const;
};

/// Components via union-find over employed person-years.
MobilityGraph build_graph(const Panel &panel);

struct ConnectedSetReport {
  std::size_t kept_firms = 0, kept_workers = 0, kept_obs = 0;
  double dropped_firm_share = 0.0;
  double dropped_worker_share = 0.0;
  double dropped_obs_share = 0.0;
};

/// Person-years whose firm lies in component 0.
Panel largest_connected_set(const Panel &panel, const MobilityGraph &graph, ConnectedSetReport *report = nullptr);

/// Largest set that stays connected after removing any single worker:
/// articulation workers are pruned repeatedly. Not used by default.
Panel leave_one_out_connected_set(const Panel &panel, std::size_t *pruned_workers = nullptr);

} // namespace wagepanel::connectivity
