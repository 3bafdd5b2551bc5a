#include "wagepanel/connectivity.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace wagepanel::connectivity {

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1), components_(n) {
  std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) {
    return false;
  }
  if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) {
    std::swap(a, b);
  }
  parent_[b] = a;
  size_[a] += size_[b];
  --components_;
  return true;
}

int MobilityGraph::component_of(std::int64_t firm_id) const {
  const auto it = std::lower_bound(firms.begin(), firms.end(), firm_id);
  if (it == firms.end() || *it != firm_id) {
    return -1;
  }
  return component_of_firm[static_cast<std::size_t>(it - firms.begin())];
}

namespace {

std::size_t position(const std::vector<std::int64_t> &sorted, std::int64_t id) {
  return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), id) - sorted.begin());
}

} // namespace

MobilityGraph build_graph(const Panel &panel) {
  MobilityGraph g;
  for (const auto &r : panel.records()) {
    if (r.employed()) {
      g.firms.push_back(*r.firm_id);
      g.workers.push_back(r.person_id);
    }
  }
  std::sort(g.firms.begin(), g.firms.end());
  g.firms.erase(std::unique(g.firms.begin(), g.firms.end()), g.firms.end());
  std::sort(g.workers.begin(), g.workers.end());
  g.workers.erase(std::unique(g.workers.begin(), g.workers.end()), g.workers.end());

  std::vector<std::size_t> obs_per_firm(g.firms.size(), 0);
  UnionFind uf(g.firms.size());
  for (const auto &b : panel.person_blocks()) {
    std::optional<std::size_t> first;
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const auto &r = panel[i];
      if (!r.employed()) {
        continue;
      }
      const std::size_t f = position(g.firms, *r.firm_id);
      ++obs_per_firm[f];
      g.edges.emplace_back(position(g.workers, r.person_id), f);
      if (first) {
        uf.unite(*first, f);
      } else {
        first = f;
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());

  // Provisional components keyed by union-find root.
  std::unordered_map<std::size_t, std::size_t> root_to_tmp;
  std::vector<ComponentSize> tmp;
  std::vector<std::size_t> firm_tmp(g.firms.size());
  for (std::size_t f = 0; f < g.firms.size(); ++f) {
    auto [it, fresh] = root_to_tmp.emplace(uf.find(f), tmp.size());
    if (fresh) {
      tmp.push_back({0, 0, 0, g.firms[f]});
    }
    auto &c = tmp[it->second];
    ++c.n_firms;
    c.n_obs += obs_per_firm[f];
    c.min_firm_id = std::min(c.min_firm_id, g.firms[f]);
    firm_tmp[f] = it->second;
  }
  std::vector<std::size_t> worker_tmp(g.workers.size(), 0);
  for (const auto &[w, f] : g.edges) {
    worker_tmp[w] = firm_tmp[f];
  }
  for (std::size_t w = 0; w < g.workers.size(); ++w) {
    ++tmp[worker_tmp[w]].n_workers;
  }

  std::vector<std::size_t> order(tmp.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (tmp[a].n_obs != tmp[b].n_obs) {
      return tmp[a].n_obs > tmp[b].n_obs;
    }
    if (tmp[a].n_firms != tmp[b].n_firms) {
      return tmp[a].n_firms > tmp[b].n_firms;
    }
    return tmp[a].min_firm_id < tmp[b].min_firm_id;
  });
  std::vector<int> label(tmp.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    label[order[k]] = static_cast<int>(k);
    g.component_sizes.push_back(tmp[order[k]]);
  }
  g.component_of_firm.resize(g.firms.size());
  for (std::size_t f = 0; f < g.firms.size(); ++f) {
    g.component_of_firm[f] = label[firm_tmp[f]];
  }
  g.component_of_worker.resize(g.workers.size());
  for (std::size_t w = 0; w < g.workers.size(); ++w) {
    g.component_of_worker[w] = label[worker_tmp[w]];
  }
  return g;
}

Panel largest_connected_set(const Panel &panel, const MobilityGraph &graph, ConnectedSetReport *report) {
  std::vector<std::size_t> rows;
  std::size_t employed_obs = 0;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto &r = panel[i];
    if (!r.employed()) {
      continue;
    }
    ++employed_obs;
    if (graph.component_of(*r.firm_id) == 0) {
      rows.push_back(i);
    }
  }
  if (report != nullptr) {
    *report = {};
    if (graph.n_components() > 0) {
      const auto &c0 = graph.component_sizes[0];
      report->kept_firms = c0.n_firms;
      report->kept_workers = c0.n_workers;
      report->kept_obs = c0.n_obs;
      auto share = [](std::size_t kept, std::size_t total) {
        return total == 0 ? 0.0 : 1.0 - static_cast<double>(kept) / static_cast<double>(total);
      };
      report->dropped_firm_share = share(c0.n_firms, graph.firms.size());
      report->dropped_worker_share = share(c0.n_workers, graph.workers.size());
      report->dropped_obs_share = share(c0.n_obs, employed_obs);
    }
  }
  return panel.subset(rows);
}

namespace {

// Articulation points of an undirected graph given as adjacency lists,
// iterative Tarjan low-link.
std::vector<bool> articulation_points(const std::vector<std::vector<std::size_t>> &adj) {
  const std::size_t n = adj.size();
  constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> disc(n, unvisited), low(n, 0), parent(n, unvisited), next_edge(n, 0), children(n, 0);
  std::vector<bool> is_ap(n, false);
  std::size_t timer = 0;
  std::vector<std::size_t> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] != unvisited) {
      continue;
    }
    disc[root] = low[root] = timer++;
    stack.push_back(root);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      if (next_edge[u] < adj[u].size()) {
        const std::size_t v = adj[u][next_edge[u]++];
        if (disc[v] == unvisited) {
          parent[v] = u;
          ++children[u];
          disc[v] = low[v] = timer++;
          stack.push_back(v);
        } else if (v != parent[u]) {
          low[u] = std::min(low[u], disc[v]);
        }
      } else {
        stack.pop_back();
        const std::size_t p = parent[u];
        if (p != unvisited) {
          low[p] = std::min(low[p], low[u]);
          if (parent[p] != unvisited && low[u] >= disc[p]) {
            is_ap[p] = true;
          }
        }
      }
    }
    is_ap[root] = children[root] > 1;
  }
  return is_ap;
}

} // namespace

Panel leave_one_out_connected_set(const Panel &panel, std::size_t *pruned_workers) {
  Panel current = largest_connected_set(panel, build_graph(panel));
  std::size_t pruned = 0;
  while (!current.empty()) {
    const auto g = build_graph(current);
    const std::size_t nw = g.workers.size();
    // Nodes 0..nw-1 are workers, nw.. are firms.
    std::vector<std::vector<std::size_t>> adj(nw + g.firms.size());
    for (const auto &[w, f] : g.edges) {
      adj[w].push_back(nw + f);
      adj[nw + f].push_back(w);
    }
    const auto ap = articulation_points(adj);
    std::vector<std::int64_t> drop;
    for (std::size_t w = 0; w < nw; ++w) {
      if (ap[w]) {
        drop.push_back(g.workers[w]);
      }
    }
    if (drop.empty()) {
      break;
    }
    pruned += drop.size();
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (!std::binary_search(drop.begin(), drop.end(), current[i].person_id)) {
        rows.push_back(i);
      }
    }
    const Panel reduced = current.subset(rows);
    current = largest_connected_set(reduced, build_graph(reduced));
  }
  if (pruned_workers != nullptr) {
    *pruned_workers = pruned;
  }
  return current;
}

} // namespace wagepanel::connectivity
