#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wagepanel/core_data.hpp"

namespace testsupport {

using wagepanel::Education;
using wagepanel::Panel;
using wagepanel::PersonYearRecord;

inline PersonYearRecord rec(std::int64_t person, int year, std::optional<std::int64_t> firm, double earnings,
                            int months = 12, int birth_year = 1970, Education edu = Education::tertiary,
                            int graduation_year = 1995) {
  PersonYearRecord r;
  r.person_id = person;
  r.year = year;
  r.birth_year = birth_year;
  r.firm_id = firm;
  r.annual_earnings = firm ? earnings : 0.0;
  r.months_worked = firm ? months : 0;
  r.education_level = edu;
  r.graduation_year = graduation_year;
  return r;
}

/// Panel with an identity deflator over the years present.
inline Panel make_panel(std::vector<PersonYearRecord> records, std::vector<std::string> index_names = {},
                        std::vector<double> index_values = {}) {
  std::map<int, double> deflator;
  int lo = 3000, hi = 0;
  for (const auto &r : records) {
    lo = std::min(lo, r.year);
    hi = std::max(hi, r.year);
  }
  for (int y = lo; y <= hi; ++y) {
    deflator[y] = 1.0;
  }
  return Panel(std::move(records), std::move(index_names), std::move(index_values), std::move(deflator));
}

/// Connected components of the firm projection by breadth-first search over
/// the bipartite worker-firm adjacency. Returns a partition of firm ids.
inline std::set<std::set<std::int64_t>>
bfs_firm_components(const std::vector<std::pair<std::int64_t, std::int64_t>> &worker_firm) {
  std::map<std::int64_t, std::vector<std::int64_t>> firms_of, workers_of;
  for (auto [w, f] : worker_firm) {
    firms_of[w].push_back(f);
    workers_of[f].push_back(w);
  }
  std::set<std::int64_t> seen_firms, seen_workers;
  std::set<std::set<std::int64_t>> out;
  for (const auto &[start, _] : workers_of) {
    if (seen_firms.count(start)) {
      continue;
    }
    std::set<std::int64_t> comp;
    std::queue<std::int64_t> q;
    q.push(start);
    seen_firms.insert(start);
    while (!q.empty()) {
      const auto f = q.front();
      q.pop();
      comp.insert(f);
      for (auto w : workers_of[f]) {
        if (!seen_workers.insert(w).second) {
          continue;
        }
        for (auto g : firms_of[w]) {
          if (seen_firms.insert(g).second) {
            q.push(g);
          }
        }
      }
    }
    out.insert(comp);
  }
  return out;
}

/// Minimum-norm least squares through a complete orthogonal decomposition.
inline Eigen::VectorXd dense_least_squares(const Eigen::MatrixXd &x, const Eigen::VectorXd &y) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  cod.setThreshold(1e-10);
  return cod.solve(y);
}

inline std::filesystem::path temp_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("wagepanel_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

} // namespace testsupport
