#pragma once

#include <set>
#include <string>
#include <vector>

#include "wagepanel/health.hpp"

namespace testsupport {

/// Scores by scanning every prefix of every category, then enumerating all
/// subsets of the present categories and keeping the one consistent with the
/// supersession rule.
inline int brute_force_cci(const std::vector<wagepanel::health::DiagnosisRecord> &records, int birth_year,
                           int cutoff_age, const wagepanel::health::CharlsonTable &table) {
  const auto &cats = table.categories();
  std::set<std::size_t> present;
  for (const auto &r : records) {
    if (r.event_year - birth_year > cutoff_age) {
      continue;
    }
    std::string code;
    for (char c : r.code) {
      if (c != '.' && c != ' ') {
        code.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      }
    }
    std::size_t best = 0;
    std::vector<std::size_t> hits;
    for (std::size_t k = 0; k < cats.size(); ++k) {
      const auto &list = r.icd_version == 9 ? cats[k].icd9_prefixes : cats[k].icd10_prefixes;
      for (const auto &p : list) {
        if (code.compare(0, p.size(), p) == 0 && p.size() <= code.size()) {
          if (p.size() > best) {
            best = p.size();
            hits.clear();
          }
          if (p.size() == best && (hits.empty() || hits.back() != k)) {
            hits.push_back(k);
          }
        }
      }
    }
    present.insert(hits.begin(), hits.end());
  }
  const std::vector<std::size_t> items(present.begin(), present.end());
  const std::size_t n = items.size();
  int result = -1;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    bool ok = true;
    int score = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto &c = cats[items[i]];
      const bool in = (mask >> i) & 1U;
      const bool beaten = c.superseded_by && present.count(*c.superseded_by) > 0;
      ok = ok && (in == !beaten);
      score += in ? c.weight : 0;
    }
    if (ok) {
      result = score;
    }
  }
  return result;
}

} // namespace testsupport
