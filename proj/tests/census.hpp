#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>

#include "brp/registry.hpp"

namespace testutil {

// Solvent / bankrupt counts for one (W, t0), by a plain scan over the
// registry's flat record lists.
inline std::pair<std::size_t, std::size_t> census(const brp::Registry& reg, int window, int t0) {
  std::map<std::string, std::set<int>> years;
  for (const auto& s : reg.snapshots()) years[s.company_id].insert(s.fiscal_year);
  std::size_t solvent = 0, bankrupt = 0;
  for (const auto& c : reg.companies()) {
    if (c.bankrupt_date && c.bankrupt_date->year <= t0) continue;
    bool ok = true;
    for (int y = t0 - window + 1; y <= t0; ++y) ok = ok && years[c.company_id].count(y) > 0;
    if (!ok) continue;
    if (c.bankrupt_date && c.bankrupt_date->year == t0 + 1) ++bankrupt;
    else ++solvent;
  }
  return {solvent, bankrupt};
}

}  // namespace testutil
