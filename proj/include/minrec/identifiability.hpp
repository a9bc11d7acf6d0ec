#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "minrec/core.hpp"

namespace minrec {

// Minimum identifying subset: the smallest set of a user's items contained
// in no other user's profile. A higher value means an attacker needs to
// know more items to single the user out.
struct IdentifiabilityResult {
  enum class Status { identified, not_identifiable, capped };

  UserId user_id;
  Status status{Status::identified};
  // identified: the exact minimum size; capped: cap + 1, a lower bound.
  std::size_t min_subset_size{};
  std::size_t search_cap{};
  bool exact{true};  // false only when capped
};

// Iterative deepening over subset sizes s = 1, 2, ... up to `cap`. Items
// are ordered rarest-first (fewest covering profiles); a candidate subset
// is identifying iff the intersection of its items' cover lists is empty.
// Because sizes are searched in ascending order, every DFS prefix has a
// nonempty cover, so intersections only need checking at full depth.
inline IdentifiabilityResult min_identifying_subset(
    const UserId& user, const std::set<ItemId>& user_items,
    const std::vector<const std::set<ItemId>*>& others, std::size_t cap) {
  if (cap < 1) throw ConfigError("identifiability cap must be >= 1");
  if (user_items.empty()) throw DataError("user " + user + " has an empty profile");

  IdentifiabilityResult result;
  result.user_id = user;
  result.search_cap = cap;

  // cover[i] = indices of other profiles containing item i
  std::vector<std::vector<std::size_t>> covers;
  covers.reserve(user_items.size());
  for (const ItemId& item : user_items) {
    std::vector<std::size_t> cover;
    for (std::size_t j = 0; j < others.size(); ++j)
      if (others[j]->count(item)) cover.push_back(j);
    if (cover.empty()) {
      result.status = IdentifiabilityResult::Status::identified;
      result.min_subset_size = 1;
      return result;
    }
    covers.push_back(std::move(cover));
  }

  std::sort(covers.begin(), covers.end(),
            [](const auto& a, const auto& b) { return a.size() < b.size(); });

  const auto intersect = [](const std::vector<std::size_t>& a,
                            const std::vector<std::size_t>& b) {
    std::vector<std::size_t> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::back_inserter(out));
    return out;
  };

  // Whole-profile containment: if some other profile covers every item, no
  // subset can be identifying.
  std::vector<std::size_t> all = covers.front();
  for (std::size_t i = 1; i < covers.size() && !all.empty(); ++i)
    all = intersect(all, covers[i]);
  if (!all.empty()) {
    result.status = IdentifiabilityResult::Status::not_identifiable;
    result.min_subset_size = 0;
    return result;
  }

  const std::size_t m = covers.size();
  const std::size_t max_size = std::min(cap, m);
  std::vector<std::size_t> chosen;
  for (std::size_t target = 2; target <= max_size; ++target) {
    // DFS over index combinations in rarest-first order.
    auto dfs = [&](auto&& self, std::size_t start,
                   const std::vector<std::size_t>& cover, std::size_t depth) -> bool {
      for (std::size_t i = start; i + (target - depth) <= m; ++i) {
        const std::vector<std::size_t> next = intersect(cover, covers[i]);
        if (depth + 1 == target) {
          if (next.empty()) return true;
        } else if (self(self, i + 1, next, depth + 1)) {
          return true;
        }
      }
      return false;
    };
    bool found = false;
    for (std::size_t i = 0; i + target <= m && !found; ++i)
      found = dfs(dfs, i + 1, covers[i], 1);
    if (found) {
      result.status = IdentifiabilityResult::Status::identified;
      result.min_subset_size = target;
      return result;
    }
  }

  // The full profile is identifying (containment check failed), so a cap
  // below the profile size is the only way to get here.
  result.status = IdentifiabilityResult::Status::capped;
  result.min_subset_size = cap + 1;
  result.exact = false;
  return result;
}

// One (strategy, n) cell of the identifiability table: mean minimum subset
// size over users identified exactly, plus the composition of the rest.
struct IdentifiabilityCell {
  std::optional<double> mean_min_subset;
  std::size_t identified{};
  std::size_t capped{};
  std::size_t not_identifiable{};
  std::size_t cap{};
};

inline IdentifiabilityCell identifiability_cell(
    const std::map<UserId, std::set<ItemId>>& profiles, std::size_t cap) {
  IdentifiabilityCell cell;
  cell.cap = cap;
  double sum = 0.0;
  for (const auto& [user, items] : profiles) {
    std::vector<const std::set<ItemId>*> others;
    others.reserve(profiles.size() - 1);
    for (const auto& [other, other_items] : profiles)
      if (other != user) others.push_back(&other_items);
    const IdentifiabilityResult r = min_identifying_subset(user, items, others, cap);
    switch (r.status) {
      case IdentifiabilityResult::Status::identified:
        ++cell.identified;
        sum += static_cast<double>(r.min_subset_size);
        break;
      case IdentifiabilityResult::Status::capped:
        ++cell.capped;
        break;
      case IdentifiabilityResult::Status::not_identifiable:
        ++cell.not_identifiable;
        break;
    }
  }
  if (cell.identified > 0) cell.mean_min_subset = sum / static_cast<double>(cell.identified);
  return cell;
}

// Applies identifiability_cell to the minimized profiles of every
// (strategy name, n) condition.
inline std::map<std::pair<std::string, std::size_t>, IdentifiabilityCell>
identifiability_table(
    const std::map<std::pair<std::string, std::size_t>,
                   std::map<UserId, std::set<ItemId>>>& minimized_runs,
    std::size_t cap) {
  std::map<std::pair<std::string, std::size_t>, IdentifiabilityCell> table;
  for (const auto& [key, profiles] : minimized_runs)
    table.emplace(key, identifiability_cell(profiles, cap));
  return table;
}

// Number of distinct genres covered by the profile's items.
inline std::size_t genre_breadth(const std::set<ItemId>& profile, const GenreMap& genres) {
  std::set<std::string> labels;
  for (const ItemId& item : profile) {
    auto it = genres.find(item);
    if (it != genres.end()) labels.insert(it->second.begin(), it->second.end());
  }
  return labels.size();
}

}  // namespace minrec
