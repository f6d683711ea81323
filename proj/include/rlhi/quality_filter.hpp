#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlhi/serialize.hpp"
#include "rlhi/types.hpp"

namespace rlhi {

struct FilterConfig {
  long long min_rejected_len_chars = 1878;
  double min_rejected_reward = -1.0;
  double max_reward_gap = 1.0;
  bool require_rewrite_improvement = true;

  std::vector<std::string> validate() const;
};

void to_json(json& j, const FilterConfig& c);
void from_json(const json& j, FilterConfig& c);

enum class DropReason { NoImprovement, Length, RewardFloor, Gap, MissingRewards };

inline constexpr std::array<DropReason, 5> kAllDropReasons = {
    DropReason::NoImprovement, DropReason::Length, DropReason::RewardFloor, DropReason::Gap,
    DropReason::MissingRewards};

std::string_view to_string(DropReason r);

/// nullopt = keep. Checks rejected length (code points), rejected reward floor and
/// reward gap, in that order. Throws MissingRewards.
std::optional<DropReason> rip_filter(const PreferencePair& pair, const FilterConfig& cfg = {});

/// Drops rewrites scored strictly below their original. Only for Rewrite and
/// MathRewrite pairs (InvalidArgument otherwise). Throws MissingRewards.
std::optional<DropReason> improvement_filter(const PreferencePair& pair);

struct FilterLedger {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::map<DropReason, std::size_t> counts;  // every reason present
  std::vector<std::pair<std::string, DropReason>> dropped;  // in input order

  std::size_t count(DropReason r) const { return counts.at(r); }
  /// Summary record followed by one record per dropped pair.
  std::vector<json> to_records() const;
};

struct PairFilterResult {
  std::vector<PreferencePair> kept;
  FilterLedger ledger;
};

/// Improvement check (where it applies and is enabled) then the RIP rules. Pairs
/// without both rewards are dropped as missing-rewards. Kept order is preserved.
PairFilterResult filter_dataset(const std::vector<PreferencePair>& pairs, const FilterConfig& cfg = {});

}  // namespace rlhi
