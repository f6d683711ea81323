#include "rlhi/quality_filter.hpp"

#include "rlhi/error.hpp"
#include "rlhi/text.hpp"

namespace rlhi {

std::vector<std::string> FilterConfig::validate() const {
  std::vector<std::string> errors;
  if (min_rejected_len_chars < 0) errors.push_back("min_rejected_len_chars >= 0");
  if (!(max_reward_gap >= 0.0)) errors.push_back("max_reward_gap >= 0");
  return errors;
}

void to_json(json& j, const FilterConfig& c) {
  j = json{{"min_rejected_len_chars", c.min_rejected_len_chars},
           {"min_rejected_reward", c.min_rejected_reward},
           {"max_reward_gap", c.max_reward_gap},
           {"require_rewrite_improvement", c.require_rewrite_improvement}};
}

void from_json(const json& j, FilterConfig& c) {
  FilterConfig d;
  c.min_rejected_len_chars = j.value("min_rejected_len_chars", d.min_rejected_len_chars);
  c.min_rejected_reward = j.value("min_rejected_reward", d.min_rejected_reward);
  c.max_reward_gap = j.value("max_reward_gap", d.max_reward_gap);
  c.require_rewrite_improvement = j.value("require_rewrite_improvement", d.require_rewrite_improvement);
}

std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::NoImprovement: return "no-improvement";
    case DropReason::Length: return "length";
    case DropReason::RewardFloor: return "reward-floor";
    case DropReason::Gap: return "gap";
    case DropReason::MissingRewards: return "missing-rewards";
  }
  return "?";
}

namespace {

void require_rewards(const PreferencePair& pair) {
  if (!pair.chosen_reward || !pair.rejected_reward) {
    throw Error(ErrorCode::MissingRewards, "pair " + pair.pair_id + " lacks rewards");
  }
}

}  // namespace

std::optional<DropReason> rip_filter(const PreferencePair& pair, const FilterConfig& cfg) {
  require_rewards(pair);
  if (static_cast<long long>(text::char_count(pair.rejected)) < cfg.min_rejected_len_chars) {
    return DropReason::Length;
  }
  if (!(*pair.rejected_reward >= cfg.min_rejected_reward)) return DropReason::RewardFloor;
  if (!(*pair.chosen_reward - *pair.rejected_reward <= cfg.max_reward_gap)) return DropReason::Gap;
  return std::nullopt;
}

std::optional<DropReason> improvement_filter(const PreferencePair& pair) {
  if (pair.provenance == Provenance::RewardRanked) {
    throw Error(ErrorCode::InvalidArgument, "improvement check applies to rewrite pairs only");
  }
  require_rewards(pair);
  if (*pair.chosen_reward < *pair.rejected_reward) return DropReason::NoImprovement;
  return std::nullopt;
}

std::vector<json> FilterLedger::to_records() const {
  json summary = json::object();
  for (auto r : kAllDropReasons) summary[std::string(to_string(r))] = counts.at(r);
  std::vector<json> out;
  out.push_back({{"input", input}, {"kept", kept}, {"dropped", summary}});
  for (const auto& [id, r] : dropped) out.push_back({{"pair_id", id}, {"reason", to_string(r)}});
  return out;
}

PairFilterResult filter_dataset(const std::vector<PreferencePair>& pairs, const FilterConfig& cfg) {
  PairFilterResult res;
  for (auto r : kAllDropReasons) res.ledger.counts[r] = 0;
  res.ledger.input = pairs.size();
  for (const auto& p : pairs) {
    std::optional<DropReason> reason;
    if (!p.chosen_reward || !p.rejected_reward) {
      reason = DropReason::MissingRewards;
    } else {
      if (cfg.require_rewrite_improvement && p.provenance != Provenance::RewardRanked) reason = improvement_filter(p);
      if (!reason) reason = rip_filter(p, cfg);
    }
    if (reason) {
      ++res.ledger.counts[*reason];
      res.ledger.dropped.emplace_back(p.pair_id, *reason);
    } else {
      res.kept.push_back(p);
    }
  }
  res.ledger.kept = res.kept.size();
  return res;
}

}  // namespace rlhi
