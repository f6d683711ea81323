#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rlhi/model_io.hpp"
#include "rlhi/types.hpp"

namespace rlhi {

/// One entry of the prompt pool: a user's context ending in a user turn.
struct RewardPrompt {
  std::string prompt_id;
  std::string user_id;
  std::vector<Turn> context;

  bool operator==(const RewardPrompt&) const = default;
};

void to_json(json& j, const RewardPrompt& p);
void from_json(const json& j, RewardPrompt& p);

struct CandidateSet {
  std::vector<Turn> context;
  std::optional<Persona> persona;
  std::vector<std::string> candidates;
  std::vector<RewardScore> scores;
};

/// n completions under the persona-guided system prompt (when a persona is given).
/// Throws DegenerateCandidates when fewer than two distinct strings come back.
std::vector<std::string> sample_candidates(const std::vector<Turn>& context, const std::optional<Persona>& persona,
                                           int n, ChatClient& client, GenParams params = {});

/// (chosen, rejected): the lowest index attaining the max and the lowest index
/// attaining the min. Throws AllScoresEqual when max == min, a single score included.
std::pair<std::size_t, std::size_t> select_pair(const std::vector<double>& scores);
std::pair<std::size_t, std::size_t> select_pair(const CandidateSet& cs);

/// Samples, scores with the same persona and selects one pair.
PreferencePair build_reward_pair(const RewardPrompt& prompt, const std::optional<Persona>& persona, int n,
                                 ChatClient& client, Scorer& scorer, GenParams params = {});

struct PromptSkip {
  std::string prompt_id;
  std::string reason;
};

struct RewardPairsResult {
  std::vector<PreferencePair> pairs;  // in prompt order
  std::vector<PromptSkip> skips;
};

/// Per-prompt DegenerateCandidates, AllScoresEqual, ScoringFailed and missing
/// personas become skips; any other error aborts.
RewardPairsResult build_reward_pairs(const std::vector<RewardPrompt>& prompts,
                                     const std::map<std::string, Persona>& personas, int n, ChatClient& client,
                                     Scorer& scorer, GenParams params = {}, std::size_t workers = 8);

}  // namespace rlhi
