#include "rlhi/pairgen_reward.hpp"

#include <algorithm>
#include <set>

#include "rlhi/error.hpp"
#include "rlhi/log.hpp"
#include "rlhi/parallel.hpp"
#include "rlhi/prompts.hpp"

namespace rlhi {

void to_json(json& j, const RewardPrompt& p) {
  j = json{{"prompt_id", p.prompt_id}, {"user_id", p.user_id}, {"context", p.context}};
}

void from_json(const json& j, RewardPrompt& p) {
  p.prompt_id = j.at("prompt_id").get<std::string>();
  p.user_id = j.at("user_id").get<std::string>();
  p.context = j.at("context").get<std::vector<Turn>>();
  for (std::size_t i = 0; i < p.context.size(); ++i) {
    if (!j.at("context").at(i).contains("index")) p.context[i].index = static_cast<int>(i);
  }
}

std::vector<std::string> sample_candidates(const std::vector<Turn>& context, const std::optional<Persona>& persona,
                                           int n, ChatClient& client, GenParams params) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 candidates");
  if (context.empty() || context.back().role != Role::User) {
    throw Error(ErrorCode::InvalidArgument, "context must end with a user turn");
  }
  auto req = ChatRequest::from_turns(context, params);
  req.params.n = n;
  if (persona) req.system = prompts::persona_system(*persona);
  auto out = chat_generate(client, req);
  if (std::set<std::string>(out.begin(), out.end()).size() < 2) {
    throw Error(ErrorCode::DegenerateCandidates, "fewer than 2 distinct candidates out of " + std::to_string(n));
  }
  return out;
}

std::pair<std::size_t, std::size_t> select_pair(const std::vector<double>& scores) {
  if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "no scores to select from");
  std::size_t hi = 0, lo = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[hi]) hi = i;
    if (scores[i] < scores[lo]) lo = i;
  }
  if (!(scores[hi] > scores[lo])) throw Error(ErrorCode::AllScoresEqual, "all candidate scores are equal");
  return {hi, lo};
}

std::pair<std::size_t, std::size_t> select_pair(const CandidateSet& cs) {
  if (cs.candidates.size() != cs.scores.size()) {
    throw Error(ErrorCode::InvalidArgument, "candidate and score counts differ");
  }
  std::vector<double> v;
  for (const auto& s : cs.scores) v.push_back(s.value);
  return select_pair(v);
}

PreferencePair build_reward_pair(const RewardPrompt& prompt, const std::optional<Persona>& persona, int n,
                                 ChatClient& client, Scorer& scorer, GenParams params) {
  if (persona && persona->user_id != prompt.user_id) {
    throw Error(ErrorCode::InvalidArgument, "persona of " + persona->user_id + " used for " + prompt.user_id);
  }
  CandidateSet cs{prompt.context, persona, sample_candidates(prompt.context, persona, n, client, params), {}};
  for (const auto& c : cs.candidates) {
    try {
      cs.scores.push_back(reward_score(scorer, cs.context, persona, c));
    } catch (const Error& e) {
      throw Error(ErrorCode::ScoringFailed, e.what());
    }
  }
  const auto [hi, lo] = select_pair(cs);
  PreferencePair p;
  p.pair_id = "rr:" + prompt.prompt_id;
  p.user_id = prompt.user_id;
  p.persona = persona;
  p.context = prompt.context;
  p.chosen = cs.candidates[hi];
  p.rejected = cs.candidates[lo];
  p.chosen_reward = cs.scores[hi].value;
  p.rejected_reward = cs.scores[lo].value;
  p.provenance = Provenance::RewardRanked;
  return p;
}

RewardPairsResult build_reward_pairs(const std::vector<RewardPrompt>& prompts,
                                     const std::map<std::string, Persona>& personas, int n, ChatClient& client,
                                     Scorer& scorer, GenParams params, std::size_t workers) {
  using Outcome = std::pair<std::optional<PreferencePair>, std::string>;
  auto outcomes = parallel_map(
      prompts.size(),
      [&](std::size_t i) -> Outcome {
        const auto& prompt = prompts[i];
        auto it = personas.find(prompt.user_id);
        if (it == personas.end()) return {std::nullopt, "no persona for user " + prompt.user_id};
        try {
          return {build_reward_pair(prompt, it->second, n, client, scorer, params), {}};
        } catch (const Error& e) {
          switch (e.code()) {
            case ErrorCode::DegenerateCandidates:
            case ErrorCode::AllScoresEqual:
            case ErrorCode::ScoringFailed:
              return {std::nullopt, e.what()};
            default:
              throw;
          }
        }
      },
      workers);
  RewardPairsResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].first) {
      result.pairs.push_back(std::move(*outcomes[i].first));
    } else {
      result.skips.push_back({prompts[i].prompt_id, outcomes[i].second});
      log::warn("pairs-reward", prompts[i].prompt_id, outcomes[i].second);
    }
  }
  return result;
}

}  // namespace rlhi
