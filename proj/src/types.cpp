#include "rlhi/types.hpp"

#include <cmath>

#include "rlhi/error.hpp"
#include "rlhi/text.hpp"

namespace rlhi {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::CorpusCorrupt: return "CorpusCorrupt";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::SplitImpossible: return "SplitImpossible";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::CassetteMiss: return "CassetteMiss";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::EmptyPersona: return "EmptyPersona";
    case ErrorCode::EmptyRewrite: return "EmptyRewrite";
    case ErrorCode::ScoringFailed: return "ScoringFailed";
    case ErrorCode::DegenerateCandidates: return "DegenerateCandidates";
    case ErrorCode::AllScoresEqual: return "AllScoresEqual";
    case ErrorCode::MissingRewards: return "MissingRewards";
    case ErrorCode::CandidateNotInUniverse: return "CandidateNotInUniverse";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::NoErrorStep: return "NoErrorStep";
    case ErrorCode::InsufficientErroneous: return "InsufficientErroneous";
    case ErrorCode::MisalignedResponses: return "MisalignedResponses";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Dependency: return "Dependency";
  }
  return "Unknown";
}

std::string_view to_string(Role role) {
  return role == Role::User ? "user" : "assistant";
}

std::string_view to_string(TurnLabel label) {
  switch (label) {
    case TurnLabel::InitialRequest: return "initial_request";
    case TurnLabel::NewRequest: return "new_request";
    case TurnLabel::ReattemptWithFeedback: return "reattempt_with_feedback";
    case TurnLabel::ReattemptWithoutFeedback: return "reattempt_without_feedback";
    case TurnLabel::PositiveFeedback: return "positive_feedback";
  }
  return "unknown";
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::Rewrite: return "rewrite";
    case Provenance::RewardRanked: return "reward_ranked";
    case Provenance::MathRewrite: return "math_rewrite";
  }
  return "unknown";
}

Role parse_role(std::string_view name) {
  const auto n = text::to_lower(name);
  if (n == "user") return Role::User;
  if (n == "assistant") return Role::Assistant;
  throw Error(ErrorCode::InvalidArgument, "unknown role '" + std::string(name) + "'");
}

TurnLabel parse_turn_label(std::string_view name) {
  for (auto label : kAllTurnLabels) {
    if (to_string(label) == name) return label;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown turn label '" + std::string(name) + "'");
}

Provenance parse_provenance(std::string_view name) {
  for (auto p : {Provenance::Rewrite, Provenance::RewardRanked, Provenance::MathRewrite}) {
    if (to_string(p) == name) return p;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown provenance '" + std::string(name) + "'");
}

namespace {

void check_turn_sequence(const std::vector<Turn>& turns, const std::string& field,
                         std::vector<Violation>& out) {
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto& t = turns[i];
    const auto where = field + "[" + std::to_string(i) + "]";
    if (text::trim(t.text).empty()) {
      out.push_back({where + ".text", "non-empty text", "turn text is empty after trimming"});
    }
    if (i > 0 && t.index <= turns[i - 1].index) {
      out.push_back({where + ".index", "index strictly increasing",
                     "index " + std::to_string(t.index) + " does not exceed " +
                         std::to_string(turns[i - 1].index)});
    }
    if (i > 0 && t.role == turns[i - 1].role) {
      out.push_back({where + ".role", "roles alternate",
                     "two consecutive " + std::string(to_string(t.role)) + " turns"});
    }
  }
}

}  // namespace

std::vector<Violation> validate_conversation(const Conversation& conv) {
  std::vector<Violation> out;
  if (conv.conv_id.empty()) out.push_back({"conv_id", "non-empty id", "conv_id is empty"});
  if (conv.user_id.empty()) out.push_back({"user_id", "non-empty id", "user_id is empty"});
  if (conv.turns.empty()) {
    out.push_back({"turns", "at least one turn", "conversation has no turns"});
    return out;
  }
  if (conv.turns.front().role != Role::User) {
    out.push_back({"turns[0].role", "first turn role", "first turn must be a user turn"});
  }
  check_turn_sequence(conv.turns, "turns", out);
  return out;
}

std::vector<Violation> validate_persona(const Persona& persona) {
  std::vector<Violation> out;
  if (persona.bullets.empty() || persona.bullets.size() > 5) {
    out.push_back({"bullets", "1 to 5 bullets",
                   "persona has " + std::to_string(persona.bullets.size()) + " bullets"});
  }
  for (std::size_t i = 0; i < persona.bullets.size(); ++i) {
    if (text::trim(persona.bullets[i]).empty()) {
      out.push_back({"bullets[" + std::to_string(i) + "]", "non-empty bullet", "bullet is blank"});
    }
  }
  return out;
}

std::vector<Violation> validate_pair(const PreferencePair& pair) {
  std::vector<Violation> out;
  if (pair.chosen == pair.rejected) {
    out.push_back({"chosen", "chosen ≠ rejected", "chosen and rejected are identical"});
  }
  if (pair.context.empty()) {
    out.push_back({"context", "context ends with a user turn", "context is empty"});
  } else {
    if (pair.context.back().role != Role::User) {
      out.push_back({"context", "context ends with a user turn", "last context turn is not a user turn"});
    }
    if (pair.context.front().role != Role::User) {
      out.push_back({"context[0].role", "first turn role", "context must start with a user turn"});
    }
    check_turn_sequence(pair.context, "context", out);
  }
  for (const auto& [field, value] : {std::pair{"chosen_reward", pair.chosen_reward},
                                     std::pair{"rejected_reward", pair.rejected_reward}}) {
    if (value && !std::isfinite(*value)) {
      out.push_back({field, "finite reward", "reward is not finite"});
    }
  }
  if (pair.chosen_reward && pair.rejected_reward && *pair.chosen_reward < *pair.rejected_reward) {
    out.push_back({"chosen_reward", "reward order", "chosen_reward is below rejected_reward"});
  }
  if (pair.persona) {
    for (auto v : validate_persona(*pair.persona)) {
      v.field = "persona." + v.field;
      out.push_back(std::move(v));
    }
    if (pair.persona->user_id != pair.user_id) {
      out.push_back({"persona.user_id", "persona belongs to pair user", "persona user differs from pair user"});
    }
  }
  return out;
}

std::optional<TurnLabel> LabeledConversation::label_at(int turn_index) const {
  for (const auto& e : labels) {
    if (e.turn_index == turn_index) return e.label;
  }
  return std::nullopt;
}

std::vector<std::string> user_messages(const Conversation& conv) {
  std::vector<std::string> out;
  for (const auto& t : conv.turns) {
    if (t.role == Role::User) out.push_back(t.text);
  }
  return out;
}

}  // namespace rlhi
