#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rlhi {

enum class Role { User, Assistant };

struct Turn {
  Role role = Role::User;
  std::string text;
  int index = 0;

  bool operator==(const Turn&) const = default;
};

struct Conversation {
  std::string conv_id;
  std::string user_id;
  std::vector<Turn> turns;
  std::string language = "en";
  std::int64_t timestamp = 0;

  bool operator==(const Conversation&) const = default;
};

enum class TurnLabel {
  InitialRequest,
  NewRequest,
  ReattemptWithFeedback,
  ReattemptWithoutFeedback,
  PositiveFeedback,
};

inline constexpr TurnLabel kAllTurnLabels[] = {
    TurnLabel::InitialRequest,           TurnLabel::NewRequest,
    TurnLabel::ReattemptWithFeedback,    TurnLabel::ReattemptWithoutFeedback,
    TurnLabel::PositiveFeedback,
};

struct LabeledTurn {
  int turn_index = 0;
  TurnLabel label = TurnLabel::InitialRequest;

  bool operator==(const LabeledTurn&) const = default;
};

/// Labels for every user turn of one conversation, keyed by Turn::index.
struct LabeledConversation {
  std::string conv_id;
  std::vector<LabeledTurn> labels;

  /// Label of the user turn with this Turn::index, if present.
  std::optional<TurnLabel> label_at(int turn_index) const;

  bool operator==(const LabeledConversation&) const = default;
};

struct Persona {
  std::string user_id;
  std::vector<std::string> bullets;
  std::vector<std::string> source_conv_ids;
  std::int64_t derived_at = 0;

  bool operator==(const Persona&) const = default;
};

enum class Provenance { Rewrite, RewardRanked, MathRewrite };

struct PreferencePair {
  std::string pair_id;
  std::string user_id;
  std::optional<Persona> persona;
  std::vector<Turn> context;
  std::string chosen;
  std::string rejected;
  std::optional<double> chosen_reward;
  std::optional<double> rejected_reward;
  Provenance provenance = Provenance::Rewrite;

  bool operator==(const PreferencePair&) const = default;
};

struct RewardScore {
  double value = 0.0;
  std::string scorer_id;

  bool operator==(const RewardScore&) const = default;
};

/// A single broken invariant: which field, which rule, and a readable detail.
struct Violation {
  std::string field;
  std::string rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_conversation(const Conversation& conv);
std::vector<Violation> validate_pair(const PreferencePair& pair);
std::vector<Violation> validate_persona(const Persona& persona);

std::string_view to_string(Role role);
std::string_view to_string(TurnLabel label);
std::string_view to_string(Provenance provenance);

// Parsers throw Error(InvalidArgument) on unknown names.
Role parse_role(std::string_view name);
TurnLabel parse_turn_label(std::string_view name);
Provenance parse_provenance(std::string_view name);

/// Text of the user turns only, in conversation order.
std::vector<std::string> user_messages(const Conversation& conv);

}  // namespace rlhi
