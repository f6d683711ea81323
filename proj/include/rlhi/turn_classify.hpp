#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlhi/model_io.hpp"
#include "rlhi/types.hpp"

namespace rlhi {

/// Reads the last [[...]] token of a classifier completion. Whitespace and case are
/// ignored. Returns nullopt when the last token is not one of the four follow-up labels.
std::optional<TurnLabel> parse_followup_verdict(std::string_view completion);

/// Classifies `current_request` relative to `initial_request` (temperature 0).
/// Re-asks once on an unparseable reply, then throws UnparseableVerdict.
TurnLabel classify_followup(std::string_view initial_request, std::string_view current_request, ChatClient& client);

/// Labels every user turn. The first user turn is the initial request; each later
/// user turn is compared against it.
LabeledConversation label_conversation(const Conversation& conv, ChatClient& client, std::size_t workers = 8);

std::vector<LabeledConversation> label_corpus(const std::vector<Conversation>& convs, ChatClient& client,
                                              std::size_t workers = 8);

struct MessageStats {
  std::size_t conversations = 0;
  std::size_t user_turns = 0;
  std::map<TurnLabel, std::size_t> counts;  // every label present, zero if unseen
  std::map<TurnLabel, double> percent;
  double mean_user_turns_per_conversation = 0.0;
  // Filled only when conversation texts are supplied.
  std::optional<double> mean_chars_initial;
  std::optional<double> mean_chars_feedback;

  json to_json() const;
};

/// Label distribution over user turns. `convs` (matched by conv_id) enables the
/// character means. Throws EmptyInput on an empty collection.
MessageStats message_stats(const std::vector<LabeledConversation>& labeled,
                           const std::vector<Conversation>* convs = nullptr);

/// Published WildChat distribution in kAllTurnLabels order; for comparison only.
inline constexpr std::array<double, 5> kReferenceLabelPercent = {27.07, 40.40, 26.51, 4.77, 1.25};

}  // namespace rlhi
