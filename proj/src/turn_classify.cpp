#include "rlhi/turn_classify.hpp"

#include <numeric>

#include "rlhi/error.hpp"
#include "rlhi/parallel.hpp"
#include "rlhi/prompts.hpp"
#include "rlhi/text.hpp"

namespace rlhi {

std::optional<TurnLabel> parse_followup_verdict(std::string_view completion) {
  const auto tokens = text::bracketed_tokens(completion);
  if (tokens.empty()) return std::nullopt;
  const auto t = text::normalize_label(tokens.back());
  if (t == "new" || t == "new request") return TurnLabel::NewRequest;
  if (t == "re-attempt with feedback") return TurnLabel::ReattemptWithFeedback;
  if (t == "re-attempt without feedback") return TurnLabel::ReattemptWithoutFeedback;
  if (t == "positive feedback") return TurnLabel::PositiveFeedback;
  return std::nullopt;
}

TurnLabel classify_followup(std::string_view initial_request, std::string_view current_request, ChatClient& client) {
  if (text::trim(initial_request).empty() || text::trim(current_request).empty()) {
    throw Error(ErrorCode::InvalidArgument, "classify_followup needs two non-empty requests");
  }
  ChatRequest req;
  req.messages.push_back({Role::User, prompts::classify_followup(initial_request, current_request)});
  req.params.temperature = 0.0;
  return ask_with_reprompt<TurnLabel>(client, req, parse_followup_verdict, ErrorCode::UnparseableVerdict,
                                      prompts::kVerdictReminder);
}

LabeledConversation label_conversation(const Conversation& conv, ChatClient& client, std::size_t workers) {
  std::vector<const Turn*> user_turns;
  for (const auto& t : conv.turns) {
    if (t.role == Role::User) user_turns.push_back(&t);
  }
  LabeledConversation out{conv.conv_id, {}};
  if (user_turns.empty()) return out;
  const auto& initial = user_turns.front()->text;
  auto labels = parallel_map(
      user_turns.size(),
      [&](std::size_t i) {
        if (i == 0) return TurnLabel::InitialRequest;
        try {
          return classify_followup(initial, user_turns[i]->text, client);
        } catch (const Error& e) {
          throw e.within(conv.conv_id + " turn " + std::to_string(user_turns[i]->index));
        }
      },
      workers);
  for (std::size_t i = 0; i < user_turns.size(); ++i) out.labels.push_back({user_turns[i]->index, labels[i]});
  return out;
}

std::vector<LabeledConversation> label_corpus(const std::vector<Conversation>& convs, ChatClient& client,
                                              std::size_t workers) {
  // Turns inside a conversation run sequentially; conversations fan out.
  return parallel_map(
      convs.size(), [&](std::size_t i) { return label_conversation(convs[i], client, 1); }, workers);
}

json MessageStats::to_json() const {
  json counts_j = json::object(), pct_j = json::object();
  for (auto l : kAllTurnLabels) {
    counts_j[std::string(to_string(l))] = counts.at(l);
    pct_j[std::string(to_string(l))] = percent.at(l);
  }
  json j = {{"conversations", conversations},
            {"user_turns", user_turns},
            {"counts", counts_j},
            {"percent", pct_j},
            {"mean_user_turns_per_conversation", mean_user_turns_per_conversation}};
  j["mean_chars_initial"] = mean_chars_initial ? json(*mean_chars_initial) : json(nullptr);
  j["mean_chars_feedback"] = mean_chars_feedback ? json(*mean_chars_feedback) : json(nullptr);
  return j;
}

MessageStats message_stats(const std::vector<LabeledConversation>& labeled, const std::vector<Conversation>* convs) {
  if (labeled.empty()) throw Error(ErrorCode::EmptyInput, "message_stats needs at least one conversation");
  MessageStats s;
  for (auto l : kAllTurnLabels) s.counts[l] = 0;
  s.conversations = labeled.size();
  for (const auto& lc : labeled) {
    for (const auto& lt : lc.labels) ++s.counts[lt.label];
    s.user_turns += lc.labels.size();
  }
  if (s.user_turns == 0) throw Error(ErrorCode::EmptyInput, "message_stats: no user turns");
  for (auto l : kAllTurnLabels) {
    s.percent[l] = 100.0 * static_cast<double>(s.counts[l]) / static_cast<double>(s.user_turns);
  }
  s.mean_user_turns_per_conversation = static_cast<double>(s.user_turns) / static_cast<double>(s.conversations);

  if (convs) {
    std::map<std::string, const Conversation*> by_id;
    for (const auto& c : *convs) by_id[c.conv_id] = &c;
    std::map<TurnLabel, std::pair<double, std::size_t>> chars;
    for (const auto& lc : labeled) {
      auto it = by_id.find(lc.conv_id);
      if (it == by_id.end()) continue;
      for (const auto& t : it->second->turns) {
        if (t.role != Role::User) continue;
        if (auto label = lc.label_at(t.index)) {
          auto& [sum, n] = chars[*label];
          sum += static_cast<double>(text::char_count(t.text));
          ++n;
        }
      }
    }
    auto mean = [&](TurnLabel l) -> std::optional<double> {
      auto it = chars.find(l);
      if (it == chars.end() || it->second.second == 0) return std::nullopt;
      return it->second.first / static_cast<double>(it->second.second);
    };
    s.mean_chars_initial = mean(TurnLabel::InitialRequest);
    s.mean_chars_feedback = mean(TurnLabel::ReattemptWithFeedback);
  }
  return s;
}

}  // namespace rlhi
