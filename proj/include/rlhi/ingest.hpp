#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rlhi/serialize.hpp"
#include "rlhi/types.hpp"

namespace rlhi {

inline constexpr const char* kMidjourneyPrefix =
    "As a prompt generator for a generative AI called 'Midjourney', you will create image prompts";

struct CorpusFilterConfig {
  std::set<std::string> allowed_languages{"en"};  // empty set disables the language rule
  std::string midjourney_prefix = kMidjourneyPrefix;
  int min_user_convs = 3;
  int max_user_convs = 100;
  int max_turns = 10;
  bool require_meaningful_feedback = false;

  /// Invariant violations as human-readable strings; empty when valid.
  std::vector<std::string> validate() const;
};

void to_json(json& j, const CorpusFilterConfig& c);
void from_json(const json& j, CorpusFilterConfig& c);

struct LoadedCorpus {
  std::vector<Conversation> conversations;
  std::vector<LineError> malformed;
};

/// Reads a JSONL corpus in file order. Lines that fail to decode or validate are
/// reported and skipped; more than 10% bad lines aborts with CorpusCorrupt.
/// Conversations without a timestamp get their 0-based record ordinal.
LoadedCorpus load_corpus(const std::string& path);

enum class DropRule {
  Language,              // (a)
  Midjourney,            // (b)
  TooFewConversations,   // (c), lower bound
  TooManyConversations,  // (c), upper bound
  TooManyTurns,          // (d)
  NoMeaningfulFeedback,  // (e)
};

inline constexpr DropRule kAllDropRules[] = {
    DropRule::Language,          DropRule::Midjourney,   DropRule::TooFewConversations,
    DropRule::TooManyConversations, DropRule::TooManyTurns, DropRule::NoMeaningfulFeedback,
};

std::string_view to_string(DropRule rule);

struct DropReport {
  /// Dropped conv_ids per rule, each list sorted.
  std::map<DropRule, std::vector<std::string>> dropped;

  std::size_t count(DropRule rule) const;
  std::size_t total() const;
  json to_json() const;
};

struct FilterResult {
  std::vector<Conversation> kept;  // input order preserved
  DropReport report;
};

/// Applies the corpus rules in the fixed order language, Midjourney prefix, turn
/// cap, per-user conversation counts, meaningful feedback, then re-checks counts.
/// Throws MissingLabels when feedback filtering is requested without labels.
FilterResult filter_corpus(const std::vector<Conversation>& convs, const CorpusFilterConfig& cfg,
                           const std::vector<LabeledConversation>* labels = nullptr);

struct TrainEvalSplit {
  std::vector<Conversation> train;
  std::vector<Conversation> eval;
  std::vector<std::string> train_users;  // sorted
  std::vector<std::string> eval_users;   // sorted
};

/// Splits by user so no user straddles the boundary. Deterministic in `seed`.
TrainEvalSplit split_train_eval(const std::vector<Conversation>& convs, double train_fraction,
                                std::uint64_t seed);

struct Holdout {
  std::vector<Conversation> reference;
  std::vector<Conversation> held_out;
  bool warning = false;  // history too short to leave any reference
};

/// The latest `k` conversations (by timestamp, stable) are held out.
Holdout holdout_split(std::vector<Conversation> user_history, std::size_t k = 5);

/// Groups conversations by user_id (map order), each group sorted by timestamp.
std::map<std::string, std::vector<Conversation>> group_by_user(const std::vector<Conversation>& convs);

}  // namespace rlhi
