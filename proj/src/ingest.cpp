#include "rlhi/ingest.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>
#include <unordered_map>

#include "rlhi/error.hpp"
#include "rlhi/random.hpp"
#include "rlhi/log.hpp"
#include "rlhi/text.hpp"

namespace rlhi {

std::vector<std::string> CorpusFilterConfig::validate() const {
  std::vector<std::string> errors;
  if (min_user_convs > max_user_convs) errors.push_back("min_user_convs <= max_user_convs");
  if (max_turns < 2) errors.push_back("max_turns >= 2");
  if (min_user_convs < 0) errors.push_back("min_user_convs >= 0");
  return errors;
}

void to_json(json& j, const CorpusFilterConfig& c) {
  j = json{{"allowed_languages", c.allowed_languages},
           {"midjourney_prefix", c.midjourney_prefix},
           {"min_user_convs", c.min_user_convs},
           {"max_user_convs", c.max_user_convs},
           {"max_turns", c.max_turns},
           {"require_meaningful_feedback", c.require_meaningful_feedback}};
}

void from_json(const json& j, CorpusFilterConfig& c) {
  CorpusFilterConfig d;
  c.allowed_languages = j.value("allowed_languages", d.allowed_languages);
  c.midjourney_prefix = j.value("midjourney_prefix", d.midjourney_prefix);
  c.min_user_convs = j.value("min_user_convs", d.min_user_convs);
  c.max_user_convs = j.value("max_user_convs", d.max_user_convs);
  c.max_turns = j.value("max_turns", d.max_turns);
  c.require_meaningful_feedback = j.value("require_meaningful_feedback", d.require_meaningful_feedback);
}

LoadedCorpus load_corpus(const std::string& path) {
  LoadedCorpus out;
  std::int64_t ordinal = 0;
  auto result = read_jsonl(path, [&](const json& j, std::size_t) {
    auto conv = j.get<Conversation>();
    if (!j.contains("timestamp")) conv.timestamp = ordinal;
    ++ordinal;
    auto violations = validate_conversation(conv);
    if (!violations.empty()) {
      throw Error(ErrorCode::InvalidArgument,
                  violations.front().field + ": " + violations.front().rule);
    }
    out.conversations.push_back(std::move(conv));
  });
  out.malformed = std::move(result.errors);
  for (const auto& e : out.malformed) {
    log::warn("ingest", path + ":" + std::to_string(e.line_number), "skipping malformed record: " + e.message);
  }
  if (out.malformed.size() * 10 > result.records) {
    throw Error(ErrorCode::CorpusCorrupt, path + ": " + std::to_string(out.malformed.size()) + " of " +
                                              std::to_string(result.records) + " records are malformed");
  }
  return out;
}

std::string_view to_string(DropRule rule) {
  switch (rule) {
    case DropRule::Language: return "language";
    case DropRule::Midjourney: return "midjourney";
    case DropRule::TooFewConversations: return "too_few_conversations";
    case DropRule::TooManyConversations: return "too_many_conversations";
    case DropRule::TooManyTurns: return "too_many_turns";
    case DropRule::NoMeaningfulFeedback: return "no_meaningful_feedback";
  }
  return "unknown";
}

std::size_t DropReport::count(DropRule rule) const {
  auto it = dropped.find(rule);
  return it == dropped.end() ? 0 : it->second.size();
}

std::size_t DropReport::total() const {
  std::size_t n = 0;
  for (const auto& [rule, ids] : dropped) n += ids.size();
  return n;
}

json DropReport::to_json() const {
  json counts = json::object();
  json ids = json::object();
  for (auto rule : kAllDropRules) {
    counts[std::string(to_string(rule))] = count(rule);
    auto it = dropped.find(rule);
    ids[std::string(to_string(rule))] = it == dropped.end() ? std::vector<std::string>{} : it->second;
  }
  return json{{"counts", counts}, {"dropped_ids", ids}, {"total_dropped", total()}};
}

namespace {

std::string primary_subtag(std::string_view tag) {
  auto lower = text::to_lower(text::trim(tag));
  auto cut = lower.find_first_of("-_");
  return cut == std::string::npos ? lower : lower.substr(0, cut);
}

// Straight, curly and backtick quotes all compare equal.
std::string fold_quotes(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    if (c == '"' || c == '\'' || c == '`') {
      out.push_back('\'');
    } else if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
               (static_cast<unsigned char>(s[i + 2]) >= 0x98 && static_cast<unsigned char>(s[i + 2]) <= 0x9F)) {
      out.push_back('\'');  // U+2018..U+201F
      i += 2;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

bool language_allowed(const CorpusFilterConfig& cfg, std::string_view language) {
  if (cfg.allowed_languages.empty()) return true;
  auto tag = primary_subtag(language);
  return std::any_of(cfg.allowed_languages.begin(), cfg.allowed_languages.end(),
                     [&](const std::string& allowed) { return primary_subtag(allowed) == tag; });
}

bool is_midjourney(const CorpusFilterConfig& cfg, const Conversation& conv) {
  if (cfg.midjourney_prefix.empty()) return false;
  for (const auto& t : conv.turns) {
    if (t.role == Role::User) {
      return text::starts_with_icase(fold_quotes(text::trim(t.text)), fold_quotes(cfg.midjourney_prefix));
    }
  }
  return false;
}

}  // namespace

FilterResult filter_corpus(const std::vector<Conversation>& convs, const CorpusFilterConfig& cfg,
                           const std::vector<LabeledConversation>* labels) {
  if (auto errors = cfg.validate(); !errors.empty()) {
    throw Error(ErrorCode::Config, "corpus filter: " + errors.front());
  }
  if (cfg.require_meaningful_feedback && labels == nullptr) {
    throw Error(ErrorCode::MissingLabels, "meaningful-feedback filtering needs turn labels");
  }

  std::vector<std::optional<DropRule>> verdict(convs.size());

  for (std::size_t i = 0; i < convs.size(); ++i) {
    const auto& c = convs[i];
    if (!language_allowed(cfg, c.language)) {
      verdict[i] = DropRule::Language;
    } else if (is_midjourney(cfg, c)) {
      verdict[i] = DropRule::Midjourney;
    } else if (static_cast<int>(c.turns.size()) > cfg.max_turns) {
      verdict[i] = DropRule::TooManyTurns;
    }
  }

  auto apply_user_counts = [&] {
    std::unordered_map<std::string, int> per_user;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      if (!verdict[i]) ++per_user[convs[i].user_id];
    }
    for (std::size_t i = 0; i < convs.size(); ++i) {
      if (verdict[i]) continue;
      const int n = per_user[convs[i].user_id];
      if (n < cfg.min_user_convs) {
        verdict[i] = DropRule::TooFewConversations;
      } else if (n > cfg.max_user_convs) {
        verdict[i] = DropRule::TooManyConversations;
      }
    }
  };
  apply_user_counts();

  if (cfg.require_meaningful_feedback) {
    std::unordered_map<std::string, const LabeledConversation*> by_conv;
    for (const auto& l : *labels) by_conv[l.conv_id] = &l;
    std::unordered_map<std::string, bool> has_feedback;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      if (verdict[i]) continue;
      auto& flag = has_feedback[convs[i].user_id];
      auto it = by_conv.find(convs[i].conv_id);
      if (it == by_conv.end()) {
        throw Error(ErrorCode::MissingLabels, "no labels for conversation " + convs[i].conv_id);
      }
      for (const auto& e : it->second->labels) {
        if (e.label == TurnLabel::ReattemptWithFeedback) flag = true;
      }
    }
    for (std::size_t i = 0; i < convs.size(); ++i) {
      if (!verdict[i] && !has_feedback[convs[i].user_id]) verdict[i] = DropRule::NoMeaningfulFeedback;
    }
    apply_user_counts();
  }

  FilterResult result;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    if (verdict[i]) {
      result.report.dropped[*verdict[i]].push_back(convs[i].conv_id);
    } else {
      result.kept.push_back(convs[i]);
    }
  }
  for (auto& [rule, ids] : result.report.dropped) std::sort(ids.begin(), ids.end());
  return result;
}

std::map<std::string, std::vector<Conversation>> group_by_user(const std::vector<Conversation>& convs) {
  std::map<std::string, std::vector<Conversation>> groups;
  for (const auto& c : convs) groups[c.user_id].push_back(c);
  for (auto& [user, list] : groups) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Conversation& a, const Conversation& b) { return a.timestamp < b.timestamp; });
  }
  return groups;
}

TrainEvalSplit split_train_eval(const std::vector<Conversation>& convs, double train_fraction,
                                std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must lie strictly between 0 and 1");
  }
  std::vector<std::string> users;
  for (const auto& [user, list] : group_by_user(convs)) users.push_back(user);
  if (users.size() < 2) {
    throw Error(ErrorCode::SplitImpossible, "need at least 2 users, have " + std::to_string(users.size()));
  }

  std::mt19937_64 rng(seed);
  portable_shuffle(users, rng);

  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(users.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, users.size() - 1);

  TrainEvalSplit split;
  split.train_users.assign(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.eval_users.assign(users.begin() + static_cast<std::ptrdiff_t>(n_train), users.end());
  std::sort(split.train_users.begin(), split.train_users.end());
  std::sort(split.eval_users.begin(), split.eval_users.end());
  for (const auto& c : convs) {
    if (std::binary_search(split.train_users.begin(), split.train_users.end(), c.user_id)) {
      split.train.push_back(c);
    } else {
      split.eval.push_back(c);
    }
  }
  return split;
}

Holdout holdout_split(std::vector<Conversation> user_history, std::size_t k) {
  std::stable_sort(user_history.begin(), user_history.end(),
                   [](const Conversation& a, const Conversation& b) { return a.timestamp < b.timestamp; });
  Holdout out;
  if (user_history.size() <= k) {
    out.held_out = std::move(user_history);
    out.warning = true;
    log::warn("ingest", out.held_out.empty() ? "" : out.held_out.front().user_id,
              "history has no more than " + std::to_string(k) + " conversations; reference history is empty");
    return out;
  }
  const auto cut = static_cast<std::ptrdiff_t>(user_history.size() - k);
  out.reference.assign(user_history.begin(), user_history.begin() + cut);
  out.held_out.assign(user_history.begin() + cut, user_history.end());
  return out;
}

}  // namespace rlhi
