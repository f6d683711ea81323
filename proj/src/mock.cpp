#include "rlhi/mock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "rlhi/error.hpp"
#include "rlhi/hash.hpp"
#include "rlhi/prompts.hpp"
#include "rlhi/text.hpp"

namespace rlhi {

namespace {

constexpr std::pair<PromptKind, std::string_view> kKindNames[] = {
    {PromptKind::Classify, "classify"},
    {PromptKind::Persona, "persona"},
    {PromptKind::Rewrite, "rewrite"},
    {PromptKind::Dimension, "dimension"},
    {PromptKind::JudgePersonalization, "judge_personalization"},
    {PromptKind::JudgeInstructionFollowing, "judge_instruction_following"},
    {PromptKind::JudgeUserEval, "judge_usereval"},
    {PromptKind::Rating, "rating"},
    {PromptKind::Chat, "chat"},
};

std::string_view head(std::string_view tmpl) { return tmpl.substr(0, 45); }

// Text strictly between the last `open` and the next `close` after it.
std::string between_last(std::string_view s, std::string_view open, std::string_view close) {
  auto start = s.rfind(open);
  if (start == std::string_view::npos) return {};
  start += open.size();
  auto end = s.find(close, start);
  if (end == std::string_view::npos) end = s.size();
  return std::string(s.substr(start, end - start));
}

std::string between_first(std::string_view s, std::string_view open, std::string_view close) {
  auto start = s.find(open);
  if (start == std::string_view::npos) return {};
  start += open.size();
  auto end = s.find(close, start);
  if (end == std::string_view::npos) end = s.size();
  return std::string(s.substr(start, end - start));
}

const ChatMessage* operative_message(const ChatRequest& request) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == Role::User && it->text != prompts::kVerdictReminder) return &*it;
  }
  return nullptr;
}

const std::vector<std::string>& sentence_bank() {
  static const std::vector<std::string> kBank = {
      "The first thing to settle is what outcome you actually need, because that shapes every later choice.",
      "A practical way to approach this is to break the problem into smaller parts and handle them in order.",
      "It also helps to check the assumptions behind the question before committing to a single answer.",
      "Several people find that writing the plan down makes the trade-offs much easier to see.",
      "There is no single correct option here, but some options are clearly more robust than others.",
      "If time is limited, focus on the part that carries the most risk and leave polishing for later.",
      "The background matters: earlier approaches failed mostly because they ignored the constraints.",
      "A useful rule of thumb is to prefer the simplest approach that still meets the requirements.",
      "Keep in mind that the details can change once you test the idea against real conditions.",
      "You can adapt the suggestions below to your own situation without changing the overall structure.",
      "Most of the effort usually goes into the preparation, while the final step is comparatively quick.",
      "Consider how the result will be used afterwards, since that determines the level of detail needed.",
      "Another angle worth exploring is how similar problems have been handled in related fields.",
      "When in doubt, gather a little more information before making a decision that is hard to reverse.",
      "The main risk is overlooking a small detail that later turns out to be important.",
      "Reviewing the outcome after a short while often reveals improvements that were not obvious at first.",
      "It is worth noting that reasonable people may weigh these factors differently.",
      "Finally, make sure the solution remains easy to explain to someone who was not involved.",
      "Each of these points can be expanded further if you want to go deeper into a specific area.",
      "A short summary at the end helps anyone reading this later to pick up the key ideas quickly.",
  };
  return kBank;
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string first_words(std::string_view s, std::size_t n) {
  auto w = text::words(s);
  if (w.size() > n) w.resize(n);
  return text::join(w, " ");
}

std::string simulate_chat(const ChatRequest& request, std::mt19937_64& rng) {
  const auto* last = operative_message(request);
  std::string topic = last ? first_words(last->text, 8) : std::string("your request");
  std::string out = "Here is a response about " + topic + ".";
  std::vector<std::size_t> cues;
  if (request.system) cues = cues_in(*request.system);
  for (auto idx : cues) {
    if (rng() % 2 == 0) {
      out += " Where it helps, this answer relies on " + persona_cues()[idx].response_marker + ".";
    }
  }
  const auto& bank = sentence_bank();
  const std::size_t target = 900 + rng() % 3200;
  std::size_t sentences = 0;
  while (out.size() < target) {
    out += (sentences % 4 == 0) ? "\n\n" : " ";
    out += bank[rng() % bank.size()];
    ++sentences;
  }
  return out;
}

std::string simulate_rewrite(const ChatRequest& request, std::mt19937_64& rng) {
  std::string original;
  for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
    if (it->role == Role::Assistant) {
      original = it->text;
      break;
    }
  }
  const auto feedback = prompt_key_text(request);
  std::string out = "Revised response:\n" + original;
  for (auto idx : cues_in(feedback)) {
    out += "\n\nThis version now relies on " + persona_cues()[idx].response_marker + " as requested.";
  }
  const auto& bank = sentence_bank();
  const int extra = 2 + static_cast<int>(rng() % 4);
  out += "\n\n";
  for (int i = 0; i < extra; ++i) {
    if (i) out += " ";
    out += bank[rng() % bank.size()];
  }
  return out;
}

std::string simulate_persona(const ChatRequest& request) {
  const auto history = prompt_key_text(request);
  auto idx = cues_in(history);
  if (idx.empty()) return "- Prefers clear, well-structured responses";
  std::string out;
  for (auto i : idx) {
    if (!out.empty()) out += "\n";
    out += "- " + persona_cues()[i].bullet;
  }
  return out;
}

std::string simulate_dimension(const ChatRequest& request) {
  const auto& msg = operative_message(request)->text;
  const auto dimension = between_first(msg, "for the dimension \"", "\"");
  const auto words = text::words(prompt_key_text(request));
  auto has = [&](std::initializer_list<std::string_view> any) {
    return std::any_of(words.begin(), words.end(), [&](const std::string& w) {
      return std::find(any.begin(), any.end(), w) != any.end();
    });
  };
  std::string verdict = "None";
  if (dimension == "expertise") {
    if (has({"beginner", "beginners", "simple"})) verdict = "1";
    else if (has({"expert", "technical"})) verdict = "2";
  } else if (dimension == "informativeness") {
    if (has({"concise", "short", "brief"})) verdict = "1";
    else if (has({"detailed", "statistics", "evidence", "thorough"})) verdict = "2";
  } else if (dimension == "tone") {
    if (has({"casual", "humor", "humorous", "friendly", "funny"})) verdict = "1";
    else if (has({"formal", "professional"})) verdict = "2";
  } else if (dimension == "structure") {
    if (has({"tables", "step", "structured"})) verdict = "1";
    else if (has({"conversational", "free"})) verdict = "2";
  }
  return "[[" + verdict + "]]";
}

std::string simulate_judge(const ChatRequest& request) {
  const auto& msg = operative_message(request)->text;
  const auto a = between_first(msg, "[The Start of Assistant A's Answer]\n\n", "\n\n[The End of Assistant A's Answer]");
  const auto b = between_first(msg, "[The Start of Assistant B's Answer]\n\n", "\n\n[The End of Assistant B's Answer]");
  return text::char_count(a) >= text::char_count(b) ? "Verdict: [[A]]" : "Verdict: [[B]]";
}

std::string simulate_rating(const ChatRequest& request) {
  const auto& msg = operative_message(request)->text;
  const auto response = between_first(msg, "[The Start of Assistant's Answer]\n\n", "\n\n[The End of Assistant's Answer]");
  const double v = std::clamp((static_cast<double>(text::char_count(response)) - 1500.0) / 500.0, -5.0, 5.0);
  return "[[" + format_score(v) + "]]";
}

}  // namespace

std::string_view to_string(PromptKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "chat";
}

std::optional<PromptKind> parse_prompt_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

PromptKind detect_prompt_kind(const ChatRequest& request) {
  const auto* msg = operative_message(request);
  if (!msg) return PromptKind::Chat;
  std::string_view t = msg->text;
  auto starts = [&](std::string_view tmpl) { return t.substr(0, head(tmpl).size()) == head(tmpl); };
  if (starts(prompts::kClassifyFollowup)) return PromptKind::Classify;
  if (starts(prompts::kInferPersona)) return PromptKind::Persona;
  if (starts(prompts::kRewrite)) return PromptKind::Rewrite;
  if (starts(prompts::kDimensionJudge)) return PromptKind::Dimension;
  if (starts(prompts::kRewardRating)) return PromptKind::Rating;
  if (starts(prompts::kInstructionFollowingJudge)) {
    if (t.find("better aligns with the user persona.") != std::string_view::npos) {
      return PromptKind::JudgePersonalization;
    }
    if (t.find("simulating how the user would evaluate") != std::string_view::npos) {
      return PromptKind::JudgeUserEval;
    }
    return PromptKind::JudgeInstructionFollowing;
  }
  return PromptKind::Chat;
}

std::string prompt_key_text(const ChatRequest& request) {
  const auto* msg = operative_message(request);
  if (!msg) return {};
  const auto& t = msg->text;
  switch (detect_prompt_kind(request)) {
    case PromptKind::Classify:
      return between_last(t, "2nd request: ", "\n\nClassification:");
    case PromptKind::Persona:
      return between_first(t, "[The Start of User Messages]\n\n", "\n\n[The End of User Messages]");
    case PromptKind::Rewrite:
      return between_first(t, "[The Start of User Follow-up Response]\n\n", "\n\n[The End of User Follow-up Response]");
    case PromptKind::Dimension:
    case PromptKind::JudgePersonalization:
    case PromptKind::JudgeUserEval:
      return between_first(t, "[The Start of User Persona]\n\n", "\n\n[The End of User Persona]");
    default:
      return t;
  }
}

void ScriptedModel::script_exact(const ChatRequest& request, std::vector<std::string> replies) {
  script_exact_key(request.content_key(), std::move(replies));
}

void ScriptedModel::script_exact_key(std::string content_key, std::vector<std::string> replies) {
  if (replies.empty()) throw Error(ErrorCode::InvalidArgument, "scripted reply list is empty");
  exact_[std::move(content_key)] = std::move(replies);
}

void ScriptedModel::add_rule(MockRule rule) {
  if (rule.replies.empty()) throw Error(ErrorCode::InvalidArgument, "mock rule has no replies");
  rule.contains = text::to_lower(rule.contains);
  rules_.push_back(std::move(rule));
}

ScriptedModel ScriptedModel::from_json(const json& script, std::optional<std::uint64_t> seed_override) {
  ScriptedModel model(seed_override.value_or(script.value("seed", std::uint64_t{0})));
  for (const auto& r : script.value("rules", json::array())) {
    MockRule rule;
    const auto kind = r.value("kind", std::string("any"));
    if (kind != "any") {
      rule.kind = parse_prompt_kind(kind);
      if (!rule.kind) throw Error(ErrorCode::Config, "mock script: unknown prompt kind '" + kind + "'");
    }
    rule.contains = r.value("contains", std::string());
    if (r.contains("reply")) rule.replies.push_back(r.at("reply").get<std::string>());
    for (const auto& rep : r.value("replies", json::array())) rule.replies.push_back(rep.get<std::string>());
    model.add_rule(std::move(rule));
  }
  for (const auto& e : script.value("exact", json::array())) {
    model.script_exact_key(e.at("key").get<std::string>(), e.at("replies").get<std::vector<std::string>>());
  }
  return model;
}

ScriptedModel ScriptedModel::from_file(const std::string& path, std::optional<std::uint64_t> seed_override) {
  try {
    return from_json(json::parse(read_text_file(path)), seed_override);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, "mock script " + path + ": " + e.what());
  }
}

std::vector<std::string> ScriptedModel::generate(const ChatRequest& request) {
  ++calls_;
  const int n = request.params.n;
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));

  if (auto it = exact_.find(request.content_key()); it != exact_.end()) {
    for (int i = 0; i < n; ++i) out.push_back(it->second[static_cast<std::size_t>(i) % it->second.size()]);
    return out;
  }

  const auto kind = detect_prompt_kind(request);
  const auto key_text = text::to_lower(prompt_key_text(request));
  for (const auto& rule : rules_) {
    if (rule.kind && *rule.kind != kind) continue;
    if (!rule.contains.empty() && key_text.find(rule.contains) == std::string::npos) continue;
    for (int i = 0; i < n; ++i) out.push_back(rule.replies[static_cast<std::size_t>(i) % rule.replies.size()]);
    return out;
  }

  const std::uint64_t base = mix64(request.params.seed.value_or(seed_) ^ fnv1a64(request.content_key()));
  for (int i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix64(base + static_cast<std::uint64_t>(i)));
    switch (kind) {
      case PromptKind::Classify: out.push_back("Classification: [[New]]"); break;
      case PromptKind::Persona: out.push_back(simulate_persona(request)); break;
      case PromptKind::Rewrite: out.push_back(simulate_rewrite(request, rng)); break;
      case PromptKind::Dimension: out.push_back(simulate_dimension(request)); break;
      case PromptKind::JudgePersonalization:
      case PromptKind::JudgeInstructionFollowing:
      case PromptKind::JudgeUserEval: out.push_back(simulate_judge(request)); break;
      case PromptKind::Rating: out.push_back(simulate_rating(request)); break;
      case PromptKind::Chat: out.push_back(simulate_chat(request, rng)); break;
    }
  }
  return out;
}

const std::vector<PersonaCue>& persona_cues() {
  static const std::vector<PersonaCue> kCues = {
      {{"table", "tables", "tabular"}, "Prefers information organized in tables", "a summary table"},
      {{"statistic", "statistics", "numbers", "percent", "percentage"},
       "Values numbers, statistics, and concrete evidence", "supporting statistics"},
      {{"concise", "short", "shorter", "brief"}, "Prefers concise responses without filler", "a concise summary"},
      {{"step", "steps"}, "Wants step-by-step explanations", "a step-by-step walkthrough"},
      {{"code", "python", "function", "script"}, "Expects working code snippets", "a code snippet"},
      {{"creative", "story", "poem", "imaginative"}, "Enjoys creative and imaginative writing",
       "an imaginative framing"},
      {{"formal", "professional"}, "Prefers a formal, professional tone", "a formal register"},
      {{"example", "examples"}, "Likes concrete examples", "a worked example"},
      {{"beginner", "beginners", "simple"}, "Wants explanations a beginner can follow", "beginner-friendly wording"},
      {{"expert", "technical", "detailed"}, "Expects expert-level technical depth", "technical depth"},
  };
  return kCues;
}

std::vector<std::size_t> cues_in(std::string_view persona_text) {
  const auto words = text::words(persona_text);
  std::vector<std::size_t> out;
  const auto& cues = persona_cues();
  for (std::size_t i = 0; i < cues.size(); ++i) {
    const bool hit = std::any_of(cues[i].triggers.begin(), cues[i].triggers.end(), [&](const std::string& trig) {
      return std::find(words.begin(), words.end(), trig) != words.end();
    });
    if (hit) out.push_back(i);
  }
  return out;
}

MockScorer MockScorer::length_based() {
  return MockScorer("mock-length", [](const std::vector<Turn>&, const Persona*, std::string_view r) {
    return static_cast<double>(text::char_count(r)) / 1000.0 - 1.0;
  });
}

MockScorer MockScorer::constant(double value) {
  return MockScorer("mock-constant",
                    [value](const std::vector<Turn>&, const Persona*, std::string_view) { return value; });
}

namespace {

double persona_match(const Persona* persona, std::string_view response, bool fraction) {
  if (!persona) return 0.0;
  const auto idx = cues_in(prompts::persona_text(*persona));
  if (idx.empty()) return 0.0;
  const auto lower = text::to_lower(response);
  double hits = 0;
  for (auto i : idx) {
    if (lower.find(persona_cues()[i].response_marker) != std::string::npos) hits += 1.0;
  }
  return fraction ? hits / static_cast<double>(idx.size()) : hits;
}

}  // namespace

MockScorer MockScorer::persona_keyword() {
  return MockScorer("mock-persona-keyword", [](const std::vector<Turn>&, const Persona* p, std::string_view r) {
    return persona_match(p, r, false);
  });
}

MockScorer MockScorer::pipeline_default() {
  return MockScorer("mock-pipeline", [](const std::vector<Turn>&, const Persona* p, std::string_view r) {
    const double chars = static_cast<double>(text::char_count(r));
    const double jitter = static_cast<double>(fnv1a64(r) % 1000) / 1000.0 - 0.5;
    return 0.6 * std::tanh((chars - 1900.0) / 1500.0) + 0.35 * persona_match(p, r, true) + 0.1 * jitter;
  });
}

RewardScore MockScorer::score(const std::vector<Turn>& context, const Persona* persona, std::string_view response) {
  return {fn_(context, persona, response), name_};
}

std::vector<double> MockEmbedder::embed(std::string_view input) {
  std::vector<double> v(dimension_, 0.0);
  const auto lower = text::to_lower(input);
  std::string_view s = lower;
  auto add = [&](std::string_view gram) {
    const auto h = fnv1a64(gram);
    v[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
  };
  if (s.size() < 3) {
    add(s);
  } else {
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) add(s.substr(i, 3));
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) {
    v[0] = 1.0;
    return v;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace rlhi
