#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlhi/model_io.hpp"

namespace rlhi {

/// Which operative prompt a chat request carries, recognised by template text.
enum class PromptKind {
  Classify,
  Persona,
  Rewrite,
  Dimension,
  JudgePersonalization,
  JudgeInstructionFollowing,
  JudgeUserEval,
  Rating,
  Chat,
};

std::string_view to_string(PromptKind kind);
std::optional<PromptKind> parse_prompt_kind(std::string_view name);

/// Classifies a request by the last user message that is not a verdict reminder.
PromptKind detect_prompt_kind(const ChatRequest& request);

/// The slot text a rule is matched against: the current request for classification,
/// the history for persona inference, the feedback for rewrites, the persona for
/// dimension verdicts, and the last user message otherwise.
std::string prompt_key_text(const ChatRequest& request);

struct MockRule {
  std::optional<PromptKind> kind;  // nullopt matches every kind
  std::string contains;            // case-insensitive substring of prompt_key_text
  std::vector<std::string> replies;  // cycled over the n completions
};

/// Deterministic stand-in for every model endpoint. A reply is chosen, in order, from
/// exact request scripts, then the first matching rule, then a built-in simulator
/// for the recognised prompt kind. Output is a pure function of (request, seed).
class ScriptedModel final : public ChatClient {
 public:
  explicit ScriptedModel(std::uint64_t seed = 0) : seed_(seed) {}
  ScriptedModel(ScriptedModel&& other) noexcept
      : seed_(other.seed_), exact_(std::move(other.exact_)), rules_(std::move(other.rules_)),
        calls_(other.calls_.load()) {}

  void script_exact(const ChatRequest& request, std::vector<std::string> replies);
  void script_exact_key(std::string content_key, std::vector<std::string> replies);
  void add_rule(MockRule rule);

  /// JSON script: {"seed": int, "rules": [{"kind","contains","replies"}], "exact": [{"key","replies"}]}.
  static ScriptedModel from_json(const json& script, std::optional<std::uint64_t> seed_override = {});
  static ScriptedModel from_file(const std::string& path, std::optional<std::uint64_t> seed_override = {});

  std::vector<std::string> generate(const ChatRequest& request) override;
  std::string id() const override { return "scripted-mock"; }

  std::size_t calls() const { return calls_.load(); }

 private:
  std::uint64_t seed_;
  std::map<std::string, std::vector<std::string>> exact_;
  std::vector<MockRule> rules_;
  std::atomic<std::size_t> calls_{0};
};

/// Persona cue table shared by the mock simulators and the default mock scorer.
struct PersonaCue {
  std::vector<std::string> triggers;  // words that reveal the preference in user text
  std::string bullet;                 // persona bullet the mock infers
  std::string response_marker;        // phrase a response carries when it satisfies it
};

const std::vector<PersonaCue>& persona_cues();

/// Indices into persona_cues() that the persona text expresses.
std::vector<std::size_t> cues_in(std::string_view persona_text);

using ScoreFn = std::function<double(const std::vector<Turn>&, const Persona*, std::string_view)>;

class MockScorer final : public Scorer {
 public:
  MockScorer(std::string name, ScoreFn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  /// length/1000 - 1, with length in characters.
  static MockScorer length_based();
  /// Always the same value.
  static MockScorer constant(double value);
  /// 1 for every persona cue the response satisfies, 0 otherwise; persona-blind
  /// scoring returns 0 for everything.
  static MockScorer persona_keyword();
  /// Length-shaped score plus a persona-match bonus and small deterministic jitter.
  static MockScorer pipeline_default();

  RewardScore score(const std::vector<Turn>& context, const Persona* persona, std::string_view response) override;
  std::string id() const override { return name_; }

 private:
  std::string name_;
  ScoreFn fn_;
};

/// Hashed bag of character trigrams with signed buckets, L2-normalised.
class MockEmbedder final : public Embedder {
 public:
  explicit MockEmbedder(std::size_t dimension = 256) : dimension_(dimension) {}
  std::vector<double> embed(std::string_view text) override;
  std::size_t dimension() const override { return dimension_; }

 private:
  std::size_t dimension_;
};

}  // namespace rlhi
