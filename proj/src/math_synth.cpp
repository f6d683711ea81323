#include "rlhi/math_synth.hpp"

#include <algorithm>
#include <numeric>

#include "rlhi/error.hpp"
#include "rlhi/hash.hpp"
#include "rlhi/random.hpp"

namespace rlhi {

namespace {

std::string_view verdict_name(StepVerdict v) {
  switch (v) {
    case StepVerdict::Correct: return "correct";
    case StepVerdict::Incorrect: return "incorrect";
    case StepVerdict::Neutral: return "neutral";
  }
  return "correct";
}

StepVerdict parse_verdict(const std::string& s) {
  if (s == "correct") return StepVerdict::Correct;
  if (s == "incorrect") return StepVerdict::Incorrect;
  if (s == "neutral") return StepVerdict::Neutral;
  throw Error(ErrorCode::InvalidArgument, "unknown step verdict '" + s + "'");
}

std::string solution_key(const AnnotatedSolution& s) {
  return s.solution_id.empty() ? "math-" + sha256_hex(s.problem).substr(0, 16) : s.solution_id;
}

}  // namespace

void to_json(json& j, const AnnotatedSolution& s) {
  json steps = json::array();
  for (const auto& st : s.steps) steps.push_back({{"text", st.text}, {"verdict", verdict_name(st.verdict)}});
  j = json{{"solution_id", s.solution_id},
           {"problem", s.problem},
           {"steps", steps},
           {"final_answer", s.final_answer},
           {"final_correct", s.final_correct}};
}

void from_json(const json& j, AnnotatedSolution& s) {
  s.solution_id = j.value("solution_id", std::string());
  s.problem = j.at("problem").get<std::string>();
  s.steps.clear();
  for (const auto& st : j.at("steps")) {
    s.steps.push_back({st.at("text").get<std::string>(), parse_verdict(st.at("verdict").get<std::string>())});
  }
  s.final_answer = j.at("final_answer").get<std::string>();
  s.final_correct = j.at("final_correct").get<bool>();
}

std::size_t first_incorrect_step(const AnnotatedSolution& s) {
  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    if (s.steps[i].verdict == StepVerdict::Incorrect) return i + 1;
  }
  return 0;
}

std::string math_feedback(std::size_t k, bool final_correct) {
  std::string out = "Step " + std::to_string(k) + " seems incomplete or has an error";
  if (final_correct) out += kCorrectFinalQualifier;
  return out;
}

Conversation synthesize_conversation(const AnnotatedSolution& s) {
  const auto k = first_incorrect_step(s);
  const auto id = solution_key(s);
  if (k == 0) throw Error(ErrorCode::NoErrorStep, id + " has no incorrect step");
  std::string solution;
  for (std::size_t i = 0; i < s.steps.size(); ++i) {
    if (i) solution += "\n";
    solution += "Step " + std::to_string(i + 1) + ": " + s.steps[i].text;
  }
  solution += "\nFinal answer: \\boxed{" + s.final_answer + "}";

  Conversation c;
  c.conv_id = id;
  c.user_id = "math";
  c.language = "en";
  c.turns = {{Role::User, s.problem + " " + std::string(kBoxedSuffix), 0},
             {Role::Assistant, solution, 1},
             {Role::User, math_feedback(k, s.final_correct), 2}};
  return c;
}

std::vector<AnnotatedSolution> sample_erroneous(const std::vector<AnnotatedSolution>& corpus, std::size_t k,
                                                std::uint64_t seed) {
  std::vector<std::size_t> erroneous;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (first_incorrect_step(corpus[i]) > 0) erroneous.push_back(i);
  }
  if (k > erroneous.size()) {
    throw Error(ErrorCode::InsufficientErroneous, "asked for " + std::to_string(k) + " but only " +
                                                      std::to_string(erroneous.size()) + " are erroneous");
  }
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first k slots become the sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(erroneous[i], erroneous[i + uniform_below(rng, erroneous.size() - i)]);
  }
  erroneous.resize(k);
  std::sort(erroneous.begin(), erroneous.end());
  std::vector<AnnotatedSolution> out;
  for (auto i : erroneous) out.push_back(corpus[i]);
  return out;
}

RewriteSite math_rewrite_site(const Conversation& conv) {
  if (conv.turns.size() != 3 || conv.turns[0].role != Role::User || conv.turns[1].role != Role::Assistant ||
      conv.turns[2].role != Role::User) {
    throw Error(ErrorCode::InvalidArgument, conv.conv_id + " is not a synthesized math conversation");
  }
  RewriteSite s;
  s.conv_id = conv.conv_id;
  s.user_id = conv.user_id;
  s.feedback_index = conv.turns[2].index;
  s.context = {conv.turns[0], conv.turns[1]};
  s.feedback = conv.turns[2].text;
  s.original = conv.turns[1].text;
  return s;
}

}  // namespace rlhi
