#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlhi/pairgen_rewrite.hpp"
#include "rlhi/serialize.hpp"
#include "rlhi/types.hpp"

namespace rlhi {

enum class StepVerdict { Correct, Incorrect, Neutral };

struct SolutionStep {
  std::string text;
  StepVerdict verdict = StepVerdict::Correct;

  bool operator==(const SolutionStep&) const = default;
};

struct AnnotatedSolution {
  std::string solution_id;  // optional in files; derived from content when absent
  std::string problem;
  std::vector<SolutionStep> steps;
  std::string final_answer;
  bool final_correct = false;

  bool operator==(const AnnotatedSolution&) const = default;
};

void to_json(json& j, const AnnotatedSolution& s);
void from_json(const json& j, AnnotatedSolution& s);

inline constexpr std::string_view kBoxedSuffix =
    "Please reason step by step, and put your final answer within \\boxed{}.";
inline constexpr std::string_view kCorrectFinalQualifier = ", though your final answer is correct.";

/// 1-based index of the first incorrect step; neutral counts as correct. 0 if none.
std::size_t first_incorrect_step(const AnnotatedSolution& s);

/// "Step {k} seems incomplete or has an error", plus the qualifier when the final answer is right.
std::string math_feedback(std::size_t k, bool final_correct);

/// Three turns: problem + suffix, "Step i: " prefixed steps and the boxed answer, feedback.
/// Throws NoErrorStep.
Conversation synthesize_conversation(const AnnotatedSolution& s);

/// k erroneous solutions drawn uniformly without replacement, returned in corpus order.
/// Throws InsufficientErroneous.
std::vector<AnnotatedSolution> sample_erroneous(const std::vector<AnnotatedSolution>& corpus, std::size_t k,
                                                std::uint64_t seed);

/// The single site of a synthesized conversation: original = turn 2, feedback = turn 3.
RewriteSite math_rewrite_site(const Conversation& conv);

}  // namespace rlhi
