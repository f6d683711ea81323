#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rlhi/model_io.hpp"
#include "rlhi/types.hpp"

namespace rlhi {

enum class JudgeAxis { Personalization, InstructionFollowing, UserEval };

inline constexpr std::array<JudgeAxis, 3> kAllJudgeAxes = {JudgeAxis::Personalization,
                                                           JudgeAxis::InstructionFollowing, JudgeAxis::UserEval};

std::string_view to_string(JudgeAxis axis);
JudgeAxis parse_judge_axis(std::string_view name);
/// Whether the axis prompt carries the persona block.
bool axis_uses_persona(JudgeAxis axis);

enum class Verdict { A, B, Inconsistent };
std::string_view to_string(Verdict v);

/// Persona-guided inference system prompt.
std::string persona_system_prompt(const Persona& persona);

/// The judge prompt with history, both answers and (where the axis has one) the persona.
std::string judge_prompt(JudgeAxis axis, const std::vector<Turn>& context, std::string_view response_a,
                         std::string_view response_b, const Persona* persona);

/// Last bracketed token, "A" or "B" in any case.
std::optional<Verdict> parse_ab_verdict(std::string_view completion);

/// One judge call at temperature 0. Persona axes require a persona.
Verdict judge_once(const std::vector<Turn>& context, std::string_view response_a, std::string_view response_b,
                   const Persona* persona, JudgeAxis axis, ChatClient& judge);

struct MatchResult {
  std::string user_id;
  std::string conv_id;
  int turn_index = 0;
  bool initial_turn = false;
  JudgeAxis axis = JudgeAxis::UserEval;
  Verdict verdict = Verdict::Inconsistent;
  std::pair<Verdict, Verdict> order_swapped_verdicts{Verdict::A, Verdict::A};  // (A first, B first), in A/B terms
};

/// Judges (A, B) and (B, A); agreement gives that verdict, disagreement Inconsistent.
MatchResult judge_debiased(const std::vector<Turn>& context, std::string_view response_a,
                           std::string_view response_b, const Persona* persona, JudgeAxis axis, ChatClient& judge);

/// Exact win rate: half_wins counts a win as 2 and an inconsistent match as 1.
struct WinRate {
  long long half_wins = 0;
  long long matches = 0;
  long long wins = 0;
  long long losses = 0;
  long long inconsistent = 0;

  void add(Verdict v);
  /// Percentage for side A; 0 when there are no matches.
  double percent() const;
  /// The same tally seen from side B.
  WinRate swapped() const;
};

struct AxisRates {
  WinRate overall;
  WinRate initial;
  WinRate followup;
};

/// Responses keyed by (conv_id, user turn index).
using ResponseSet = std::map<std::pair<std::string, int>, std::string>;

void to_json(json& j, const MatchResult& m);

/// Records of the form {"conv_id", "turn_index", "response"}.
ResponseSet read_responses(const std::string& path);
void write_responses(const std::string& path, const ResponseSet& responses);

struct EvalReport {
  std::vector<MatchResult> matches;  // ordered by (user, conv, turn, axis)
  std::map<JudgeAxis, AxisRates> table;
  std::vector<std::string> notes;

  /// Per-match records followed by one aggregate record.
  std::vector<json> to_records() const;
};

/// Aggregates matches into per-axis rates with the initial/follow-up breakdown.
std::map<JudgeAxis, AxisRates> aggregate(const std::vector<MatchResult>& matches);

/// Judges every user turn of the held-out conversations on each requested axis.
/// Persona axes are skipped for users without a persona (noted in the report).
/// Throws MisalignedResponses when either side lacks a turn or has extra entries.
EvalReport run_usereval(const std::vector<Conversation>& heldout, const std::map<std::string, Persona>& personas,
                        const ResponseSet& responses_a, const ResponseSet& responses_b, ChatClient& judge,
                        const std::vector<JudgeAxis>& axes = {kAllJudgeAxes.begin(), kAllJudgeAxes.end()},
                        std::size_t workers = 8);

/// Cuts each conversation at its first user turn without a recorded reply, dropping
/// conversations left empty. Only the remaining turns can be compared with the log.
std::vector<Conversation> answered_prefixes(std::vector<Conversation> heldout);

/// The recorded assistant replies of the held-out conversations, aligned by user turn.
ResponseSet reference_responses(const std::vector<Conversation>& heldout);

/// Generates one response per held-out user turn; with a persona the
/// persona-guided system prompt is used.
ResponseSet generate_responses(const std::vector<Conversation>& heldout,
                               const std::map<std::string, Persona>& personas, ChatClient& client,
                               GenParams params = {}, bool persona_guided = true, std::size_t workers = 8);

}  // namespace rlhi
