#include "rlhi/usereval.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "rlhi/error.hpp"
#include "rlhi/log.hpp"
#include "rlhi/parallel.hpp"
#include "rlhi/prompts.hpp"
#include "rlhi/text.hpp"

namespace rlhi {

std::string_view to_string(JudgeAxis axis) {
  switch (axis) {
    case JudgeAxis::Personalization: return "personalization";
    case JudgeAxis::InstructionFollowing: return "instruction_following";
    case JudgeAxis::UserEval: return "usereval";
  }
  return "usereval";
}

JudgeAxis parse_judge_axis(std::string_view name) {
  for (auto a : kAllJudgeAxes) {
    if (to_string(a) == name) return a;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown judge axis '" + std::string(name) + "'");
}

bool axis_uses_persona(JudgeAxis axis) { return axis != JudgeAxis::InstructionFollowing; }

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::A: return "A";
    case Verdict::B: return "B";
    case Verdict::Inconsistent: return "inconsistent";
  }
  return "inconsistent";
}

std::string persona_system_prompt(const Persona& persona) { return prompts::persona_system(persona); }

std::string judge_prompt(JudgeAxis axis, const std::vector<Turn>& context, std::string_view response_a,
                         std::string_view response_b, const Persona* persona) {
  std::vector<std::pair<std::string, std::string>> slots = {
      {"conversation_history", prompts::render_history(context)},
      {"response_A", std::string(response_a)},
      {"response_B", std::string(response_b)}};
  if (axis_uses_persona(axis)) {
    if (!persona || persona->bullets.empty()) {
      throw Error(ErrorCode::InvalidArgument, std::string(to_string(axis)) + " judging needs a persona");
    }
    slots.emplace_back("persona", prompts::persona_text(*persona));
  }
  switch (axis) {
    case JudgeAxis::Personalization: return text::fill(prompts::kPersonalizationJudge, slots);
    case JudgeAxis::InstructionFollowing: return text::fill(prompts::kInstructionFollowingJudge, slots);
    case JudgeAxis::UserEval: return text::fill(prompts::kUserEvalJudge, slots);
  }
  return {};
}

std::optional<Verdict> parse_ab_verdict(std::string_view completion) {
  const auto tokens = text::bracketed_tokens(completion);
  if (tokens.empty()) return std::nullopt;
  const auto t = text::normalize_label(tokens.back());
  if (t == "a") return Verdict::A;
  if (t == "b") return Verdict::B;
  return std::nullopt;
}

Verdict judge_once(const std::vector<Turn>& context, std::string_view response_a, std::string_view response_b,
                   const Persona* persona, JudgeAxis axis, ChatClient& judge) {
  ChatRequest req;
  req.messages.push_back({Role::User, judge_prompt(axis, context, response_a, response_b, persona)});
  req.params.temperature = 0.0;
  return ask_with_reprompt<Verdict>(judge, req, parse_ab_verdict, ErrorCode::UnparseableVerdict,
                                    prompts::kVerdictReminder);
}

MatchResult judge_debiased(const std::vector<Turn>& context, std::string_view response_a,
                           std::string_view response_b, const Persona* persona, JudgeAxis axis, ChatClient& judge) {
  const auto first = judge_once(context, response_a, response_b, persona, axis, judge);
  const auto second_raw = judge_once(context, response_b, response_a, persona, axis, judge);
  const auto second = second_raw == Verdict::A ? Verdict::B : Verdict::A;
  MatchResult m;
  m.axis = axis;
  m.order_swapped_verdicts = {first, second};
  m.verdict = first == second ? first : Verdict::Inconsistent;
  return m;
}

void WinRate::add(Verdict v) {
  ++matches;
  switch (v) {
    case Verdict::A: ++wins; half_wins += 2; break;
    case Verdict::B: ++losses; break;
    case Verdict::Inconsistent: ++inconsistent; half_wins += 1; break;
  }
}

double WinRate::percent() const {
  return matches == 0 ? 0.0 : 50.0 * static_cast<double>(half_wins) / static_cast<double>(matches);
}

WinRate WinRate::swapped() const {
  WinRate w = *this;
  std::swap(w.wins, w.losses);
  w.half_wins = 2 * matches - half_wins;
  return w;
}

void to_json(json& j, const MatchResult& m) {
  j = json{{"user_id", m.user_id},
           {"conv_id", m.conv_id},
           {"turn_index", m.turn_index},
           {"turn_kind", m.initial_turn ? "initial" : "followup"},
           {"axis", to_string(m.axis)},
           {"verdict", to_string(m.verdict)},
           {"order_swapped_verdicts", {to_string(m.order_swapped_verdicts.first),
                                       to_string(m.order_swapped_verdicts.second)}}};
}

ResponseSet read_responses(const std::string& path) {
  ResponseSet out;
  auto result = read_jsonl(path, [&](const json& j, std::size_t line) {
    auto key = std::make_pair(j.at("conv_id").get<std::string>(), j.at("turn_index").get<int>());
    if (!out.emplace(key, j.at("response").get<std::string>()).second) {
      throw Error(ErrorCode::MisalignedResponses,
                  path + ":" + std::to_string(line) + ": duplicate response for " + key.first);
    }
  });
  if (!result.errors.empty()) throw_bad_line(path, result.errors.front());
  return out;
}

void write_responses(const std::string& path, const ResponseSet& responses) {
  std::vector<json> rows;
  for (const auto& [key, text] : responses) {
    rows.push_back({{"conv_id", key.first}, {"turn_index", key.second}, {"response", text}});
  }
  write_jsonl(path, rows);
}

namespace {

json rate_json(const WinRate& w) {
  return json{{"win_rate", w.percent()}, {"wins", w.wins},       {"losses", w.losses},
              {"inconsistent", w.inconsistent}, {"matches", w.matches}};
}

}  // namespace

std::vector<json> EvalReport::to_records() const {
  std::vector<json> out;
  for (const auto& m : matches) {
    json j = m;
    j["type"] = "match";
    out.push_back(std::move(j));
  }
  json axes = json::object();
  for (const auto& [axis, r] : table) {
    axes[std::string(to_string(axis))] = {
        {"overall", rate_json(r.overall)}, {"initial", rate_json(r.initial)}, {"followup", rate_json(r.followup)}};
  }
  out.push_back({{"type", "aggregate"}, {"axes", axes}, {"notes", notes}});
  return out;
}

std::map<JudgeAxis, AxisRates> aggregate(const std::vector<MatchResult>& matches) {
  std::map<JudgeAxis, AxisRates> table;
  for (const auto& m : matches) {
    auto& r = table[m.axis];
    r.overall.add(m.verdict);
    (m.initial_turn ? r.initial : r.followup).add(m.verdict);
  }
  return table;
}

namespace {

struct TurnRef {
  const Conversation* conv;
  std::size_t position;  // into conv->turns
  bool initial;
};

std::vector<TurnRef> user_turn_refs(const std::vector<Conversation>& heldout) {
  std::vector<TurnRef> refs;
  for (const auto& c : heldout) {
    bool first = true;
    for (std::size_t i = 0; i < c.turns.size(); ++i) {
      if (c.turns[i].role != Role::User) continue;
      refs.push_back({&c, i, first});
      first = false;
    }
  }
  return refs;
}

std::vector<Turn> context_upto(const TurnRef& r) {
  return {r.conv->turns.begin(), r.conv->turns.begin() + static_cast<std::ptrdiff_t>(r.position) + 1};
}

}  // namespace

EvalReport run_usereval(const std::vector<Conversation>& heldout, const std::map<std::string, Persona>& personas,
                        const ResponseSet& responses_a, const ResponseSet& responses_b, ChatClient& judge,
                        const std::vector<JudgeAxis>& axes, std::size_t workers) {
  const auto refs = user_turn_refs(heldout);
  std::set<std::pair<std::string, int>> expected;
  for (const auto& r : refs) expected.emplace(r.conv->conv_id, r.conv->turns[r.position].index);
  for (const auto* side : {&responses_a, &responses_b}) {
    const char* name = side == &responses_a ? "A" : "B";
    for (const auto& key : expected) {
      if (!side->count(key)) {
        throw Error(ErrorCode::MisalignedResponses, std::string("side ") + name + " has no response for " +
                                                        key.first + " turn " + std::to_string(key.second));
      }
    }
    for (const auto& [key, _] : *side) {
      if (!expected.count(key)) {
        throw Error(ErrorCode::MisalignedResponses, std::string("side ") + name + " has an extra response for " +
                                                        key.first + " turn " + std::to_string(key.second));
      }
    }
  }

  EvalReport report;
  std::set<std::string> skipped_users;
  struct Job {
    const TurnRef* ref;
    JudgeAxis axis;
    const Persona* persona;
  };
  std::vector<Job> jobs;
  for (const auto& r : refs) {
    auto it = personas.find(r.conv->user_id);
    const Persona* persona = it == personas.end() ? nullptr : &it->second;
    for (auto axis : axes) {
      if (axis_uses_persona(axis) && !persona) {
        skipped_users.insert(r.conv->user_id);
        continue;
      }
      jobs.push_back({&r, axis, persona});
    }
  }
  for (const auto& u : skipped_users) {
    report.notes.push_back("persona axes skipped for user " + u + " (no reference history)");
    log::warn("eval", u, "no persona; persona axes skipped");
  }

  report.matches = parallel_map(
      jobs.size(),
      [&](std::size_t i) {
        const auto& job = jobs[i];
        const auto& r = *job.ref;
        const auto key = std::make_pair(r.conv->conv_id, r.conv->turns[r.position].index);
        auto m = judge_debiased(context_upto(r), responses_a.at(key), responses_b.at(key), job.persona, job.axis,
                                judge);
        m.user_id = r.conv->user_id;
        m.conv_id = key.first;
        m.turn_index = key.second;
        m.initial_turn = r.initial;
        return m;
      },
      workers);
  std::stable_sort(report.matches.begin(), report.matches.end(), [](const MatchResult& a, const MatchResult& b) {
    return std::tie(a.user_id, a.conv_id, a.turn_index, a.axis) < std::tie(b.user_id, b.conv_id, b.turn_index, b.axis);
  });
  report.table = aggregate(report.matches);
  return report;
}

std::vector<Conversation> answered_prefixes(std::vector<Conversation> heldout) {
  std::vector<Conversation> out;
  for (auto& cv : heldout) {
    std::size_t keep = 0;
    for (; keep < cv.turns.size(); ++keep) {
      const bool answered = keep + 1 < cv.turns.size() && cv.turns[keep + 1].role == Role::Assistant;
      if (cv.turns[keep].role == Role::User && !answered) break;
    }
    cv.turns.resize(keep);
    if (!cv.turns.empty()) out.push_back(std::move(cv));
  }
  return out;
}

ResponseSet reference_responses(const std::vector<Conversation>& heldout) {
  ResponseSet out;
  for (const auto& r : user_turn_refs(heldout)) {
    const auto& turns = r.conv->turns;
    if (r.position + 1 < turns.size() && turns[r.position + 1].role == Role::Assistant) {
      out[{r.conv->conv_id, turns[r.position].index}] = turns[r.position + 1].text;
    }
  }
  return out;
}

ResponseSet generate_responses(const std::vector<Conversation>& heldout,
                               const std::map<std::string, Persona>& personas, ChatClient& client,
                               GenParams params, bool persona_guided, std::size_t workers) {
  const auto refs = user_turn_refs(heldout);
  params.n = 1;
  auto texts = parallel_map(
      refs.size(),
      [&](std::size_t i) {
        auto req = ChatRequest::from_turns(context_upto(refs[i]), params);
        if (persona_guided) {
          if (auto it = personas.find(refs[i].conv->user_id); it != personas.end()) {
            req.system = persona_system_prompt(it->second);
          }
        }
        return chat_generate(client, req).front();
      },
      workers);
  ResponseSet out;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    out[{refs[i].conv->conv_id, refs[i].conv->turns[refs[i].position].index}] = texts[i];
  }
  return out;
}

}  // namespace rlhi
