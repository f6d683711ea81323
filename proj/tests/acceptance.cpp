// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "rlhi/analytics.hpp"
#include "rlhi/dpo.hpp"
#include "rlhi/error.hpp"
#include "rlhi/ingest.hpp"
#include "rlhi/log.hpp"
#include "rlhi/math_synth.hpp"
#include "rlhi/mock.hpp"
#include "rlhi/pairgen_reward.hpp"
#include "rlhi/pipeline.hpp"
#include "rlhi/prompts.hpp"
#include "rlhi/quality_filter.hpp"
#include "rlhi/serialize.hpp"
#include "rlhi/usereval.hpp"

namespace fs = std::filesystem;
using namespace rlhi;

namespace {

const fs::path kSource = RLHI_SOURCE_DIR;

std::string data_file(const std::string& name) { return (kSource / "data" / name).string(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failed check; later checks only add to the count.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && first_failure_.empty()) first_failure_ = what;
    if (!ok) ++failures_;
  }
  Outcome outcome(const std::string& summary) const {
    if (failures_ == 0) return {true, summary + "; " + std::to_string(checks_) + " checks"};
    return {false, std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed, first: " +
                       first_failure_};
  }

 private:
  int checks_ = 0;
  int failures_ = 0;
  std::string first_failure_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient vs central finite differences.

dpo::Vec gaussian(std::mt19937_64& rng, std::size_t m, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  dpo::Vec v(m);
  for (auto& x : v) x = n(rng);
  return v;
}

dpo::Instance random_instance(std::mt19937_64& rng, std::size_t m, std::size_t k) {
  dpo::Instance inst;
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t i = 0; i < k; ++i) inst.universe.push_back(gaussian(rng, m, scale));
  inst.chosen = rng() % k;
  do inst.rejected = rng() % k;
  while (inst.rejected == inst.chosen);
  return inst;
}

// Loss transcribed directly in long double. Differencing a double-valued loss loses
// about ulp(loss)/h to rounding, which swamps gradient components near 1e-6.
long double oracle_loss(const dpo::Vec& theta, const dpo::Vec& ref, const dpo::Batch& b) {
  auto logp = [](const dpo::Vec& t, const dpo::Instance& inst, std::size_t c) {
    std::vector<long double> s;
    long double mx = -INFINITY;
    for (const auto& f : inst.universe) {
      long double d = 0;
      for (std::size_t k = 0; k < f.size(); ++k) d += static_cast<long double>(t[k]) * f[k];
      s.push_back(d);
      mx = std::max(mx, d);
    }
    long double z = 0;
    for (auto x : s) z += std::exp(x - mx);
    return s[c] - mx - std::log(z);
  };
  long double total = 0;
  for (const auto& it : b.items) {
    const long double margin = b.beta * ((logp(theta, it, it.chosen) - logp(ref, it, it.chosen)) -
                                         (logp(theta, it, it.rejected) - logp(ref, it, it.rejected)));
    total += std::log1p(std::exp(-margin));
  }
  return total / static_cast<long double>(b.items.size());
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const double h = 1e-5;
  double worst = 0.0, worst_self = 0.0;
  Checker c;
  for (std::size_t m = 8; m <= 512; m *= 2) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed * 1000 + m);
      std::uniform_real_distribution<double> beta(0.01, 2.0);
      dpo::Batch b{{}, beta(rng)};
      for (int i = 0; i < 4; ++i) b.items.push_back(random_instance(rng, m, 2 + rng() % 5));
      const auto theta = gaussian(rng, m, 1.0), ref = gaussian(rng, m, 1.0);
      const auto g = dpo::dpo_grad(theta, ref, b);
      double case_worst = 0.0, self_err = 0.0, gmax = 0.0;
      for (std::size_t d = 0; d < m; ++d) {
        auto up = theta, down = theta;
        up[d] += h;
        down[d] -= h;
        // Per component against the oracle.
        const double fd = static_cast<double>((oracle_loss(up, ref, b) - oracle_loss(down, ref, b)) / (2 * h));
        case_worst = std::max(case_worst, std::abs(fd - g[d]) / std::max(std::abs(fd), std::abs(g[d])));
        // The library's own loss, normwise.
        const double fd_self = (dpo::dpo_loss(up, ref, b) - dpo::dpo_loss(down, ref, b)) / (2 * h);
        self_err = std::max(self_err, std::abs(fd_self - g[d]));
        gmax = std::max(gmax, std::abs(g[d]));
      }
      self_err /= gmax;
      worst = std::max(worst, case_worst);
      worst_self = std::max(worst_self, self_err);
      const auto tag = "m=" + std::to_string(m) + " seed=" + std::to_string(seed);
      c.expect(case_worst < 1e-5, tag + " componentwise rel err " + fmt(case_worst));
      c.expect(self_err < 1e-5, tag + " normwise rel err vs dpo_loss " + fmt(self_err));
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "runtime " + fmt(secs) + " s");
  return c.outcome("m=8..512 x 20 seeds, max componentwise rel err " + fmt(worst) + ", normwise vs dpo_loss " +
                   fmt(worst_self) + ", " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// 2. ln 2 at the reference and offline training on a separable fixture.

Outcome dpo_sanity() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  std::mt19937_64 rng(11);
  for (double beta : {0.01, 0.1, 0.5, 1.0, 5.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      dpo::Batch b{{}, beta};
      const std::size_t m = 4 + trial;
      for (int i = 0; i < 1 + trial; ++i) b.items.push_back(random_instance(rng, m, 2 + rng() % 4));
      const auto theta = gaussian(rng, m, 1.0);
      const double loss = dpo::dpo_loss(theta, theta, b);
      c.expect(std::abs(loss - std::log(2.0)) <= 1e-12, "loss at reference " + fmt(loss, 17));
    }
  }

  // Chosen carries feature 0; every candidate has small noise elsewhere.
  const std::size_t m = 16;
  std::uniform_real_distribution<double> noise(-0.1, 0.1);
  std::vector<dpo::Instance> fixture;
  for (int i = 0; i < 50; ++i) {
    dpo::Instance inst;
    const std::size_t k = 2 + i % 3;
    for (std::size_t j = 0; j < k; ++j) {
      dpo::Vec f(m);
      for (std::size_t d = 1; d < m; ++d) f[d] = noise(rng);
      inst.universe.push_back(f);
    }
    inst.chosen = static_cast<std::size_t>(i) % k;
    inst.rejected = (inst.chosen + 1) % k;
    inst.universe[inst.chosen][0] = 1.0;
    fixture.push_back(inst);
  }
  dpo::TrainConfig cfg;
  cfg.beta = 1.0;
  cfg.lr = 0.5;
  cfg.steps = 500;
  const auto t = dpo::train_offline(fixture, m, cfg);
  const auto reached = std::find_if(t.loss.begin(), t.loss.end(), [](double l) { return l < 0.2; });
  c.expect(reached != t.loss.end(), "loss never below 0.2 (final " + fmt(t.loss.back()) + ")");
  int correct = 0;
  for (const auto& inst : fixture) {
    const auto s = dpo::scores(t.theta, inst);
    correct += static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin()) == inst.chosen;
  }
  c.expect(correct == 50, "argmax correct on " + std::to_string(correct) + "/50");
  const double secs = seconds_since(t0);
  c.expect(secs < 30.0, "runtime " + fmt(secs) + " s");
  const auto step = reached == t.loss.end() ? -1 : static_cast<int>(reached - t.loss.begin());
  return c.outcome("loss < 0.2 at step " + std::to_string(step) + ", final " + fmt(t.loss.back()) + ", argmax " +
                   std::to_string(correct) + "/50, " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// 3. Online training against the persona-keyword scorer.

const std::vector<std::pair<std::string, std::string>> kPersonaTypes = {
    {"Prefers information organized in tables", "a summary table"},
    {"Expects working code snippets", "a code snippet"},
    {"Likes concrete examples", "a worked example"},
    {"Prefers a formal, professional tone", "a formal register"},
};

dpo::OnlinePrompt online_prompt(int i, int type) {
  dpo::OnlinePrompt p;
  p.prompt_id = "q" + std::to_string(i);
  p.context = {{Role::User, "Tell me about subject " + std::to_string(i), 0}};
  p.persona = Persona{"user" + std::to_string(type), {kPersonaTypes[type].first}, {}, 0};
  for (const auto& [bullet, marker] : kPersonaTypes) {
    p.universe.push_back("A reply on subject " + std::to_string(i) + " using " + marker);
  }
  return p;
}

Outcome online_persona() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  std::vector<dpo::OnlinePrompt> train, held;
  for (int i = 0; i < 40; ++i) train.push_back(online_prompt(i, i % 4));
  for (int i = 0; i < 20; ++i) held.push_back(online_prompt(1000 + i, (i * 3 + 1) % 4));
  dpo::ToyPolicy policy(dpo::Featurizer(256));
  auto accuracy = [&] {
    int hits = 0;
    for (const auto& p : held) {
      const auto idx = policy.argmax(dpo::text_instance(p, p.universe));
      const auto& marker = kPersonaTypes[static_cast<std::size_t>(std::stoi(p.persona->user_id.substr(4)))].second;
      hits += p.universe[idx].find(marker) != std::string::npos;
    }
    return 100.0 * hits / static_cast<double>(held.size());
  };
  const double before = accuracy();
  auto scorer = MockScorer::persona_keyword();
  dpo::TrainConfig cfg;
  cfg.beta = 1.0;
  cfg.lr = 2.0;
  cfg.steps = 100;
  cfg.seed = 5;
  const auto t = dpo::train_online(train, 4, dpo::policy_sampler(), scorer, policy, cfg);
  const double after = accuracy();
  c.expect(before <= 60.0, "initial accuracy " + fmt(before) + "%");
  c.expect(after >= 90.0, "trained accuracy " + fmt(after) + "%");
  const double secs = seconds_since(t0);
  c.expect(secs < 60.0, "runtime " + fmt(secs) + " s");
  return c.outcome("held-out top-1 " + fmt(before) + "% -> " + fmt(after) + "% after " +
                   std::to_string(t.checkpoints.back().step) + " steps (" + std::to_string(t.skipped_steps.size()) +
                   " skipped), " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// 4. Exhaustive best/worst selection.

Outcome selection_exhaustive() {
  Checker c;
  const double values[] = {0.0, 0.5, 1.0};
  int vectors = 0, degenerate = 0;
  for (std::size_t len = 1; len <= 4; ++len) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < len; ++i) total *= 3;
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<double> s(len);
      for (std::size_t i = 0, x = code; i < len; ++i, x /= 3) s[i] = values[x % 3];
      ++vectors;
      std::size_t hi = 0, lo = 0;
      for (std::size_t i = 1; i < len; ++i) {
        if (s[i] > s[hi]) hi = i;
        if (s[i] < s[lo]) lo = i;
      }
      std::string label = "[";
      for (double v : s) label += fmt(v) + " ";
      label += "]";
      if (s[hi] == s[lo]) {
        ++degenerate;
        bool threw = false;
        try {
          select_pair(s);
        } catch (const Error& e) {
          threw = e.code() == ErrorCode::AllScoresEqual;
        }
        c.expect(threw, label + " should raise AllScoresEqual");
      } else {
        const auto got = select_pair(s);
        c.expect(got == std::make_pair(hi, lo), label + " selected (" + std::to_string(got.first) + ", " +
                                                    std::to_string(got.second) + ")");
      }
    }
  }
  return c.outcome(std::to_string(vectors) + " vectors, " + std::to_string(degenerate) + " all-equal");
}

// ---------------------------------------------------------------------------
// 5. Filter thresholds and ledger counts.

PreferencePair rip_pair(std::size_t rejected_len, double chosen, double rejected, const std::string& id = "p") {
  PreferencePair p;
  p.pair_id = id;
  p.user_id = "u";
  p.context = {{Role::User, "q", 0}};
  p.chosen = "chosen " + id;
  p.rejected = std::string(rejected_len, 'x');
  p.chosen_reward = chosen;
  p.rejected_reward = rejected;
  p.provenance = Provenance::RewardRanked;
  return p;
}

Outcome rip_thresholds() {
  Checker c;
  using R = std::optional<DropReason>;
  const std::vector<std::tuple<std::string, PreferencePair, R>> cases = {
      {"len 1878 keep", rip_pair(1878, 0.0, 0.0), std::nullopt},
      {"len 1877 drop", rip_pair(1877, 0.0, 0.0), DropReason::Length},
      {"reward -1.0 keep", rip_pair(1878, -0.5, -1.0), std::nullopt},
      {"reward -1.0000001 drop", rip_pair(1878, -0.5, -1.0000001), DropReason::RewardFloor},
      {"gap 1.0 keep", rip_pair(1878, 1.0, 0.0), std::nullopt},
      {"gap 1.0000001 drop", rip_pair(1878, 1.0000001, 0.0), DropReason::Gap},
  };
  for (const auto& [name, pair, want] : cases) c.expect(rip_filter(pair) == want, name);

  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 30; ++i) pairs.push_back(rip_pair(2000 + i, 0.3, -0.2, "p" + std::to_string(i)));
  pairs[2].rejected.resize(500);          // length
  pairs[11].rejected.resize(1877);        // length, at the boundary
  pairs[7].rejected_reward = -1.5;        // floor
  pairs[19].chosen_reward = 1.0;          // gap
  pairs[19].rejected_reward = -0.5;
  pairs[25].chosen_reward.reset();        // missing rewards
  pairs[28].chosen_reward = 0.8;          // gap exactly 1.0: kept
  pairs[28].rejected_reward = -0.2;
  const auto r = filter_dataset(pairs);
  const std::map<DropReason, std::set<std::string>> want = {{DropReason::Length, {"p2", "p11"}},
                                                            {DropReason::RewardFloor, {"p7"}},
                                                            {DropReason::Gap, {"p19"}},
                                                            {DropReason::MissingRewards, {"p25"}},
                                                            {DropReason::NoImprovement, {}}};
  for (const auto& [reason, ids] : want) {
    std::set<std::string> got;
    for (const auto& [id, why] : r.ledger.dropped) {
      if (why == reason) got.insert(id);
    }
    c.expect(got == ids, "ledger ids for " + std::string(to_string(reason)));
    c.expect(r.ledger.count(reason) == ids.size(), "ledger count for " + std::string(to_string(reason)));
  }
  c.expect(r.kept.size() == 25 && r.ledger.kept == 25 && r.ledger.input == 30, "kept 25 of 30");
  return c.outcome("6 boundary pairs exact, ledger 2/1/1/1 of 30");
}

// ---------------------------------------------------------------------------
// 6. Prompt templates against the golden files.

std::string substitute(std::string text, const std::vector<std::pair<std::string, std::string>>& slots) {
  // Single left-to-right pass so substituted values are never rescanned.
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    bool replaced = false;
    for (const auto& [name, value] : slots) {
      const auto token = "{" + name + "}";
      if (text.compare(i, token.size(), token) == 0) {
        out += value;
        i += token.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) out += text[i++];
  }
  return out;
}

Outcome prompt_fidelity() {
  Checker c;
  auto golden = [](const std::string& f) { return read_text_file((kSource / "tests" / "golden" / f).string()); };
  const std::pair<const char*, std::string_view> templates[] = {
      {"classify_followup.txt", prompts::kClassifyFollowup},
      {"infer_persona.txt", prompts::kInferPersona},
      {"rewrite.txt", prompts::kRewrite},
      {"persona_system.txt", prompts::kPersonaSystem},
      {"judge_personalization.txt", prompts::kPersonalizationJudge},
      {"judge_instruction_following.txt", prompts::kInstructionFollowingJudge},
      {"judge_usereval.txt", prompts::kUserEvalJudge},
  };
  for (const auto& [file, tmpl] : templates) c.expect(golden(file) == tmpl, std::string(file) + " template differs");

  // Rendered prompts equal the golden text with only the slots replaced.
  const Persona persona{"u", {"wants short answers", "likes {braces}"}, {}, 0};
  const std::vector<Turn> ctx = {{Role::User, "How do tides work?", 0}, {Role::Assistant, "The moon.", 1},
                                 {Role::User, "More detail please", 2}};
  const auto history = prompts::render_history(ctx);
  const std::string bullets = "wants short answers\nlikes {braces}";
  c.expect(prompts::classify_followup("plan a trip", "cheaper please") ==
               substitute(golden("classify_followup.txt"),
                          {{"initial_request", "plan a trip"}, {"current_request", "cheaper please"}}),
           "classification prompt");
  c.expect(prompts::infer_persona("I like tables") ==
               substitute(golden("infer_persona.txt"), {{"user_message_history", "I like tables"}}),
           "persona prompt");
  c.expect(prompts::rewrite("too long") == substitute(golden("rewrite.txt"), {{"user_response", "too long"}}),
           "rewrite prompt");
  c.expect(persona_system_prompt(persona) == substitute(golden("persona_system.txt"), {{"user_persona", bullets}}),
           "persona-guided system prompt");
  const std::pair<JudgeAxis, const char*> judges[] = {
      {JudgeAxis::Personalization, "judge_personalization.txt"},
      {JudgeAxis::InstructionFollowing, "judge_instruction_following.txt"},
      {JudgeAxis::UserEval, "judge_usereval.txt"}};
  for (const auto& [axis, file] : judges) {
    std::vector<std::pair<std::string, std::string>> slots = {
        {"conversation_history", history}, {"response_A", "answer one"}, {"response_B", "answer two"}};
    if (axis_uses_persona(axis)) slots.emplace_back("persona", bullets);
    c.expect(judge_prompt(axis, ctx, "answer one", "answer two", &persona) == substitute(golden(file), slots),
             std::string(file) + " rendering");
  }
  return c.outcome("7 templates byte-identical, 7 renderings match");
}

// ---------------------------------------------------------------------------
// 7. Math feedback synthesis on the 50-solution fixture.

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Outcome math_fidelity() {
  Checker c;
  const auto corpus = read_records<AnnotatedSolution>(data_file("math_solutions.jsonl"));
  c.expect(corpus.size() == 50, "fixture has " + std::to_string(corpus.size()) + " solutions");
  const std::string suffix = "Please reason step by step, and put your final answer within \\boxed{}.";
  const std::string qualifier = ", though your final answer is correct.";
  int synthesized = 0, qualified = 0, clean = 0;
  for (const auto& s : corpus) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < s.steps.size(); ++i) {
      if (s.steps[i].verdict == StepVerdict::Incorrect) {
        k = i + 1;
        break;
      }
    }
    if (k == 0) {
      ++clean;
      bool threw = false;
      try {
        synthesize_conversation(s);
      } catch (const Error& e) {
        threw = e.code() == ErrorCode::NoErrorStep;
      }
      c.expect(threw, s.solution_id + " without an incorrect step should raise NoErrorStep");
      continue;
    }
    const auto conv = synthesize_conversation(s);
    ++synthesized;
    c.expect(conv.turns.size() == 3, s.solution_id + " turn count");
    c.expect(conv.turns[0].text == s.problem + " " + suffix, s.solution_id + " boxed suffix");
    c.expect(ends_with(conv.turns[0].text, suffix), s.solution_id + " suffix at end");
    const std::string base = "Step " + std::to_string(k) + " seems incomplete or has an error";
    c.expect(conv.turns[2].text.rfind(base, 0) == 0, s.solution_id + " feedback template");
    c.expect(conv.turns[2].text == (s.final_correct ? base + qualifier : base), s.solution_id + " qualifier");
    c.expect((conv.turns[2].text.find("though your final answer is correct") != std::string::npos) == s.final_correct,
             s.solution_id + " qualifier iff final answer correct");
    if (s.final_correct) ++qualified;
  }
  return c.outcome(std::to_string(synthesized) + " synthesized (" + std::to_string(qualified) + " with qualifier), " +
                   std::to_string(clean) + " clean rejected");
}

// ---------------------------------------------------------------------------
// 8. Win-rate symmetry.

class FirstPicker final : public ChatClient {
 public:
  std::vector<std::string> generate(const ChatRequest&) override { return {"[[A]]"}; }
  std::string id() const override { return "first-picker"; }
};

Outcome usereval_symmetry() {
  Checker c;
  std::vector<Conversation> heldout;
  ResponseSet a, b;
  std::map<std::string, Persona> personas;
  std::mt19937_64 rng(3);
  for (int u = 0; u < 4; ++u) {
    const auto user = "user" + std::to_string(u);
    personas[user] = Persona{user, {"prefers detailed answers"}, {}, 0};
    for (int k = 0; k < 2; ++k) {
      Conversation conv{user + "-c" + std::to_string(k), user, {}, "en", k};
      const int user_turns = 1 + static_cast<int>(rng() % 3);
      for (int t = 0; t < user_turns; ++t) {
        conv.turns.push_back({Role::User, "question " + std::to_string(t), 2 * t});
        conv.turns.push_back({Role::Assistant, "reference", 2 * t + 1});
        a[{conv.conv_id, 2 * t}] = std::string(5 + rng() % 40, 'a');
        b[{conv.conv_id, 2 * t}] = std::string(5 + rng() % 40, 'b');
      }
      heldout.push_back(conv);
    }
  }
  ScriptedModel longer(0);
  FirstPicker first;
  for (auto* judge : std::initializer_list<ChatClient*>{&longer, &first}) {
    const auto ab = run_usereval(heldout, personas, a, b, *judge);
    const auto ba = run_usereval(heldout, personas, b, a, *judge);
    for (auto axis : kAllJudgeAxes) {
      for (auto part : {&AxisRates::overall, &AxisRates::initial, &AxisRates::followup}) {
        const auto& x = ab.table.at(axis).*part;
        const auto& y = ba.table.at(axis).*part;
        if (x.matches == 0) continue;
        c.expect(x.percent() + y.percent() == 100.0,
                 judge->id() + " " + std::string(to_string(axis)) + " sums to " + fmt(x.percent() + y.percent(), 17));
        c.expect(x.percent() + x.swapped().percent() == 100.0, "swapped tally sums to 100");
      }
      if (judge == &first) {
        const auto& o = ab.table.at(axis).overall;
        c.expect(o.percent() == 50.0 && o.inconsistent == o.matches,
                 "first-picker " + std::string(to_string(axis)) + " gives " + fmt(o.percent()));
      }
    }
  }
  // Random tallies.
  for (int trial = 0; trial < 1000; ++trial) {
    WinRate w;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 50); i < n; ++i) w.add(static_cast<Verdict>(rng() % 3));
    c.expect(w.percent() + w.swapped().percent() == 100.0, "random tally " + std::to_string(trial));
  }
  return c.outcome("A-vs-B + B-vs-A = 100 exactly; order-biased judge gives 50/50");
}

// ---------------------------------------------------------------------------
// 9. Diversity metric.

Outcome diversity_oracle() {
  Checker c;
  const double r = 1.0 / std::sqrt(2.0);
  std::vector<std::vector<double>> hand = {{1, 0}, {0, 1}, {r, r}};
  const double value = pairwise_diversity(hand).mean_pairwise_cosine_distance;
  c.expect(std::abs(value - 0.528595) <= 1e-6, "hand case " + fmt(value, 10));

  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> vs(40, std::vector<double>(12));
  for (auto& v : vs) {
    for (auto& x : v) x = g(rng);
  }
  const double base = pairwise_diversity(vs).mean_pairwise_cosine_distance;
  double drift = 0.0;
  for (int s = 0; s < 100; ++s) {
    std::shuffle(vs.begin(), vs.end(), rng);
    drift = std::max(drift, std::abs(pairwise_diversity(vs).mean_pairwise_cosine_distance - base));
  }
  c.expect(drift <= 1e-12, "permutation drift " + fmt(drift));

  const std::vector<std::string> vocab = {"river", "kernel", "poem",  "tax",    "violin", "orbit",  "garden",
                                          "lemma", "sql",    "bread", "tensor", "opera",  "glacier", "novel"};
  std::vector<std::string> dup, random_texts;
  for (int i = 0; i < 60; ++i) {
    dup.push_back("write a short cover letter for a junior analyst role, version " + std::to_string(i % 2));
    std::string t;
    for (int w = 0; w < 8; ++w) t += vocab[rng() % vocab.size()] + std::to_string(rng() % 40) + " ";
    random_texts.push_back(t);
  }
  MockEmbedder embedder;
  const auto table = diversity_compare({{"duplicates", dup}, {"random", random_texts}}, 500, 1, embedder);
  c.expect(table[0].mean_pairwise_cosine_distance < table[1].mean_pairwise_cosine_distance,
           "duplicate corpus not lower");
  return c.outcome("hand case " + fmt(value, 8) + ", permutation drift " + fmt(drift) + ", duplicates " +
                   fmt(table[0].mean_pairwise_cosine_distance) + " < random " +
                   fmt(table[1].mean_pairwise_cosine_distance));
}

// ---------------------------------------------------------------------------
// 10. Two full mock runs are byte-identical.

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text_file(e.path().string());
  }
  return out;
}

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  const auto base = fs::temp_directory_path() / ("rlhi-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(base);
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"first", "second"}) {
    const auto cfg = load_config(data_file("pipeline.json"),
                                 json{{"paths", {{"output_dir", (base / name).string()}}}});
    auto clients = make_clients(cfg, true);
    const auto r = run_pipeline(cfg, {std::begin(kAllStages), std::end(kAllStages)}, clients);
    c.expect(r.exit_code == kExitOk, std::string(name) + " run failed: " + r.message);
    c.expect(r.executed.size() == std::size(kAllStages), std::string(name) + " run skipped stages");
    runs.push_back(snapshot(base / name));
  }
  // Corpus coverage of the bundled fixture.
  const auto corpus = load_corpus(data_file("mini_corpus.jsonl")).conversations;
  std::set<std::string> users;
  for (const auto& cv : corpus) users.insert(cv.user_id);
  c.expect(users.size() >= 12 && corpus.size() >= 60, "mini-corpus size");
  const auto stats = json::parse(runs[0]["classify/stats.json"]);
  for (auto l : kAllTurnLabels) {
    c.expect(stats["counts"].value(std::string(to_string(l)), 0) > 0, "label " + std::string(to_string(l)) + " unseen");
  }

  const char* key_files[] = {"pairs_rewrite/pairs.jsonl", "pairs_reward/pairs.jsonl", "synth_math/pairs.jsonl",
                             "filter/ledger.jsonl",       "filter/kept.jsonl",        "train_dpo/loss.jsonl",
                             "train_dpo/checkpoints.jsonl", "eval/report.jsonl",      "manifest.json"};
  for (const char* f : key_files) {
    c.expect(runs[0].count(f) && !runs[0][f].empty(), std::string(f) + " missing or empty");
  }
  c.expect(runs[0].size() == runs[1].size(), "different file sets");
  std::size_t bytes = 0;
  for (const auto& [name, content] : runs[0]) {
    c.expect(runs[1].count(name) && runs[1][name] == content, name + " differs between runs");
    bytes += content.size();
  }
  fs::remove_all(base);
  const double secs = seconds_since(t0);
  c.expect(secs < 300.0, "runtime " + fmt(secs) + " s");
  return c.outcome(std::to_string(runs[0].size()) + " files (" + std::to_string(bytes) + " bytes) identical, " +
                   std::to_string(users.size()) + " users / " + std::to_string(corpus.size()) +
                   " conversations, " + fmt(secs) + " s");
}

// ---------------------------------------------------------------------------
// 11. Corpus rules with one planted violation each.

Conversation make_conv(const std::string& user, int i, int turn_count = 4, const std::string& first = "") {
  Conversation c{user + "-" + std::to_string(i), user, {}, "en", i};
  for (int t = 0; t < turn_count; ++t) {
    const bool is_user = t % 2 == 0;
    std::string text = is_user ? "request " + std::to_string(t) : "reply " + std::to_string(t);
    if (t == 0 && !first.empty()) text = first;
    c.turns.push_back({is_user ? Role::User : Role::Assistant, text, t});
  }
  return c;
}

Outcome corpus_filter() {
  Checker c;
  std::vector<Conversation> convs;
  auto add_user = [&](const std::string& user, int n) {
    for (int i = 0; i < n; ++i) convs.push_back(make_conv(user, i));
  };
  add_user("clean1", 3);
  add_user("clean2", 4);
  add_user("lang", 4);
  convs.back().language = "de";                                   // lang-3
  add_user("mj", 4);
  convs.back() = make_conv("mj", 3, 4, std::string(kMidjourneyPrefix) + " of a lighthouse");  // mj-3
  add_user("long", 4);
  convs.back() = make_conv("long", 3, 12);                        // long-3: 12 turns
  add_user("few", 2);                                             // few-0, few-1
  add_user("many", 101);                                          // many-0 .. many-100
  add_user("quiet", 3);                                           // no feedback turns

  std::vector<LabeledConversation> labels;
  for (const auto& cv : convs) {
    LabeledConversation l{cv.conv_id, {}};
    for (const auto& t : cv.turns) {
      if (t.role != Role::User) continue;
      const bool feedback = t.index == 2 && cv.user_id != "quiet";
      l.labels.push_back({t.index, t.index == 0 ? TurnLabel::InitialRequest
                                                : (feedback ? TurnLabel::ReattemptWithFeedback : TurnLabel::NewRequest)});
    }
    labels.push_back(l);
  }

  CorpusFilterConfig cfg;
  cfg.require_meaningful_feedback = true;
  const auto r = filter_corpus(convs, cfg, &labels);

  std::vector<std::string> many;
  for (int i = 0; i < 101; ++i) many.push_back("many-" + std::to_string(i));
  std::sort(many.begin(), many.end());
  const std::map<DropRule, std::vector<std::string>> want = {
      {DropRule::Language, {"lang-3"}},
      {DropRule::Midjourney, {"mj-3"}},
      {DropRule::TooManyTurns, {"long-3"}},
      {DropRule::TooFewConversations, {"few-0", "few-1"}},
      {DropRule::TooManyConversations, many},
      {DropRule::NoMeaningfulFeedback, {"quiet-0", "quiet-1", "quiet-2"}},
  };
  for (auto rule : kAllDropRules) {
    const auto it = r.report.dropped.find(rule);
    const auto got = it == r.report.dropped.end() ? std::vector<std::string>{} : it->second;
    c.expect(got == want.at(rule), "rule " + std::string(to_string(rule)) + " dropped " +
                                       std::to_string(got.size()) + " conversations");
  }
  std::set<std::string> kept_users;
  for (const auto& cv : r.kept) kept_users.insert(cv.user_id);
  c.expect(kept_users == std::set<std::string>{"clean1", "clean2", "lang", "mj", "long"}, "kept users");
  c.expect(r.kept.size() == 3 + 4 + 3 + 3 + 3, "kept " + std::to_string(r.kept.size()));
  c.expect(r.kept.size() + r.report.total() == convs.size(), "every conversation accounted for");
  return c.outcome("6 rules, " + std::to_string(r.report.total()) + " drops attributed, " +
                   std::to_string(r.kept.size()) + " kept");
}

}  // namespace

int main() {
  log::set_sink(log::stderr_sink(log::Level::Error));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"DPO gradient matches central finite differences", gradient_check},
      {"DPO loss ln 2 at reference; separable offline fixture learned", dpo_sanity},
      {"Online training learns persona-matching candidates", online_persona},
      {"Best/worst selection matches brute force exhaustively", selection_exhaustive},
      {"Pair filter thresholds and ledger counts", rip_thresholds},
      {"Prompt templates match golden files", prompt_fidelity},
      {"Math feedback synthesis strings", math_fidelity},
      {"Win-rate symmetry and order-biased judge", usereval_symmetry},
      {"Embedding diversity oracle", diversity_oracle},
      {"End-to-end mock runs are byte-identical", end_to_end},
      {"Corpus filter rule attribution", corpus_filter},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1 < 10 ? " " : "") << i + 1 << ". "
              << criteria[i].first << " (" << o.detail << ")" << std::endl;
  }
  std::cout << (failed == 0 ? "all " + std::to_string(criteria.size()) + " criteria passed"
                            : std::to_string(failed) + " of " + std::to_string(criteria.size()) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
