#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "rlhi/error.hpp"
#include "rlhi/mock.hpp"
#include "rlhi/pairgen_reward.hpp"
#include "rlhi/pairgen_rewrite.hpp"
#include "rlhi/prompts.hpp"
#include "test_support.hpp"

using namespace rlhi;
using rlhi::testing::conv;
using rlhi::testing::turns;

namespace {

LabeledConversation labels(const std::string& id, std::vector<std::pair<int, TurnLabel>> ls) {
  LabeledConversation out{id, {}};
  for (auto [i, l] : ls) out.labels.push_back({i, l});
  return out;
}

const Conversation kIdeas = conv("ideas", "u1",
                                 {"Give me 20 party themes", "1. Pirates 2. Space ...",
                                  "Give me 20 more and make them creative", "1. Underwater city ...",
                                  "Now add numbers and statistics on cost", "Costs: ..."});

RewriteSite site_for(const Conversation& c, int feedback_index) {
  for (auto& s : find_rewrite_sites(labels(c.conv_id, {{feedback_index, TurnLabel::ReattemptWithFeedback}}), c)) {
    if (s.feedback_index == feedback_index) return s;
  }
  throw std::runtime_error("no site");
}

MockScorer context_scorer(double chosen_if_long, double otherwise) {
  return MockScorer("ctx", [=](const std::vector<Turn>&, const Persona*, std::string_view r) {
    return r.size() > 30 ? chosen_if_long : otherwise;
  });
}

}  // namespace

TEST(FindRewriteSites, OneFeedbackTurn) {
  auto sites = find_rewrite_sites(
      labels("ideas", {{0, TurnLabel::InitialRequest}, {2, TurnLabel::ReattemptWithFeedback}, {4, TurnLabel::NewRequest}}),
      kIdeas);
  ASSERT_EQ(sites.size(), 1u);
  EXPECT_EQ(sites[0].original, "1. Pirates 2. Space ...");
  EXPECT_EQ(sites[0].feedback, "Give me 20 more and make them creative");
  EXPECT_EQ(sites[0].context.size(), 2u);
  EXPECT_EQ(site_id(sites[0]), "ideas#2");
}

TEST(FindRewriteSites, NoFeedbackAndTwoFeedbacks) {
  EXPECT_TRUE(find_rewrite_sites(labels("ideas", {{0, TurnLabel::InitialRequest}, {2, TurnLabel::NewRequest}}), kIdeas)
                  .empty());
  auto sites = find_rewrite_sites(labels("ideas", {{0, TurnLabel::InitialRequest},
                                                   {2, TurnLabel::ReattemptWithFeedback},
                                                   {4, TurnLabel::ReattemptWithFeedback}}),
                                  kIdeas);
  ASSERT_EQ(sites.size(), 2u);
  EXPECT_EQ(sites[0].feedback_index, 2);
  EXPECT_EQ(sites[1].feedback_index, 4);
  // Chained feedback: the second original is the reply to the first feedback.
  EXPECT_EQ(sites[1].original, "1. Underwater city ...");
}

TEST(StripRewriteFraming, Variants) {
  EXPECT_EQ(strip_rewrite_framing("Revised response:\nlist with 20 creative themes"), "list with 20 creative themes");
  EXPECT_EQ(strip_rewrite_framing("Here is the revised version:\n\nBody"), "Body");
  EXPECT_EQ(strip_rewrite_framing("Revised response: inline body"), "inline body");
  EXPECT_EQ(strip_rewrite_framing("Plain body\nRevised response: stays"), "Plain body\nRevised response: stays");
  EXPECT_EQ(strip_rewrite_framing("Revised response:"), "");
}

TEST(GenerateRewrite, ScriptedAndFramingStripped) {
  ScriptedModel m(0);
  m.add_rule({PromptKind::Rewrite, "", {"Revised response:\nlist with 20 creative themes..."}});
  auto s = site_for(kIdeas, 2);
  EXPECT_EQ(generate_rewrite(s, m), "list with 20 creative themes...");
}

TEST(GenerateRewrite, PromptAppendedToContext) {
  struct Capture final : ChatClient {
    ChatRequest last;
    std::vector<std::string> generate(const ChatRequest& r) override {
      last = r;
      return {"ok"};
    }
    std::string id() const override { return "capture"; }
  } cap;
  auto s = site_for(kIdeas, 2);
  generate_rewrite(s, cap);
  ASSERT_EQ(cap.last.messages.size(), 3u);
  EXPECT_EQ(cap.last.messages[1].text, s.original);
  EXPECT_EQ(cap.last.messages[2].text, prompts::rewrite(s.feedback));
  EXPECT_DOUBLE_EQ(cap.last.params.temperature, 0.6);
  EXPECT_DOUBLE_EQ(cap.last.params.top_p, 0.9);
  EXPECT_FALSE(cap.last.system.has_value());
}

TEST(GenerateRewrite, EmptyRewrite) {
  ScriptedModel m(0);
  m.add_rule({PromptKind::Rewrite, "", {"Revised response:\n   "}});
  try {
    generate_rewrite(site_for(kIdeas, 2), m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyRewrite);
  }
}

TEST(BuildRewritePair, RewardsAndContextBoundary) {
  auto s = site_for(kIdeas, 4);
  auto scorer = context_scorer(0.4, -0.2);
  Persona p{"u1", {"Values numbers, statistics, and concrete evidence"}, {}, 0};
  auto pair = build_rewrite_pair(s, "Costs with supporting statistics: 40% on venue", p, scorer);
  EXPECT_EQ(pair.chosen_reward, 0.4);
  EXPECT_EQ(pair.rejected_reward, -0.2);
  EXPECT_EQ(pair.rejected, "1. Underwater city ...");
  EXPECT_EQ(pair.provenance, Provenance::Rewrite);
  ASSERT_TRUE(pair.persona);
  ASSERT_EQ(pair.context.size(), 3u);
  EXPECT_EQ(pair.context.back().text, "Give me 20 more and make them creative");
  for (const auto& t : pair.context) EXPECT_EQ(t.text.find("numbers and statistics"), std::string::npos);
  EXPECT_TRUE(validate_pair(pair).empty());
}

TEST(BuildRewritePair, WorseRewriteStillBuilt) {
  auto scorer = context_scorer(-0.5, 0.1);
  auto pair = build_rewrite_pair(site_for(kIdeas, 2), "a much longer but worse rewrite of the ideas", std::nullopt,
                                 scorer);
  EXPECT_EQ(pair.chosen_reward, -0.5);
  EXPECT_EQ(pair.rejected_reward, 0.1);
  EXPECT_FALSE(pair.persona.has_value());
}

TEST(BuildRewritePair, ScoringFailed) {
  MockScorer broken("broken", [](const std::vector<Turn>&, const Persona*, std::string_view) -> double {
    throw Error(ErrorCode::Transport, "down");
  });
  try {
    build_rewrite_pair(site_for(kIdeas, 2), "x", std::nullopt, broken);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ScoringFailed);
  }
}

TEST(BuildRewritePairs, NoLeakageAndOrderedProperty) {
  std::vector<Conversation> convs;
  std::vector<LabeledConversation> ls;
  std::mt19937_64 rng(8);
  std::size_t feedback_labels = 0;
  for (int c = 0; c < 12; ++c) {
    std::vector<std::string> texts;
    LabeledConversation l{"c" + std::to_string(11 - c), {}};
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) {
      texts.push_back("user message " + std::to_string(k) + " FEEDBACK-" + std::to_string(c) + "-" + std::to_string(k));
      texts.push_back("assistant reply " + std::to_string(k));
      const auto label = k == 0 ? TurnLabel::InitialRequest : kAllTurnLabels[1 + rng() % 4];
      feedback_labels += label == TurnLabel::ReattemptWithFeedback;
      l.labels.push_back({2 * k, label});
    }
    convs.push_back(conv(l.conv_id, "u" + std::to_string(c % 3), texts));
    ls.push_back(l);
  }
  std::vector<RewriteSite> sites;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    auto s = find_rewrite_sites(ls[i], convs[i]);
    sites.insert(sites.end(), s.begin(), s.end());
  }
  ScriptedModel m(2);
  auto scorer = MockScorer::length_based();
  auto result = build_rewrite_pairs(sites, {{"u0", Persona{"u0", {"Likes tables"}, {}, 0}}}, m, scorer, {},
                                    Provenance::Rewrite, 4);
  EXPECT_TRUE(result.failures.empty());
  EXPECT_LE(result.pairs.size(), feedback_labels);
  EXPECT_EQ(result.pairs.size(), sites.size());
  for (std::size_t i = 0; i < result.pairs.size(); ++i) {
    const auto& p = result.pairs[i];
    const auto& site = *std::find_if(sites.begin(), sites.end(), [&](const RewriteSite& s) {
      return "rw:" + site_id(s) == p.pair_id;
    });
    EXPECT_EQ(p.rejected, site.original);
    for (const auto& t : p.context) EXPECT_NE(t.text, site.feedback);
    EXPECT_EQ(p.persona.has_value(), p.user_id == "u0");
    if (i) EXPECT_LT(result.pairs[i - 1].pair_id, p.pair_id);
  }
  auto again = build_rewrite_pairs(sites, {}, m, scorer, {}, Provenance::Rewrite, 1);
  ASSERT_EQ(again.pairs.size(), result.pairs.size());
  for (std::size_t i = 0; i < again.pairs.size(); ++i) EXPECT_EQ(again.pairs[i].chosen, result.pairs[i].chosen);
}

TEST(BuildRewritePairs, FailuresReportedNotFatal) {
  ScriptedModel m(0);
  m.add_rule({PromptKind::Rewrite, "creative", {"   "}});
  auto scorer = MockScorer::length_based();
  auto r = build_rewrite_pairs({site_for(kIdeas, 2), site_for(kIdeas, 4)}, {}, m, scorer);
  EXPECT_EQ(r.pairs.size(), 1u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].site_id, "ideas#2");
}

TEST(SelectPair, Examples) {
  EXPECT_EQ(select_pair(std::vector<double>{0.1, 0.9, 0.5}), (std::pair<std::size_t, std::size_t>{1, 0}));
  EXPECT_EQ(select_pair(std::vector<double>{0.7, 0.7, 0.2}), (std::pair<std::size_t, std::size_t>{0, 2}));
  try {
    select_pair(std::vector<double>{0.3, 0.3, 0.3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllScoresEqual);
  }
  try {
    select_pair(std::vector<double>{0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllScoresEqual);
  }
  try {
    select_pair(std::vector<double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(SelectPair, PermutationKeepsSelectedScores) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> s(2 + rng() % 8);
    for (auto& x : s) x = static_cast<double>(rng() % 5);
    if (*std::max_element(s.begin(), s.end()) == *std::min_element(s.begin(), s.end())) continue;
    auto [hi, lo] = select_pair(s);
    EXPECT_NE(hi, lo);
    auto t = s;
    std::shuffle(t.begin(), t.end(), rng);
    auto [hi2, lo2] = select_pair(t);
    EXPECT_EQ(t[hi2], s[hi]);
    EXPECT_EQ(t[lo2], s[lo]);
  }
}

TEST(SampleCandidates, DistinctAndDegenerate) {
  ScriptedModel m(1);
  auto c = sample_candidates(turns({"Plan a trip"}), std::nullopt, 4, m);
  EXPECT_EQ(c.size(), 4u);
  EXPECT_EQ(std::set<std::string>(c.begin(), c.end()).size(), 4u);
  EXPECT_EQ(c, sample_candidates(turns({"Plan a trip"}), std::nullopt, 4, m));

  ScriptedModel same(1);
  same.add_rule({PromptKind::Chat, "", {"identical"}});
  try {
    sample_candidates(turns({"x"}), std::nullopt, 4, same);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateCandidates);
  }
  EXPECT_THROW(sample_candidates(turns({"x"}), std::nullopt, 1, m), Error);
  EXPECT_THROW(sample_candidates(turns({"x", "y"}), std::nullopt, 2, m), Error);
}

TEST(SampleCandidates, PersonaGuidedSystemPrompt) {
  struct Capture final : ChatClient {
    ChatRequest last;
    std::vector<std::string> generate(const ChatRequest& r) override {
      last = r;
      std::vector<std::string> out;
      for (int i = 0; i < r.params.n; ++i) out.push_back("c" + std::to_string(i));
      return out;
    }
    std::string id() const override { return "capture"; }
  } cap;
  Persona p{"u", {"Likes tables"}, {}, 0};
  sample_candidates(turns({"x"}), p, 3, cap);
  EXPECT_EQ(cap.last.system, prompts::persona_system(p));
  EXPECT_EQ(cap.last.params.n, 3);
}

namespace {

std::vector<RewardPrompt> ten_prompts() {
  std::vector<RewardPrompt> out;
  for (int i = 0; i < 10; ++i) {
    out.push_back({"p" + std::to_string(i), "u" + std::to_string(i % 2), turns({"Question number " + std::to_string(i)})});
  }
  return out;
}

std::map<std::string, Persona> two_personas() {
  return {{"u0", Persona{"u0", {"Prefers information organized in tables"}, {}, 0}},
          {"u1", Persona{"u1", {"Expects working code snippets"}, {}, 0}}};
}

}  // namespace

TEST(BuildRewardPairs, TenPromptsTenPairs) {
  ScriptedModel m(3);
  auto scorer = MockScorer::length_based();
  auto r = build_reward_pairs(ten_prompts(), two_personas(), 4, m, scorer, {}, 4);
  EXPECT_TRUE(r.skips.empty());
  ASSERT_EQ(r.pairs.size(), 10u);
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    const auto& p = r.pairs[i];
    EXPECT_EQ(p.pair_id, "rr:p" + std::to_string(i));
    EXPECT_GE(*p.chosen_reward, *p.rejected_reward);
    EXPECT_EQ(p.provenance, Provenance::RewardRanked);
    EXPECT_EQ(p.persona->user_id, p.user_id);
    EXPECT_DOUBLE_EQ(*p.chosen_reward, scorer.score({}, nullptr, p.chosen).value);
  }
  ScriptedModel m2(3);
  auto again = build_reward_pairs(ten_prompts(), two_personas(), 4, m2, scorer, {}, 1);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(again.pairs[i], r.pairs[i]);
}

TEST(BuildRewardPairs, OneAllEqualPromptSkipped) {
  ScriptedModel m(3);
  MockScorer scorer("flat-on-p4", [](const std::vector<Turn>& ctx, const Persona*, std::string_view r) {
    if (ctx.back().text == "Question number 4") return 0.0;
    return static_cast<double>(r.size());
  });
  auto r = build_reward_pairs(ten_prompts(), two_personas(), 4, m, scorer);
  EXPECT_EQ(r.pairs.size(), 9u);
  ASSERT_EQ(r.skips.size(), 1u);
  EXPECT_EQ(r.skips[0].prompt_id, "p4");
  EXPECT_NE(r.skips[0].reason.find("AllScoresEqual"), std::string::npos);
}

TEST(BuildRewardPairs, MissingPersonaSkippedSystemicErrorAborts) {
  ScriptedModel m(3);
  auto scorer = MockScorer::length_based();
  auto r = build_reward_pairs(ten_prompts(), {{"u0", two_personas().at("u0")}}, 4, m, scorer);
  EXPECT_EQ(r.pairs.size(), 5u);
  EXPECT_EQ(r.skips.size(), 5u);

  struct Down final : ChatClient {
    std::vector<std::string> generate(const ChatRequest&) override { throw Error(ErrorCode::Transport, "down"); }
    std::string id() const override { return "down"; }
  } down;
  EXPECT_THROW(build_reward_pairs(ten_prompts(), two_personas(), 4, down, scorer), Error);
}

TEST(BuildRewardPair, PersonaSwapChangesChosen) {
  ScriptedModel m(0);
  m.add_rule({PromptKind::Chat, "", {"plain answer", "answer with a summary table", "answer with a code snippet",
                                     "another plain answer"}});
  auto scorer = MockScorer::persona_keyword();
  RewardPrompt prompt{"p", "u", turns({"Explain caching"})};
  Persona tables{"u", {"Prefers information organized in tables"}, {}, 0};
  Persona code{"u", {"Expects working code snippets"}, {}, 0};
  auto a = build_reward_pair(prompt, tables, 4, m, scorer);
  auto b = build_reward_pair(prompt, code, 4, m, scorer);
  EXPECT_EQ(a.chosen, "answer with a summary table");
  EXPECT_EQ(b.chosen, "answer with a code snippet");
  EXPECT_EQ(a.rejected, "plain answer");
  Persona other{"someone-else", {"x"}, {}, 0};
  EXPECT_THROW(build_reward_pair(prompt, other, 4, m, scorer), Error);
}

TEST(RewardPrompt, JsonDefaultsIndices) {
  auto p = json::parse(R"({"prompt_id":"p","user_id":"u","context":[{"role":"user","text":"hi"}]})").get<RewardPrompt>();
  EXPECT_EQ(p.context.at(0).index, 0);
  EXPECT_EQ(json(p).get<RewardPrompt>(), p);
}
