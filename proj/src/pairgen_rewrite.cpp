#include "rlhi/pairgen_rewrite.hpp"

#include <algorithm>

#include "rlhi/error.hpp"
#include "rlhi/log.hpp"
#include "rlhi/parallel.hpp"
#include "rlhi/prompts.hpp"
#include "rlhi/text.hpp"

namespace rlhi {

std::vector<RewriteSite> find_rewrite_sites(const LabeledConversation& labeled, const Conversation& conv) {
  std::vector<RewriteSite> sites;
  for (std::size_t i = 1; i < conv.turns.size(); ++i) {
    const auto& t = conv.turns[i];
    if (t.role != Role::User || labeled.label_at(t.index) != TurnLabel::ReattemptWithFeedback) continue;
    const auto& prev = conv.turns[i - 1];
    if (prev.role != Role::Assistant) continue;
    RewriteSite s;
    s.conv_id = conv.conv_id;
    s.user_id = conv.user_id;
    s.feedback_index = t.index;
    s.context.assign(conv.turns.begin(), conv.turns.begin() + static_cast<std::ptrdiff_t>(i));
    s.feedback = t.text;
    s.original = prev.text;
    sites.push_back(std::move(s));
  }
  return sites;
}

std::string strip_rewrite_framing(std::string_view completion) {
  static constexpr std::string_view kFraming[] = {"revised response", "here is the revised", "here's the revised",
                                                   "here is a revised", "here's a revised", "revised version"};
  std::string_view rest = completion;
  for (;;) {
    const auto trimmed = text::trim(rest);
    const auto eol = trimmed.find('\n');
    const auto first = trimmed.substr(0, eol);
    const bool framing = first.size() < 120 && std::any_of(std::begin(kFraming), std::end(kFraming), [&](auto f) {
                           return text::starts_with_icase(first, f);
                         });
    if (!framing) return std::string(trimmed);
    // "Revised response: text" keeps the text after the colon.
    const auto colon = first.find(':');
    if (colon != std::string_view::npos && !text::trim(first.substr(colon + 1)).empty()) {
      return std::string(text::trim(trimmed.substr(colon + 1)));
    }
    if (eol == std::string_view::npos) return {};
    rest = trimmed.substr(eol + 1);
  }
}

std::string generate_rewrite(const RewriteSite& site, ChatClient& client, GenParams params) {
  auto req = ChatRequest::from_turns(site.context, params);
  req.params.n = 1;
  req.messages.push_back({Role::User, prompts::rewrite(site.feedback)});
  auto rewrite = strip_rewrite_framing(chat_generate(client, req).front());
  if (text::trim(rewrite).empty()) throw Error(ErrorCode::EmptyRewrite, "empty rewrite at " + site_id(site));
  return rewrite;
}

std::string site_id(const RewriteSite& site) { return site.conv_id + "#" + std::to_string(site.feedback_index); }

PreferencePair build_rewrite_pair(const RewriteSite& site, const std::string& rewrite,
                                  const std::optional<Persona>& persona, Scorer& scorer, Provenance provenance) {
  if (text::trim(rewrite).empty()) throw Error(ErrorCode::EmptyRewrite, "empty rewrite at " + site_id(site));
  PreferencePair p;
  p.pair_id = "rw:" + site_id(site);
  p.user_id = site.user_id;
  p.persona = persona;
  p.context.assign(site.context.begin(), site.context.end() - 1);
  p.chosen = rewrite;
  p.rejected = site.original;
  p.provenance = provenance;
  try {
    p.chosen_reward = reward_score(scorer, p.context, persona, p.chosen).value;
    p.rejected_reward = reward_score(scorer, p.context, persona, p.rejected).value;
  } catch (const Error& e) {
    throw Error(ErrorCode::ScoringFailed, site_id(site) + ": " + e.what());
  }
  if (*p.chosen_reward < *p.rejected_reward) {
    log::info("pairs-rewrite", p.pair_id, "rewrite scored below original; left for the quality filter");
  }
  return p;
}

RewritePairsResult build_rewrite_pairs(const std::vector<RewriteSite>& sites,
                                       const std::map<std::string, Persona>& personas, ChatClient& client,
                                       Scorer& scorer, GenParams params, Provenance provenance,
                                       std::size_t workers) {
  std::vector<const RewriteSite*> order;
  for (const auto& s : sites) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const RewriteSite* a, const RewriteSite* b) {
    return std::tie(a->conv_id, a->feedback_index) < std::tie(b->conv_id, b->feedback_index);
  });

  using Outcome = std::pair<std::optional<PreferencePair>, std::string>;
  auto outcomes = parallel_map(
      order.size(),
      [&](std::size_t i) -> Outcome {
        const auto& site = *order[i];
        std::optional<Persona> persona;
        if (auto it = personas.find(site.user_id); it != personas.end()) persona = it->second;
        try {
          return {build_rewrite_pair(site, generate_rewrite(site, client, params), persona, scorer, provenance), {}};
        } catch (const Error& e) {
          if (e.code() != ErrorCode::EmptyRewrite && e.code() != ErrorCode::ScoringFailed) throw;
          return {std::nullopt, e.what()};
        }
      },
      workers);

  RewritePairsResult result;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].first) {
      result.pairs.push_back(std::move(*outcomes[i].first));
    } else {
      result.failures.push_back({site_id(*order[i]), outcomes[i].second});
      log::warn("pairs-rewrite", site_id(*order[i]), outcomes[i].second);
    }
  }
  return result;
}

}  // namespace rlhi
