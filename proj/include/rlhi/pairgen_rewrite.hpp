#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rlhi/model_io.hpp"
#include "rlhi/types.hpp"

namespace rlhi {

/// A re-attempt-with-feedback turn together with the assistant turn it reacts to.
struct RewriteSite {
  std::string conv_id;
  std::string user_id;
  int feedback_index = 0;      // Turn::index of the feedback turn
  std::vector<Turn> context;   // up to and including the original assistant turn
  std::string feedback;
  std::string original;
};

/// One site per ReattemptWithFeedback turn directly preceded by an assistant turn,
/// in turn order.
std::vector<RewriteSite> find_rewrite_sites(const LabeledConversation& labeled, const Conversation& conv);

/// Removes leading "Revised response:"-style framing lines.
std::string strip_rewrite_framing(std::string_view completion);

/// Asks the model to revise the original given the feedback (n = 1). Throws EmptyRewrite.
std::string generate_rewrite(const RewriteSite& site, ChatClient& client, GenParams params = {});

/// chosen = rewrite, rejected = original. The context stops at the user turn that
/// elicited the original, so the feedback itself is never part of it.
PreferencePair build_rewrite_pair(const RewriteSite& site, const std::string& rewrite,
                                  const std::optional<Persona>& persona, Scorer& scorer,
                                  Provenance provenance = Provenance::Rewrite);

struct SiteFailure {
  std::string site_id;
  std::string reason;
};

struct RewritePairsResult {
  std::vector<PreferencePair> pairs;  // ordered by (conv_id, feedback turn index)
  std::vector<SiteFailure> failures;
};

std::string site_id(const RewriteSite& site);

/// Runs the whole stage. Per-site EmptyRewrite and ScoringFailed are reported, not fatal.
RewritePairsResult build_rewrite_pairs(const std::vector<RewriteSite>& sites,
                                       const std::map<std::string, Persona>& personas, ChatClient& client,
                                       Scorer& scorer, GenParams params = {},
                                       Provenance provenance = Provenance::Rewrite, std::size_t workers = 8);

}  // namespace rlhi
