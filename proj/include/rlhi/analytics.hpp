#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rlhi/model_io.hpp"
#include "rlhi/persona.hpp"
#include "rlhi/turn_classify.hpp"

namespace rlhi {

struct DiversityReport {
  std::string name;
  std::size_t sample_size = 0;
  double mean_pairwise_cosine_distance = 0.0;
  std::size_t pair_count = 0;
};

void to_json(json& j, const DiversityReport& r);

/// Mean of (1 - cosine similarity) over all unordered pairs, with compensated summation.
/// Throws InvalidArgument for n < 2 or ragged input, DegenerateVector for a zero vector.
DiversityReport pairwise_diversity(const std::vector<std::vector<double>>& embeddings, std::size_t workers = 8);

/// Every turn before the final user turn, then that turn, joined by blank lines.
std::string diversity_context(const Conversation& conv);

using NamedCorpus = std::pair<std::string, std::vector<std::string>>;

/// Per corpus: sample min(k, n) contexts (seeded, kept in corpus order), embed, report.
std::vector<DiversityReport> diversity_compare(const std::vector<NamedCorpus>& corpora, std::size_t sample_k,
                                               std::uint64_t seed, Embedder& embedder, std::size_t workers = 8);

/// Published mean distances; documentation constants only.
inline const std::vector<std::pair<std::string, double>> kReferenceDiversity = {
    {"WildChat", 0.865}, {"HH-RLHF", 0.751}, {"HelpSteer2", 0.848}};

struct TurnCountStats {
  std::size_t conversations = 0;
  double mean_turns = 0.0;        // messages per conversation
  double mean_user_turns = 0.0;
  std::map<std::size_t, std::size_t> user_turn_histogram;
};

TurnCountStats turn_count_stats(const std::vector<Conversation>& convs);

struct StatsBundle {
  std::optional<MessageStats> messages;
  std::optional<std::vector<DimensionRow>> dimensions;
  std::optional<std::vector<DiversityReport>> diversity;
  std::optional<TurnCountStats> turns;
};

/// Markdown report with one section per statistic present. Throws EmptyInput when none is.
std::string render_report(const StatsBundle& bundle);

/// Machine-readable counterpart of render_report; absent statistics are omitted.
json stats_json(const StatsBundle& bundle);

}  // namespace rlhi
