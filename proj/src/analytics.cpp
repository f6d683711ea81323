#include "rlhi/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rlhi/error.hpp"
#include "rlhi/hash.hpp"
#include "rlhi/parallel.hpp"
#include "rlhi/random.hpp"

namespace rlhi {

namespace {

// Neumaier compensated accumulator.
struct Sum {
  double s = 0.0;
  double c = 0.0;

  void add(double x) {
    const double t = s + x;
    c += std::fabs(s) >= std::fabs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

}  // namespace

void to_json(json& j, const DiversityReport& r) {
  j = json{{"name", r.name},
           {"sample_size", r.sample_size},
           {"mean_pairwise_cosine_distance", r.mean_pairwise_cosine_distance},
           {"pair_count", r.pair_count}};
}

DiversityReport pairwise_diversity(const std::vector<std::vector<double>>& embeddings, std::size_t workers) {
  const std::size_t n = embeddings.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "diversity needs at least 2 vectors");
  const std::size_t dim = embeddings.front().size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings[i].size() != dim) throw Error(ErrorCode::InvalidArgument, "vectors differ in dimension");
    double s = 0.0;
    for (double x : embeddings[i]) s += x * x;
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 0.0)) throw Error(ErrorCode::DegenerateVector, "vector " + std::to_string(i) + " has zero norm");
  }
  // Row i holds pairs (i, j > i); rows are reduced in order.
  auto rows = parallel_map(
      n - 1,
      [&](std::size_t i) {
        Sum row;
        for (std::size_t j = i + 1; j < n; ++j) {
          double d = 0.0;
          for (std::size_t k = 0; k < dim; ++k) d += embeddings[i][k] * embeddings[j][k];
          row.add(1.0 - d / (norms[i] * norms[j]));
        }
        return row;
      },
      workers);
  Sum total;
  for (const auto& r : rows) {
    total.add(r.s);
    total.add(r.c);
  }
  DiversityReport rep;
  rep.sample_size = n;
  rep.pair_count = n * (n - 1) / 2;
  rep.mean_pairwise_cosine_distance = total.value() / static_cast<double>(rep.pair_count);
  return rep;
}

std::string diversity_context(const Conversation& conv) {
  std::size_t last_user = conv.turns.size();
  for (std::size_t i = conv.turns.size(); i-- > 0;) {
    if (conv.turns[i].role == Role::User) {
      last_user = i;
      break;
    }
  }
  std::string out;
  for (std::size_t i = 0; i <= last_user && i < conv.turns.size(); ++i) {
    if (i) out += "\n\n";
    out += conv.turns[i].text;
  }
  return out;
}

std::vector<DiversityReport> diversity_compare(const std::vector<NamedCorpus>& corpora, std::size_t sample_k,
                                               std::uint64_t seed, Embedder& embedder, std::size_t workers) {
  std::vector<DiversityReport> out;
  for (const auto& [name, contexts] : corpora) {
    if (contexts.size() < 2) throw Error(ErrorCode::InvalidArgument, "corpus " + name + " has fewer than 2 contexts");
    std::vector<std::size_t> idx(contexts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::size_t k = std::min(sample_k, contexts.size());
    std::mt19937_64 rng(derive_seed(seed, name));
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_below(rng, idx.size() - i)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    auto vectors = parallel_map(
        k, [&](std::size_t i) { return embed(embedder, contexts[idx[i]]); }, workers);
    auto rep = pairwise_diversity(vectors, workers);
    rep.name = name;
    out.push_back(std::move(rep));
  }
  return out;
}

TurnCountStats turn_count_stats(const std::vector<Conversation>& convs) {
  TurnCountStats s;
  s.conversations = convs.size();
  std::size_t turns = 0, user_turns = 0;
  for (const auto& c : convs) {
    turns += c.turns.size();
    const auto u = static_cast<std::size_t>(
        std::count_if(c.turns.begin(), c.turns.end(), [](const Turn& t) { return t.role == Role::User; }));
    user_turns += u;
    ++s.user_turn_histogram[u];
  }
  if (!convs.empty()) {
    s.mean_turns = static_cast<double>(turns) / static_cast<double>(convs.size());
    s.mean_user_turns = static_cast<double>(user_turns) / static_cast<double>(convs.size());
  }
  return s;
}

std::string render_report(const StatsBundle& b) {
  if (!b.messages && !b.dimensions && !b.diversity && !b.turns) {
    throw Error(ErrorCode::EmptyInput, "report needs at least one statistic");
  }
  std::string out = "# Corpus report\n";
  if (b.messages) {
    const auto& m = *b.messages;
    out += "\n## Message distribution\n\n";
    out += "Conversations: " + std::to_string(m.conversations) + ", user messages: " + std::to_string(m.user_turns) +
           "\n\n| label | count | percent | reference |\n|---|---:|---:|---:|\n";
    std::size_t i = 0;
    for (auto l : kAllTurnLabels) {
      out += "| " + std::string(to_string(l)) + " | " + std::to_string(m.counts.at(l)) + " | " +
             fmt(m.percent.at(l), 2) + " | " + fmt(kReferenceLabelPercent[i++], 2) + " |\n";
    }
    if (m.mean_chars_initial) out += "\nMean characters, initial requests: " + fmt(*m.mean_chars_initial, 1) + "\n";
    if (m.mean_chars_feedback) {
      out += "Mean characters, re-attempts with feedback: " + fmt(*m.mean_chars_feedback, 1) + "\n";
    }
  }
  if (b.dimensions) {
    out += "\n## Persona dimensions\n\n| dimension | preference 1 | preference 2 | none | users |\n"
           "|---|---:|---:|---:|---:|\n";
    for (const auto& row : *b.dimensions) {
      const auto users = row.counts[0] + row.counts[1] + row.counts[2];
      out += "| " + std::string(prompts::dimension_spec(row.dimension).name) + " | " + fmt(row.percent[0], 1) +
             " | " + fmt(row.percent[1], 1) + " | " + fmt(row.percent[2], 1) + " | " + std::to_string(users) + " |\n";
    }
  }
  if (b.diversity) {
    out += "\n## Context diversity\n\n| corpus | sample | pairs | mean cosine distance |\n|---|---:|---:|---:|\n";
    for (const auto& r : *b.diversity) {
      out += "| " + r.name + " | " + std::to_string(r.sample_size) + " | " + std::to_string(r.pair_count) + " | " +
             fmt(r.mean_pairwise_cosine_distance, 6) + " |\n";
    }
  }
  if (b.turns) {
    const auto& t = *b.turns;
    out += "\n## Turn counts\n\nConversations: " + std::to_string(t.conversations) +
           ", mean messages: " + fmt(t.mean_turns, 2) + ", mean user messages: " + fmt(t.mean_user_turns, 2) +
           "\n\n| user messages | conversations |\n|---:|---:|\n";
    for (const auto& [k, v] : t.user_turn_histogram) {
      out += "| " + std::to_string(k) + " | " + std::to_string(v) + " |\n";
    }
  }
  return out;
}

json stats_json(const StatsBundle& bundle) {
  json j = json::object();
  if (bundle.messages) j["messages"] = bundle.messages->to_json();
  if (bundle.dimensions) {
    json rows = json::array();
    for (const auto& r : *bundle.dimensions) {
      rows.push_back({{"dimension", prompts::dimension_spec(r.dimension).name},
                      {"counts", r.counts},
                      {"percent", r.percent}});
    }
    j["dimensions"] = rows;
  }
  if (bundle.diversity) j["diversity"] = *bundle.diversity;
  if (bundle.turns) {
    json hist = json::object();
    for (const auto& [k, v] : bundle.turns->user_turn_histogram) hist[std::to_string(k)] = v;
    j["turns"] = {{"conversations", bundle.turns->conversations},
                  {"mean_turns", bundle.turns->mean_turns},
                  {"mean_user_turns", bundle.turns->mean_user_turns},
                  {"user_turn_histogram", hist}};
  }
  return j;
}

}  // namespace rlhi
