#include "rlhi/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "rlhi/analytics.hpp"
#include "rlhi/error.hpp"
#include "rlhi/hash.hpp"
#include "rlhi/live.hpp"
#include "rlhi/log.hpp"
#include "rlhi/math_synth.hpp"
#include "rlhi/mock.hpp"
#include "rlhi/parallel.hpp"
#include "rlhi/pairgen_reward.hpp"
#include "rlhi/pairgen_rewrite.hpp"
#include "rlhi/turn_classify.hpp"

namespace fs = std::filesystem;

namespace rlhi {

namespace {

// Recognised keys per section; anything else is a warning.
const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> kKeys = {
      {"", {"seed", "paths", "corpus_filter", "split", "persona", "generation", "pairs_reward", "quality_filter",
            "dpo", "synth_math", "eval", "analyze", "clients", "workers"}},
      {"paths", {"corpus", "prompts", "solutions", "output_dir"}},
      {"corpus_filter", {"allowed_languages", "midjourney_prefix", "min_user_convs", "max_user_convs", "max_turns",
                         "require_meaningful_feedback"}},
      {"split", {"train_fraction", "holdout_k"}},
      {"persona", {"history_char_budget", "refresh_after_new_conversations", "dimensions"}},
      {"generation", {"temperature", "top_p", "max_tokens"}},
      {"pairs_reward", {"n"}},
      {"quality_filter", {"min_rejected_len_chars", "min_rejected_reward", "max_reward_gap",
                          "require_rewrite_improvement"}},
      {"dpo", {"mode", "beta", "lr", "steps", "seed", "batch_size", "checkpoint_every", "online_n", "featurizer_dim"}},
      {"synth_math", {"k"}},
      {"eval", {"axes"}},
      {"analyze", {"diversity_k"}},
      {"clients", {"mode", "mock_script", "cassette", "cassette_mode", "embedding_dim", "concurrency"}},
  };
  return kKeys;
}

json section(const json& j, const char* name) { return j.contains(name) ? j.at(name) : json::object(); }

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

template <typename Fn>
void guarded(std::vector<std::string>& errors, const std::string& where, Fn fn) {
  try {
    fn();
  } catch (const json::exception& e) {
    errors.push_back(where + ": " + e.what());
  } catch (const Error& e) {
    errors.push_back(where + ": " + e.detail());
  }
}

// Fills `cfg` from parsed JSON, collecting problems instead of throwing.
void parse_config(const json& j, const fs::path& base, PipelineConfig& cfg, ConfigCheck& check, bool standalone) {
  auto& errors = check.errors;
  if (!j.is_object()) {
    errors.push_back("config must be a JSON object");
    return;
  }
  for (const auto& [sec, keys] : known_keys()) {
    const json* node = sec.empty() ? &j : (j.contains(sec) ? &j.at(sec) : nullptr);
    if (!node) continue;
    if (!node->is_object()) {
      errors.push_back("'" + sec + "' must be an object");
      continue;
    }
    for (const auto& [k, _] : node->items()) {
      if (!keys.count(k)) check.warnings.push_back("unknown key '" + (sec.empty() ? k : sec + "." + k) + "'");
    }
  }
  if (!errors.empty()) return;

  if (!j.contains("seed")) {
    if (!standalone) errors.push_back("seed present");
  } else {
    guarded(errors, "seed", [&] { cfg.seed = j.at("seed").get<std::uint64_t>(); });
  }

  const auto paths = section(j, "paths");
  guarded(errors, "paths", [&] {
    cfg.corpus = resolve(base, paths.value("corpus", std::string()));
    cfg.prompts = resolve(base, paths.value("prompts", std::string()));
    cfg.solutions = resolve(base, paths.value("solutions", std::string()));
    cfg.output_dir = resolve(base, paths.value("output_dir", std::string()));
  });
  if (cfg.corpus.empty() && !standalone) errors.push_back("paths.corpus is required");
  if (cfg.output_dir.empty() && !standalone) errors.push_back("paths.output_dir is required");
  for (const auto& [name, p] : {std::pair{"corpus", cfg.corpus}, {"prompts", cfg.prompts}, {"solutions", cfg.solutions}}) {
    if (!p.empty() && !fs::exists(p)) errors.push_back(std::string("paths.") + name + " not found: " + p);
  }

  guarded(errors, "corpus_filter", [&] { cfg.corpus_filter = section(j, "corpus_filter").get<CorpusFilterConfig>(); });
  for (const auto& e : cfg.corpus_filter.validate()) errors.push_back("corpus_filter: " + e);

  const auto split = section(j, "split");
  guarded(errors, "split", [&] {
    cfg.train_fraction = split.value("train_fraction", cfg.train_fraction);
    cfg.holdout_k = split.value("holdout_k", cfg.holdout_k);
  });
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) errors.push_back("split: 0 < train_fraction < 1");
  if (cfg.holdout_k < 1) errors.push_back("split: holdout_k >= 1");

  const auto persona = section(j, "persona");
  guarded(errors, "persona", [&] {
    cfg.persona.history_char_budget = persona.value("history_char_budget", cfg.persona.history_char_budget);
    cfg.persona.refresh_after_new_conversations =
        persona.value("refresh_after_new_conversations", cfg.persona.refresh_after_new_conversations);
    cfg.persona_dimensions = persona.value("dimensions", cfg.persona_dimensions);
  });
  if (cfg.persona.history_char_budget < 1) errors.push_back("persona: history_char_budget >= 1");

  guarded(errors, "generation", [&] {
    auto g = section(j, "generation");
    g["n"] = 1;
    cfg.generation = g.get<GenParams>();
  });
  for (const auto& e : cfg.generation.validate()) errors.push_back("generation: " + e);

  guarded(errors, "pairs_reward", [&] { cfg.reward_n = section(j, "pairs_reward").value("n", cfg.reward_n); });
  if (cfg.reward_n < 2) errors.push_back("pairs_reward: n >= 2");

  guarded(errors, "quality_filter", [&] { cfg.quality_filter = section(j, "quality_filter").get<FilterConfig>(); });
  for (const auto& e : cfg.quality_filter.validate()) errors.push_back("quality_filter: " + e);

  const auto dpo = section(j, "dpo");
  guarded(errors, "dpo", [&] {
    cfg.dpo = dpo.get<dpo::TrainConfig>();
    if (!dpo.contains("seed")) cfg.dpo.seed = derive_seed(cfg.seed, "train-dpo");
    cfg.dpo_mode = dpo.value("mode", cfg.dpo_mode);
    cfg.online_n = dpo.value("online_n", cfg.online_n);
    cfg.featurizer_dim = dpo.value("featurizer_dim", cfg.featurizer_dim);
  });
  for (const auto& e : cfg.dpo.validate()) errors.push_back("dpo: " + e);
  if (cfg.dpo_mode != "offline" && cfg.dpo_mode != "online") errors.push_back("dpo: mode is offline or online");
  if (cfg.online_n < 2) errors.push_back("dpo: online_n >= 2");
  if (cfg.featurizer_dim < 1) errors.push_back("dpo: featurizer_dim >= 1");

  guarded(errors, "synth_math", [&] { cfg.math_k = section(j, "synth_math").value("k", cfg.math_k); });

  guarded(errors, "eval", [&] {
    const auto ev = section(j, "eval");
    if (ev.contains("axes")) {
      cfg.axes.clear();
      for (const auto& a : ev.at("axes")) {
        if (a.get<std::string>() == "all") {
          cfg.axes.assign(kAllJudgeAxes.begin(), kAllJudgeAxes.end());
          break;
        }
        cfg.axes.push_back(parse_judge_axis(a.get<std::string>()));
      }
    }
  });
  if (cfg.axes.empty()) errors.push_back("eval: axes non-empty");

  guarded(errors, "analyze",
          [&] { cfg.diversity_k = section(j, "analyze").value("diversity_k", cfg.diversity_k); });
  if (cfg.diversity_k < 2) errors.push_back("analyze: diversity_k >= 2");

  const auto clients = section(j, "clients");
  guarded(errors, "clients", [&] {
    cfg.clients.mode = clients.value("mode", cfg.clients.mode);
    cfg.clients.mock_script = resolve(base, clients.value("mock_script", std::string()));
    cfg.clients.cassette = resolve(base, clients.value("cassette", std::string()));
    cfg.clients.cassette_mode = clients.value("cassette_mode", cfg.clients.cassette_mode);
    cfg.clients.embedding_dim = clients.value("embedding_dim", cfg.clients.embedding_dim);
    cfg.clients.concurrency = clients.value("concurrency", cfg.clients.concurrency);
  });
  if (cfg.clients.mode != "mock" && cfg.clients.mode != "live") errors.push_back("clients: mode is mock or live");
  if (cfg.clients.cassette_mode != "record" && cfg.clients.cassette_mode != "replay") {
    errors.push_back("clients: cassette_mode is record or replay");
  }
  if (!cfg.clients.mock_script.empty() && !fs::exists(cfg.clients.mock_script)) {
    errors.push_back("clients.mock_script not found: " + cfg.clients.mock_script);
  }
  if (cfg.clients.embedding_dim < 1) errors.push_back("clients: embedding_dim >= 1");
  if (cfg.clients.concurrency < 1) errors.push_back("clients: concurrency >= 1");

  guarded(errors, "workers", [&] { cfg.workers = j.value("workers", cfg.workers); });
  if (cfg.workers < 1) errors.push_back("workers >= 1");
}

json parse_config_file(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::FileNotFound, "config " + path);
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, path + ": " + e.what());
  }
}

// Hash of the effective config. Where outputs go and how many threads produce them
// do not change their content, so both are left out.
std::string content_hash(json j) {
  if (j.contains("paths") && j["paths"].is_object()) j["paths"].erase("output_dir");
  j.erase("workers");
  if (j.contains("clients") && j["clients"].is_object()) j["clients"].erase("concurrency");
  return sha256_hex(j.dump());
}

}  // namespace

ConfigCheck check_config(const json& config, const fs::path& base_dir) {
  PipelineConfig cfg;
  ConfigCheck check;
  parse_config(config, base_dir, cfg, check, false);
  return check;
}

ConfigCheck validate_config(const std::string& path) {
  const auto j = parse_config_file(path);
  return check_config(j, fs::absolute(path).parent_path());
}

PipelineConfig load_config(const std::string& path, const json& overrides) {
  auto j = parse_config_file(path);
  if (!overrides.empty()) j.merge_patch(overrides);
  PipelineConfig cfg;
  ConfigCheck check;
  parse_config(j, fs::absolute(path).parent_path(), cfg, check, false);
  for (const auto& w : check.warnings) log::warn("config", path, w);
  if (!check.ok()) throw Error(ErrorCode::Config, check.errors.front());
  cfg.config_path = fs::absolute(path);
  cfg.config_hash = content_hash(j);
  return cfg;
}

PipelineConfig settings_config(const std::string& path, const json& overrides) {
  json j = path.empty() ? json::object() : parse_config_file(path);
  if (!overrides.empty()) j.merge_patch(overrides);
  const auto base = path.empty() ? fs::current_path() : fs::absolute(path).parent_path();
  PipelineConfig cfg;
  ConfigCheck check;
  parse_config(j, base, cfg, check, true);
  for (const auto& w : check.warnings) log::warn("config", path, w);
  if (!check.ok()) throw Error(ErrorCode::Config, check.errors.front());
  if (!path.empty()) cfg.config_path = fs::absolute(path);
  cfg.config_hash = content_hash(j);
  return cfg;
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Classify: return "classify";
    case Stage::Persona: return "persona";
    case Stage::PairsRewrite: return "pairs-rewrite";
    case Stage::PairsReward: return "pairs-reward";
    case Stage::SynthMath: return "synth-math";
    case Stage::Filter: return "filter";
    case Stage::TrainDpo: return "train-dpo";
    case Stage::Eval: return "eval";
    case Stage::Analyze: return "analyze";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (auto s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::Config, "unknown stage '" + std::string(name) + "'");
}

std::vector<Stage> stage_dependencies(Stage s, const PipelineConfig& cfg) {
  switch (s) {
    case Stage::Ingest: return {};
    case Stage::Classify: return {Stage::Ingest};
    case Stage::Persona: return {Stage::Ingest};
    case Stage::PairsRewrite: return {Stage::Ingest, Stage::Classify, Stage::Persona};
    case Stage::PairsReward: return {Stage::Persona};
    case Stage::SynthMath: return {};
    case Stage::Filter: return {Stage::PairsRewrite, Stage::PairsReward, Stage::SynthMath};
    case Stage::TrainDpo: return cfg.dpo_mode == "online" ? std::vector<Stage>{Stage::Persona} : std::vector{Stage::Filter};
    case Stage::Eval: return {Stage::Ingest, Stage::Persona};
    case Stage::Analyze: return {Stage::Ingest, Stage::Classify, Stage::Persona};
  }
  return {};
}

Clients make_clients(const PipelineConfig& cfg, bool force_mock) {
  Clients c;
  if (force_mock || cfg.clients.mode == "mock") {
    const auto seed = derive_seed(cfg.seed, "mock");
    auto model = std::make_shared<ScriptedModel>(
        cfg.clients.mock_script.empty() ? ScriptedModel(seed) : ScriptedModel::from_file(cfg.clients.mock_script, seed));
    c.model = model;
    c.judge = model;
    c.scorer = std::make_shared<MockScorer>(MockScorer::pipeline_default());
    c.embedder = std::make_shared<MockEmbedder>(cfg.clients.embedding_dim);
    return c;
  }
  const auto env = LiveSettings::from_env();
  if (env.model_endpoint.empty()) throw Error(ErrorCode::Config, "live mode needs MODEL_ENDPOINT");
  const auto mode = cfg.clients.cassette_mode == "replay" ? CassetteMode::Replay : CassetteMode::Record;
  auto cassette_for = [&](const std::string& tag) {
    return cfg.clients.cassette.empty() ? std::string() : cfg.clients.cassette + "." + tag + ".jsonl";
  };
  auto model = std::make_shared<LiveChatClient>(
      make_transport(env.model_endpoint, env.api_key, cassette_for("model"), mode), env.model_name,
      cfg.clients.concurrency);
  c.model = model;
  c.judge = model;
  if (!env.reward_endpoint.empty()) {
    c.scorer = std::make_shared<EndpointScorer>(
        make_transport(env.reward_endpoint, env.api_key, cassette_for("reward"), mode), env.model_name,
        cfg.clients.concurrency);
  } else {
    c.scorer = std::make_shared<ChatRatingScorer>(model);
  }
  if (!env.embed_endpoint.empty()) {
    c.embedder = std::make_shared<LiveEmbedder>(
        make_transport(env.embed_endpoint, env.api_key, cassette_for("embed"), mode), env.model_name,
        cfg.clients.embedding_dim, cfg.clients.concurrency);
  } else {
    c.embedder = std::make_shared<MockEmbedder>(cfg.clients.embedding_dim);
    log::warn("config", "embed", "EMBED_ENDPOINT unset; diversity uses the hashed mock embedder");
  }
  return c;
}

namespace {

constexpr const char* kStageVersion = "1";

// Output directory layout.
namespace out {
constexpr const char* kCorpus = "ingest/corpus.jsonl";
constexpr const char* kDropReport = "ingest/drop_report.jsonl";
constexpr const char* kMalformed = "ingest/malformed.jsonl";
constexpr const char* kSplit = "ingest/split.json";
constexpr const char* kLabels = "classify/labels.jsonl";
constexpr const char* kMessageStats = "classify/stats.json";
constexpr const char* kPersonas = "persona/personas.jsonl";
constexpr const char* kEvalPersonas = "persona/eval_personas.jsonl";
constexpr const char* kDimensions = "persona/dimensions.jsonl";
constexpr const char* kRewritePairs = "pairs_rewrite/pairs.jsonl";
constexpr const char* kRewriteFailures = "pairs_rewrite/failures.jsonl";
constexpr const char* kRewardPairs = "pairs_reward/pairs.jsonl";
constexpr const char* kRewardSkips = "pairs_reward/skips.jsonl";
constexpr const char* kMathConversations = "synth_math/conversations.jsonl";
constexpr const char* kMathPairs = "synth_math/pairs.jsonl";
constexpr const char* kKept = "filter/kept.jsonl";
constexpr const char* kLedger = "filter/ledger.jsonl";
constexpr const char* kLoss = "train_dpo/loss.jsonl";  // names fixed by dpo::write_run
constexpr const char* kCheckpoints = "train_dpo/checkpoints.jsonl";
constexpr const char* kTrainSummary = "train_dpo/summary.json";
constexpr const char* kResponsesA = "eval/responses_a.jsonl";
constexpr const char* kResponsesB = "eval/responses_b.jsonl";
constexpr const char* kEvalReport = "eval/report.jsonl";
constexpr const char* kReport = "analyze/report.md";
constexpr const char* kStats = "analyze/stats.json";
}  // namespace out

struct StageIo {
  std::vector<std::string> internal_inputs;  // relative to output_dir
  std::vector<std::string> external_inputs;  // absolute
  std::vector<std::string> outputs;          // relative to output_dir
};

StageIo stage_io(Stage s, const PipelineConfig& cfg) {
  switch (s) {
    case Stage::Ingest:
      return {{}, {cfg.corpus}, {out::kCorpus, out::kDropReport, out::kMalformed, out::kSplit}};
    case Stage::Classify: return {{out::kCorpus}, {}, {out::kLabels, out::kMessageStats}};
    case Stage::Persona: {
      StageIo io{{out::kCorpus, out::kSplit}, {}, {out::kPersonas, out::kEvalPersonas}};
      if (cfg.persona_dimensions) io.outputs.push_back(out::kDimensions);
      return io;
    }
    case Stage::PairsRewrite:
      return {{out::kCorpus, out::kSplit, out::kLabels, out::kPersonas}, {}, {out::kRewritePairs, out::kRewriteFailures}};
    case Stage::PairsReward: return {{out::kPersonas}, {cfg.prompts}, {out::kRewardPairs, out::kRewardSkips}};
    case Stage::SynthMath: return {{}, {cfg.solutions}, {out::kMathConversations, out::kMathPairs}};
    case Stage::Filter: return {{out::kRewritePairs, out::kRewardPairs, out::kMathPairs}, {}, {out::kKept, out::kLedger}};
    case Stage::TrainDpo:
      if (cfg.dpo_mode == "online") {
        return {{out::kPersonas}, {cfg.prompts}, {out::kLoss, out::kCheckpoints, out::kTrainSummary}};
      }
      return {{out::kKept}, {}, {out::kLoss, out::kCheckpoints, out::kTrainSummary}};
    case Stage::Eval:
      return {{out::kCorpus, out::kSplit, out::kEvalPersonas}, {}, {out::kResponsesA, out::kResponsesB, out::kEvalReport}};
    case Stage::Analyze: {
      StageIo io{{out::kCorpus, out::kLabels, out::kPersonas}, {}, {out::kReport, out::kStats}};
      if (cfg.persona_dimensions) io.internal_inputs.push_back(out::kDimensions);
      if (!cfg.prompts.empty()) io.external_inputs.push_back(cfg.prompts);
      return io;
    }
  }
  return {};
}

struct Ctx {
  const PipelineConfig& cfg;
  Clients& clients;

  std::string path(const std::string& rel) const { return (fs::path(cfg.output_dir) / rel).string(); }
  GenParams gen(std::string_view stage) const {
    auto p = cfg.generation;
    p.seed = derive_seed(cfg.seed, stage);
    return p;
  }
};

std::map<std::string, Persona> persona_map(const std::vector<Persona>& personas) {
  std::map<std::string, Persona> m;
  for (const auto& p : personas) m[p.user_id] = p;
  return m;
}

std::vector<std::string> lines_of(const json& j) { return j.get<std::vector<std::string>>(); }

json read_json(const std::string& path) { return json::parse(read_text_file(path)); }

void write_json(const std::string& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::vector<Conversation> read_corpus(const Ctx& c) { return read_records<Conversation>(c.path(out::kCorpus)); }

std::vector<Conversation> users_subset(const std::vector<Conversation>& convs, const std::vector<std::string>& users) {
  const std::set<std::string> keep(users.begin(), users.end());
  std::vector<Conversation> outv;
  for (const auto& cv : convs) {
    if (keep.count(cv.user_id)) outv.push_back(cv);
  }
  return outv;
}

void run_ingest(const Ctx& c) {
  const auto& cfg = c.cfg;
  auto loaded = load_corpus(cfg.corpus);
  std::vector<json> bad;
  for (const auto& e : loaded.malformed) bad.push_back({{"line", e.line_number}, {"message", e.message}});
  write_jsonl(c.path(out::kMalformed), bad);

  std::vector<LabeledConversation> labels;
  if (cfg.corpus_filter.require_meaningful_feedback) labels = label_corpus(loaded.conversations, *c.clients.model, cfg.workers);
  auto filtered = filter_corpus(loaded.conversations, cfg.corpus_filter,
                                cfg.corpus_filter.require_meaningful_feedback ? &labels : nullptr);
  write_records(c.path(out::kCorpus), filtered.kept);
  json report = filtered.report.to_json();
  report["input"] = loaded.conversations.size();
  report["kept"] = filtered.kept.size();
  report["malformed"] = loaded.malformed.size();
  write_jsonl(c.path(out::kDropReport), {report});

  auto split = split_train_eval(filtered.kept, cfg.train_fraction, derive_seed(cfg.seed, "split"));
  write_json(c.path(out::kSplit), {{"train_users", split.train_users}, {"eval_users", split.eval_users}});
}

void run_classify(const Ctx& c) {
  const auto convs = read_corpus(c);
  const auto labels = label_corpus(convs, *c.clients.model, c.cfg.workers);
  write_records(c.path(out::kLabels), labels);
  write_json(c.path(out::kMessageStats), message_stats(labels, &convs).to_json());
}

void run_persona(const Ctx& c) {
  const auto convs = read_corpus(c);
  const auto split = read_json(c.path(out::kSplit));
  const auto by_user = group_by_user(convs);

  auto derive = [&](const std::vector<std::string>& users, bool reference_only) {
    std::vector<std::pair<std::string, std::vector<Conversation>>> work;
    for (const auto& u : users) {
      auto history = by_user.at(u);
      if (reference_only) {
        auto h = holdout_split(history, c.cfg.holdout_k);
        if (h.warning || h.reference.empty()) {
          log::warn("persona", u, "no reference history left after holdout; no persona");
          continue;
        }
        history = std::move(h.reference);
      }
      work.emplace_back(u, std::move(history));
    }
    return parallel_map(
        work.size(), [&](std::size_t i) { return infer_persona(work[i].second, *c.clients.model, c.cfg.persona); },
        c.cfg.workers);
  };

  const auto train = derive(lines_of(split.at("train_users")), false);
  write_records(c.path(out::kPersonas), train);
  write_records(c.path(out::kEvalPersonas), derive(lines_of(split.at("eval_users")), true));

  if (c.cfg.persona_dimensions) {
    auto verdicts = parallel_map(
        train.size(), [&](std::size_t i) { return classify_dimensions(train[i], *c.clients.judge); }, c.cfg.workers);
    std::vector<UserDimensionVerdict> rows;
    for (std::size_t i = 0; i < train.size(); ++i) {
      for (const auto& v : verdicts[i]) rows.push_back({train[i].user_id, v});
    }
    write_dimension_verdicts(c.path(out::kDimensions), rows);
  }
}

void run_pairs_rewrite(const Ctx& c) {
  const auto split = read_json(c.path(out::kSplit));
  const auto convs = users_subset(read_corpus(c), lines_of(split.at("train_users")));
  const auto labels = read_records<LabeledConversation>(c.path(out::kLabels));
  std::map<std::string, const LabeledConversation*> label_by_id;
  for (const auto& l : labels) label_by_id[l.conv_id] = &l;

  std::vector<RewriteSite> sites;
  for (const auto& cv : convs) {
    auto it = label_by_id.find(cv.conv_id);
    if (it == label_by_id.end()) throw Error(ErrorCode::MissingLabels, "no labels for " + cv.conv_id);
    for (auto& s : find_rewrite_sites(*it->second, cv)) sites.push_back(std::move(s));
  }
  const auto personas = persona_map(read_records<Persona>(c.path(out::kPersonas)));
  auto result = build_rewrite_pairs(sites, personas, *c.clients.model, *c.clients.scorer, c.gen("pairs-rewrite"),
                                    Provenance::Rewrite, c.cfg.workers);
  write_records(c.path(out::kRewritePairs), result.pairs);
  std::vector<json> failures;
  for (const auto& f : result.failures) failures.push_back({{"site_id", f.site_id}, {"reason", f.reason}});
  write_jsonl(c.path(out::kRewriteFailures), failures);
}

void run_pairs_reward(const Ctx& c) {
  if (c.cfg.prompts.empty()) throw Error(ErrorCode::Config, "paths.prompts is required for pairs-reward");
  const auto prompts = read_records<RewardPrompt>(c.cfg.prompts);
  const auto personas = persona_map(read_records<Persona>(c.path(out::kPersonas)));
  auto result = build_reward_pairs(prompts, personas, c.cfg.reward_n, *c.clients.model, *c.clients.scorer,
                                   c.gen("pairs-reward"), c.cfg.workers);
  write_records(c.path(out::kRewardPairs), result.pairs);
  std::vector<json> skips;
  for (const auto& s : result.skips) skips.push_back({{"prompt_id", s.prompt_id}, {"reason", s.reason}});
  write_jsonl(c.path(out::kRewardSkips), skips);
}

void run_synth_math(const Ctx& c) {
  if (c.cfg.solutions.empty()) throw Error(ErrorCode::Config, "paths.solutions is required for synth-math");
  const auto corpus = read_records<AnnotatedSolution>(c.cfg.solutions);
  const auto sample = sample_erroneous(corpus, c.cfg.math_k, derive_seed(c.cfg.seed, "synth-math"));
  std::vector<Conversation> convs;
  std::vector<RewriteSite> sites;
  for (const auto& s : sample) {
    convs.push_back(synthesize_conversation(s));
    sites.push_back(math_rewrite_site(convs.back()));
  }
  write_records(c.path(out::kMathConversations), convs);
  auto result = build_rewrite_pairs(sites, {}, *c.clients.model, *c.clients.scorer, c.gen("synth-math"),
                                    Provenance::MathRewrite, c.cfg.workers);
  write_records(c.path(out::kMathPairs), result.pairs);
}

void run_filter(const Ctx& c) {
  std::vector<PreferencePair> pairs;
  for (const auto* f : {out::kRewritePairs, out::kRewardPairs, out::kMathPairs}) {
    for (auto& p : read_records<PreferencePair>(c.path(f))) pairs.push_back(std::move(p));
  }
  auto result = filter_dataset(pairs, c.cfg.quality_filter);
  write_records(c.path(out::kKept), result.kept);
  write_jsonl(c.path(out::kLedger), result.ledger.to_records());
}

void write_trajectory(const Ctx& c, const dpo::Trajectory& t, const std::string& mode) {
  dpo::write_run(c.path("train_dpo"), t, {{"mode", mode}, {"config", c.cfg.dpo}, {"featurizer_dim", c.cfg.featurizer_dim}});
}

void run_train_dpo(const Ctx& c) {
  const dpo::Featurizer featurizer(c.cfg.featurizer_dim);
  dpo::Trajectory t;
  try {
    if (c.cfg.dpo_mode == "online") {
      if (c.cfg.prompts.empty()) throw Error(ErrorCode::Config, "paths.prompts is required for online training");
      const auto prompts = read_records<RewardPrompt>(c.cfg.prompts);
      const auto personas = persona_map(read_records<Persona>(c.path(out::kPersonas)));
      std::vector<dpo::OnlinePrompt> online;
      for (const auto& p : prompts) {
        auto it = personas.find(p.user_id);
        online.push_back({p.prompt_id, p.context,
                          it == personas.end() ? std::nullopt : std::optional<Persona>(it->second), {}});
      }
      dpo::ToyPolicy policy(featurizer);
      t = dpo::train_online(online, c.cfg.online_n, dpo::chat_sampler(*c.clients.model, c.gen("train-dpo")),
                            *c.clients.scorer, policy, c.cfg.dpo);
    } else {
      const auto pairs = read_records<PreferencePair>(c.path(out::kKept));
      if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no kept pairs to train on");
      t = dpo::train_offline(pairs, featurizer, c.cfg.dpo);
    }
  } catch (const dpo::DivergedLoss& e) {
    write_trajectory(c, e.trajectory, c.cfg.dpo_mode);
    throw;
  }
  write_trajectory(c, t, c.cfg.dpo_mode);
}

void run_eval(const Ctx& c) {
  const auto split = read_json(c.path(out::kSplit));
  const auto convs = users_subset(read_corpus(c), lines_of(split.at("eval_users")));
  std::vector<Conversation> heldout;
  for (auto& [user, history] : group_by_user(convs)) {
    for (auto& h : holdout_split(history, c.cfg.holdout_k).held_out) heldout.push_back(std::move(h));
  }
  const auto personas = persona_map(read_records<Persona>(c.path(out::kEvalPersonas)));
  const auto judged = answered_prefixes(std::move(heldout));
  const auto b = reference_responses(judged);
  auto a = generate_responses(judged, personas, *c.clients.model, c.gen("eval"), true, c.cfg.workers);
  write_responses(c.path(out::kResponsesA), a);
  write_responses(c.path(out::kResponsesB), b);
  auto report = run_usereval(judged, personas, a, b, *c.clients.judge, c.cfg.axes, c.cfg.workers);
  write_jsonl(c.path(out::kEvalReport), report.to_records());
}

void run_analyze(const Ctx& c) {
  const auto convs = read_corpus(c);
  const auto labels = read_records<LabeledConversation>(c.path(out::kLabels));
  StatsBundle bundle;
  bundle.messages = message_stats(labels, &convs);
  bundle.turns = turn_count_stats(convs);
  if (c.cfg.persona_dimensions) {
    std::vector<DimensionVerdict> verdicts;
    for (const auto& r : read_dimension_verdicts(c.path(out::kDimensions))) verdicts.push_back(r.verdict);
    if (!verdicts.empty()) bundle.dimensions = dimension_stats(verdicts);
  }
  std::vector<NamedCorpus> corpora;
  NamedCorpus corpus{"corpus", {}};
  for (const auto& cv : convs) corpus.second.push_back(diversity_context(cv));
  corpora.push_back(std::move(corpus));
  if (!c.cfg.prompts.empty()) {
    NamedCorpus pool{"prompts", {}};
    for (const auto& p : read_records<RewardPrompt>(c.cfg.prompts)) {
      Conversation cv;
      cv.turns = p.context;
      pool.second.push_back(diversity_context(cv));
    }
    if (pool.second.size() >= 2) corpora.push_back(std::move(pool));
  }
  if (corpora.front().second.size() >= 2) {
    bundle.diversity = diversity_compare(corpora, c.cfg.diversity_k, derive_seed(c.cfg.seed, "analyze"),
                                         *c.clients.embedder, c.cfg.workers);
  }
  write_text_file(c.path(out::kReport), render_report(bundle));
  write_json(c.path(out::kStats), stats_json(bundle));
}

void run_stage(Stage s, const Ctx& c) {
  switch (s) {
    case Stage::Ingest: return run_ingest(c);
    case Stage::Classify: return run_classify(c);
    case Stage::Persona: return run_persona(c);
    case Stage::PairsRewrite: return run_pairs_rewrite(c);
    case Stage::PairsReward: return run_pairs_reward(c);
    case Stage::SynthMath: return run_synth_math(c);
    case Stage::Filter: return run_filter(c);
    case Stage::TrainDpo: return run_train_dpo(c);
    case Stage::Eval: return run_eval(c);
    case Stage::Analyze: return run_analyze(c);
  }
}

json hashes(const std::vector<std::string>& files, const std::function<std::string(const std::string&)>& to_path) {
  json j = json::object();
  for (const auto& f : files) j[f] = file_sha256(to_path(f));
  return j;
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg, const std::vector<Stage>& stages, Clients& clients) {
  RunResult result;
  const Ctx ctx{cfg, clients};
  std::set<Stage> selected(stages.begin(), stages.end());

  // Dependency check before anything runs.
  for (auto s : kAllStages) {
    if (!selected.count(s)) continue;
    std::vector<std::string> missing;
    const auto& needed = stage_io(s, cfg).internal_inputs;
    for (auto dep : stage_dependencies(s, cfg)) {
      if (selected.count(dep)) continue;
      for (const auto& f : stage_io(dep, cfg).outputs) {
        if (std::find(needed.begin(), needed.end(), f) != needed.end() && !fs::exists(ctx.path(f))) {
          missing.emplace_back(to_string(dep));
          break;
        }
      }
    }
    if (!missing.empty()) {
      std::string names;
      for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
      result.exit_code = kExitDependency;
      result.failed_stage = std::string(to_string(s));
      result.message = std::string(to_string(s)) + " needs the output of " + names + "; run " +
                       (missing.size() == 1 ? "it" : "them") + " first or select them too";
      return result;
    }
    for (const auto& f : stage_io(s, cfg).external_inputs) {
      if (f.empty()) {
        result.exit_code = kExitConfig;
        result.failed_stage = std::string(to_string(s));
        result.message = std::string(to_string(s)) + " needs an input path that the config does not set";
        return result;
      }
    }
  }

  const auto manifest_path = ctx.path("manifest.json");
  json manifest = {{"config_hash", cfg.config_hash}, {"seed", cfg.seed}, {"stages", json::object()}};
  if (fs::exists(manifest_path)) {
    try {
      auto old = read_json(manifest_path);
      if (old.contains("stages")) manifest["stages"] = old.at("stages");
    } catch (const json::exception&) {
      log::warn("pipeline", "manifest", "unreadable manifest ignored");
    }
  }

  auto rel = [&](const std::string& f) { return ctx.path(f); };
  for (auto s : kAllStages) {
    if (!selected.count(s)) continue;
    const std::string name(to_string(s));
    const auto io = stage_io(s, cfg);
    json entry = {{"version", kStageVersion},
                  {"config_hash", cfg.config_hash},
                  {"seed", derive_seed(cfg.seed, name)},
                  {"inputs", hashes(io.internal_inputs, rel)},
                  {"external_inputs", json::object()}};
    for (const auto& f : io.external_inputs) entry["external_inputs"][fs::path(f).filename().string()] = file_sha256(f);

    if (manifest["stages"].contains(name)) {
      const auto& old = manifest["stages"][name];
      bool fresh = old.value("version", "") == kStageVersion && old.value("config_hash", "") == cfg.config_hash &&
                   old.value("inputs", json()) == entry["inputs"] &&
                   old.value("external_inputs", json()) == entry["external_inputs"] && old.contains("outputs");
      if (fresh) fresh = old.at("outputs") == hashes(io.outputs, rel);
      if (fresh) {
        log::info("pipeline", name, "up to date; skipped");
        result.skipped.push_back(name);
        continue;
      }
    }

    log::info("pipeline", name, "running");
    try {
      run_stage(s, ctx);
    } catch (const Error& e) {
      result.exit_code = e.code() == ErrorCode::Config ? kExitConfig : kExitStageFailure;
      result.failed_stage = name;
      result.message = e.what();
      log::error("pipeline", name, e.what());
      manifest["stages"].erase(name);
      write_json(manifest_path, manifest);
      return result;
    } catch (const std::exception& e) {
      result.exit_code = kExitStageFailure;
      result.failed_stage = name;
      result.message = e.what();
      log::error("pipeline", name, e.what());
      manifest["stages"].erase(name);
      write_json(manifest_path, manifest);
      return result;
    }
    entry["outputs"] = hashes(io.outputs, rel);
    manifest["stages"][name] = entry;
    write_json(manifest_path, manifest);
    result.executed.push_back(name);
  }
  return result;
}

}  // namespace rlhi
