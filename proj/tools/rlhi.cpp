// Command-line entry point: one subcommand per pipeline stage plus `run` and
// `validate-config`.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "rlhi/analytics.hpp"
#include "rlhi/error.hpp"
#include "rlhi/hash.hpp"
#include "rlhi/ingest.hpp"
#include "rlhi/log.hpp"
#include "rlhi/math_synth.hpp"
#include "rlhi/pairgen_reward.hpp"
#include "rlhi/pairgen_rewrite.hpp"
#include "rlhi/parallel.hpp"
#include "rlhi/pipeline.hpp"
#include "rlhi/quality_filter.hpp"
#include "rlhi/turn_classify.hpp"
#include "rlhi/usereval.hpp"

namespace fs = std::filesystem;
using namespace rlhi;

namespace {

struct Common {
  std::string config;
  bool mock = false;
  std::string mock_script;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Pipeline config file supplying defaults")->check(CLI::ExistingFile);
  cmd->add_flag("--mock", c.mock, "Use the scripted mock clients");
  cmd->add_option("--mock-script", c.mock_script, "Mock script JSON")->check(CLI::ExistingFile);
  cmd->add_option("--global-seed", c.seed, "Global seed");
  cmd->add_option("--workers", c.workers, "Worker threads");
  cmd->add_flag("-v,--verbose", c.verbose, "Log at info level");
}

// Flag values that override the config file.
json overrides_of(const Common& c) {
  json o = json::object();
  if (c.seed) o["seed"] = *c.seed;
  if (c.workers) o["workers"] = *c.workers;
  if (!c.mock_script.empty()) o["clients"]["mock_script"] = fs::absolute(c.mock_script).string();
  return o;
}

PipelineConfig settings(const Common& c, json extra = json::object()) {
  auto o = overrides_of(c);
  o.merge_patch(extra);
  return settings_config(c.config, o);
}

std::map<std::string, Persona> read_personas(const std::string& path) {
  std::map<std::string, Persona> m;
  if (path.empty()) return m;
  for (auto& p : read_records<Persona>(path)) m[p.user_id] = std::move(p);
  return m;
}

std::string sibling(const std::string& out, const std::string& suffix) {
  fs::path p(out);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

GenParams stage_params(const PipelineConfig& cfg, std::string_view stage) {
  auto p = cfg.generation;
  p.seed = derive_seed(cfg.seed, stage);
  return p;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Config:
    case ErrorCode::FileNotFound:
      return kExitConfig;
    default:
      return kExitStageFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rlhi: preference-data pipeline over organic multi-turn chat logs"};
  app.require_subcommand(1);
  Common common;
  std::function<int()> action;

  // ingest
  std::string in, out, labels, aux;
  auto* ingest = app.add_subcommand("ingest", "Load, filter and split a conversation corpus");
  add_common(ingest, common);
  ingest->add_option("--in", in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out, "Kept conversations JSONL")->required();
  ingest->add_option("--labels", labels, "Turn labels for the feedback rule")->check(CLI::ExistingFile);
  ingest->add_option("--drop-report", aux, "Drop report path (default <out>.drop_report.jsonl)");
  ingest->callback([&] {
    action = [&] {
      const auto cfg = settings(common);
      auto loaded = load_corpus(in);
      for (const auto& e : loaded.malformed) log::warn("ingest", "line " + std::to_string(e.line_number), e.message);
      std::vector<LabeledConversation> lab;
      const std::vector<LabeledConversation>* lab_ptr = nullptr;
      if (!labels.empty()) {
        lab = read_records<LabeledConversation>(labels);
        lab_ptr = &lab;
      } else if (cfg.corpus_filter.require_meaningful_feedback) {
        auto clients = make_clients(cfg, common.mock);
        lab = label_corpus(loaded.conversations, *clients.model, cfg.workers);
        lab_ptr = &lab;
      }
      auto result = filter_corpus(loaded.conversations, cfg.corpus_filter, lab_ptr);
      write_records(out, result.kept);
      auto report = result.report.to_json();
      report["input"] = loaded.conversations.size();
      report["kept"] = result.kept.size();
      report["malformed"] = loaded.malformed.size();
      write_jsonl(aux.empty() ? sibling(out, ".drop_report.jsonl") : aux, {report});
      std::cout << "kept " << result.kept.size() << " of " << loaded.conversations.size() << " conversations\n";
      return 0;
    };
  });

  // classify
  auto* classify = app.add_subcommand("classify", "Label every user turn of a corpus");
  add_common(classify, common);
  classify->add_option("--in", in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  classify->add_option("--out", out, "Labels JSONL")->required();
  classify->add_option("--stats", aux, "Message distribution JSON");
  classify->callback([&] {
    action = [&] {
      const auto cfg = settings(common);
      auto clients = make_clients(cfg, common.mock);
      const auto convs = read_records<Conversation>(in);
      const auto lab = label_corpus(convs, *clients.model, cfg.workers);
      write_records(out, lab);
      const auto stats = message_stats(lab, &convs).to_json();
      if (!aux.empty()) write_text_file(aux, stats.dump(2) + "\n");
      std::cout << stats.dump(2) << "\n";
      return 0;
    };
  });

  // persona
  bool dimensions = false;
  auto* persona = app.add_subcommand("persona", "Infer one persona per user");
  add_common(persona, common);
  persona->add_option("--in", in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  persona->add_option("--out", out, "Personas JSONL")->required();
  persona->add_flag("--dimensions", dimensions, "Also classify the four preference dimensions");
  persona->add_option("--dimensions-out", aux, "Dimension verdicts path (default <out>.dimensions.jsonl)");
  persona->callback([&] {
    action = [&] {
      const auto cfg = settings(common);
      auto clients = make_clients(cfg, common.mock);
      const auto by_user = group_by_user(read_records<Conversation>(in));
      std::vector<const std::vector<Conversation>*> histories;
      for (const auto& [_, h] : by_user) histories.push_back(&h);
      const auto personas = parallel_map(
          histories.size(), [&](std::size_t i) { return infer_persona(*histories[i], *clients.model, cfg.persona); },
          cfg.workers);
      write_records(out, personas);
      if (dimensions) {
        auto verdicts = parallel_map(
            personas.size(), [&](std::size_t i) { return classify_dimensions(personas[i], *clients.judge); },
            cfg.workers);
        std::vector<UserDimensionVerdict> rows;
        for (std::size_t i = 0; i < personas.size(); ++i) {
          for (const auto& v : verdicts[i]) rows.push_back({personas[i].user_id, v});
        }
        write_dimension_verdicts(aux.empty() ? sibling(out, ".dimensions.jsonl") : aux, rows);
      }
      std::cout << "wrote " << personas.size() << " personas\n";
      return 0;
    };
  });

  // pairs-rewrite
  std::string corpus, personas_path;
  auto* prw = app.add_subcommand("pairs-rewrite", "Build rewrite preference pairs from feedback turns");
  add_common(prw, common);
  prw->add_option("--corpus", corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  prw->add_option("--labels", labels, "Labels JSONL")->required()->check(CLI::ExistingFile);
  prw->add_option("--personas", personas_path, "Personas JSONL")->required()->check(CLI::ExistingFile);
  prw->add_option("--out", out, "Pairs JSONL")->required();
  prw->add_option("--failures", aux, "Failed sites path (default <out>.failures.jsonl)");
  prw->callback([&] {
    action = [&] {
      const auto cfg = settings(common);
      auto clients = make_clients(cfg, common.mock);
      std::map<std::string, LabeledConversation> by_id;
      for (auto& l : read_records<LabeledConversation>(labels)) by_id[l.conv_id] = std::move(l);
      std::vector<RewriteSite> sites;
      for (const auto& cv : read_records<Conversation>(corpus)) {
        auto it = by_id.find(cv.conv_id);
        if (it == by_id.end()) throw Error(ErrorCode::MissingLabels, "no labels for " + cv.conv_id);
        for (auto& s : find_rewrite_sites(it->second, cv)) sites.push_back(std::move(s));
      }
      auto result = build_rewrite_pairs(sites, read_personas(personas_path), *clients.model, *clients.scorer,
                                        stage_params(cfg, "pairs-rewrite"), Provenance::Rewrite, cfg.workers);
      write_records(out, result.pairs);
      std::vector<json> failures;
      for (const auto& f : result.failures) failures.push_back({{"site_id", f.site_id}, {"reason", f.reason}});
      write_jsonl(aux.empty() ? sibling(out, ".failures.jsonl") : aux, failures);
      std::cout << result.pairs.size() << " pairs, " << failures.size() << " failed sites\n";
      return 0;
    };
  });

  // pairs-reward
  std::string prompts_path;
  std::optional<int> n;
  auto* prr = app.add_subcommand("pairs-reward", "Build best/worst-of-n pairs with the persona-conditioned scorer");
  add_common(prr, common);
  prr->add_option("--prompts", prompts_path, "Prompts JSONL")->required()->check(CLI::ExistingFile);
  prr->add_option("--personas", personas_path, "Personas JSONL")->required()->check(CLI::ExistingFile);
  prr->add_option("--n", n, "Candidates per prompt")->check(CLI::Range(2, 100000));
  prr->add_option("--out", out, "Pairs JSONL")->required();
  prr->add_option("--skips", aux, "Skipped prompts path (default <out>.skips.jsonl)");
  prr->callback([&] {
    action = [&] {
      json extra = json::object();
      if (n) extra["pairs_reward"]["n"] = *n;
      const auto cfg = settings(common, extra);
      auto clients = make_clients(cfg, common.mock);
      auto result = build_reward_pairs(read_records<RewardPrompt>(prompts_path), read_personas(personas_path),
                                       cfg.reward_n, *clients.model, *clients.scorer,
                                       stage_params(cfg, "pairs-reward"), cfg.workers);
      write_records(out, result.pairs);
      std::vector<json> skips;
      for (const auto& s : result.skips) skips.push_back({{"prompt_id", s.prompt_id}, {"reason", s.reason}});
      write_jsonl(aux.empty() ? sibling(out, ".skips.jsonl") : aux, skips);
      std::cout << result.pairs.size() << " pairs, " << skips.size() << " skipped prompts\n";
      return 0;
    };
  });

  // filter
  std::vector<std::string> inputs;
  bool no_improvement = false;
  auto* filter = app.add_subcommand("filter", "Apply the pair quality filter and write a ledger");
  add_common(filter, common);
  filter->add_option("--in", inputs, "Pairs JSONL (repeatable)")->required()->check(CLI::ExistingFile);
  filter->add_option("--out", out, "Kept pairs JSONL")->required();
  filter->add_option("--ledger", aux, "Ledger JSONL")->required();
  filter->add_flag("--no-improvement-check", no_improvement, "Skip the rewrite improvement rule");
  filter->callback([&] {
    action = [&] {
      json extra = json::object();
      if (no_improvement) extra["quality_filter"]["require_rewrite_improvement"] = false;
      const auto cfg = settings(common, extra);
      std::vector<PreferencePair> pairs;
      for (const auto& f : inputs) {
        for (auto& p : read_records<PreferencePair>(f)) pairs.push_back(std::move(p));
      }
      auto result = filter_dataset(pairs, cfg.quality_filter);
      write_records(out, result.kept);
      const auto records = result.ledger.to_records();
      write_jsonl(aux, records);
      std::cout << records.front().dump() << "\n";
      return 0;
    };
  });

  // train-dpo
  std::string pairs_path, mode;
  std::optional<double> beta, lr;
  std::optional<int> steps, online_n;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::size_t> batch_size, featurizer_dim;
  auto* train = app.add_subcommand("train-dpo", "Train the toy policy with the DPO objective");
  add_common(train, common);
  train->add_option("--pairs", pairs_path, "Kept pairs JSONL (offline)")->check(CLI::ExistingFile);
  train->add_option("--mode", mode, "offline or online")->check(CLI::IsMember({"offline", "online"}));
  train->add_option("--beta", beta, "DPO temperature");
  train->add_option("--lr", lr, "Learning rate");
  train->add_option("--steps", steps, "Gradient steps");
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--batch-size", batch_size, "Minibatch size, 0 for full batch");
  train->add_option("--featurizer-dim", featurizer_dim, "Hashed feature dimension");
  train->add_option("--prompts", prompts_path, "Prompts JSONL (online)")->check(CLI::ExistingFile);
  train->add_option("--personas", personas_path, "Personas JSONL (online)")->check(CLI::ExistingFile);
  train->add_option("--online-n", online_n, "Candidates per online step");
  train->add_option("--out", out, "Run directory")->required();
  train->callback([&] {
    action = [&] {
      json extra = json::object();
      if (!mode.empty()) extra["dpo"]["mode"] = mode;
      if (beta) extra["dpo"]["beta"] = *beta;
      if (lr) extra["dpo"]["lr"] = *lr;
      if (steps) extra["dpo"]["steps"] = *steps;
      if (train_seed) extra["dpo"]["seed"] = *train_seed;
      if (batch_size) extra["dpo"]["batch_size"] = *batch_size;
      if (featurizer_dim) extra["dpo"]["featurizer_dim"] = *featurizer_dim;
      if (online_n) extra["dpo"]["online_n"] = *online_n;
      const auto cfg = settings(common, extra);
      const dpo::Featurizer featurizer(cfg.featurizer_dim);
      const json meta = {{"mode", cfg.dpo_mode}, {"config", cfg.dpo}, {"featurizer_dim", cfg.featurizer_dim}};
      dpo::Trajectory t;
      try {
        if (cfg.dpo_mode == "online") {
          if (prompts_path.empty()) throw Error(ErrorCode::Config, "online mode needs --prompts");
          auto clients = make_clients(cfg, common.mock);
          const auto personas = read_personas(personas_path);
          std::vector<dpo::OnlinePrompt> online;
          for (const auto& p : read_records<RewardPrompt>(prompts_path)) {
            auto it = personas.find(p.user_id);
            online.push_back({p.prompt_id, p.context,
                              it == personas.end() ? std::nullopt : std::optional<Persona>(it->second), {}});
          }
          dpo::ToyPolicy policy(featurizer);
          t = dpo::train_online(online, cfg.online_n, dpo::chat_sampler(*clients.model, stage_params(cfg, "train-dpo")),
                                *clients.scorer, policy, cfg.dpo);
        } else {
          if (pairs_path.empty()) throw Error(ErrorCode::Config, "offline mode needs --pairs");
          t = dpo::train_offline(read_records<PreferencePair>(pairs_path), featurizer, cfg.dpo);
        }
      } catch (const dpo::DivergedLoss& e) {
        dpo::write_run(out, e.trajectory, meta);
        throw;
      }
      dpo::write_run(out, t, meta);
      std::cout << "loss " << (t.loss.empty() ? 0.0 : t.loss.front()) << " -> "
                << (t.loss.empty() ? 0.0 : t.loss.back()) << "\n";
      return 0;
    };
  });

  // synth-math
  std::optional<std::size_t> k;
  auto* math = app.add_subcommand("synth-math", "Synthesize feedback conversations from annotated math solutions");
  add_common(math, common);
  math->add_option("--in", in, "Annotated solutions JSONL")->required()->check(CLI::ExistingFile);
  math->add_option("--k", k, "Number of erroneous solutions to sample");
  math->add_option("--seed", train_seed, "Sampling seed");
  math->add_option("--out", out, "Conversations JSONL")->required();
  math->add_option("--pairs", aux, "Also build rewrite pairs into this file");
  math->callback([&] {
    action = [&] {
      json extra = json::object();
      if (k) extra["synth_math"]["k"] = *k;
      const auto cfg = settings(common, extra);
      const auto seed = train_seed ? *train_seed : derive_seed(cfg.seed, "synth-math");
      const auto sample = sample_erroneous(read_records<AnnotatedSolution>(in), cfg.math_k, seed);
      std::vector<Conversation> convs;
      std::vector<RewriteSite> sites;
      for (const auto& s : sample) {
        convs.push_back(synthesize_conversation(s));
        sites.push_back(math_rewrite_site(convs.back()));
      }
      write_records(out, convs);
      if (!aux.empty()) {
        auto clients = make_clients(cfg, common.mock);
        auto result = build_rewrite_pairs(sites, {}, *clients.model, *clients.scorer, stage_params(cfg, "synth-math"),
                                          Provenance::MathRewrite, cfg.workers);
        write_records(aux, result.pairs);
      }
      std::cout << "wrote " << convs.size() << " conversations\n";
      return 0;
    };
  });

  // eval
  std::string heldout, resp_a, resp_b, write_a;
  std::vector<std::string> axes_names;
  auto* eval = app.add_subcommand("eval", "Judge two response sets on held-out conversations");
  add_common(eval, common);
  eval->add_option("--heldout", heldout, "Held-out conversations JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--responses-a", resp_a, "Responses for side A (default: generate persona-guided)")
      ->check(CLI::ExistingFile);
  eval->add_option("--responses-b", resp_b, "Responses for side B (default: the recorded replies)")
      ->check(CLI::ExistingFile);
  eval->add_option("--write-a", write_a, "Where to save generated side-A responses");
  eval->add_option("--personas", personas_path, "Personas JSONL")->check(CLI::ExistingFile);
  eval->add_option("--axes", axes_names, "Axes, or 'all'")->delimiter(',');
  eval->add_option("--out", out, "Report JSONL")->required();
  eval->callback([&] {
    action = [&] {
      json extra = json::object();
      if (!axes_names.empty()) extra["eval"]["axes"] = axes_names;
      const auto cfg = settings(common, extra);
      auto clients = make_clients(cfg, common.mock);
      auto convs = read_records<Conversation>(heldout);
      if (resp_b.empty()) convs = answered_prefixes(std::move(convs));
      const auto personas = read_personas(personas_path);
      ResponseSet a, b;
      b = resp_b.empty() ? reference_responses(convs) : read_responses(resp_b);
      if (resp_a.empty()) {
        a = generate_responses(convs, personas, *clients.model, stage_params(cfg, "eval"), true, cfg.workers);
        if (!write_a.empty()) write_responses(write_a, a);
      } else {
        a = read_responses(resp_a);
      }
      auto report = run_usereval(convs, personas, a, b, *clients.judge, cfg.axes, cfg.workers);
      const auto records = report.to_records();
      write_jsonl(out, records);
      std::cout << records.back().dump(2) << "\n";
      return 0;
    };
  });

  // analyze
  std::string dims_path;
  bool diversity = false;
  std::vector<std::string> compare;
  std::optional<std::size_t> diversity_k;
  auto* analyze = app.add_subcommand("analyze", "Corpus statistics report");
  add_common(analyze, common);
  analyze->add_option("--corpus", corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  analyze->add_option("--labels", labels, "Labels JSONL")->check(CLI::ExistingFile);
  analyze->add_option("--personas", personas_path, "Personas JSONL; dimensions are classified when given")
      ->check(CLI::ExistingFile);
  analyze->add_option("--dimensions", dims_path, "Precomputed dimension verdicts")->check(CLI::ExistingFile);
  analyze->add_flag("--diversity", diversity, "Compute context diversity");
  analyze->add_option("--compare", compare, "Extra corpus for diversity, as name=path (repeatable)");
  analyze->add_option("--diversity-k", diversity_k, "Contexts sampled per corpus");
  analyze->add_option("--out", out, "Report directory")->required();
  analyze->callback([&] {
    action = [&] {
      json extra = json::object();
      if (diversity_k) extra["analyze"]["diversity_k"] = *diversity_k;
      const auto cfg = settings(common, extra);
      const auto convs = read_records<Conversation>(corpus);
      StatsBundle bundle;
      bundle.turns = turn_count_stats(convs);
      if (!labels.empty()) bundle.messages = message_stats(read_records<LabeledConversation>(labels), &convs);
      std::optional<Clients> clients;
      auto get_clients = [&]() -> Clients& {
        if (!clients) clients = make_clients(cfg, common.mock);
        return *clients;
      };
      std::vector<DimensionVerdict> verdicts;
      if (!dims_path.empty()) {
        for (const auto& r : read_dimension_verdicts(dims_path)) verdicts.push_back(r.verdict);
      } else if (!personas_path.empty()) {
        const auto ps = read_records<Persona>(personas_path);
        auto per = parallel_map(
            ps.size(), [&](std::size_t i) { return classify_dimensions(ps[i], *get_clients().judge); }, cfg.workers);
        for (auto& v : per) verdicts.insert(verdicts.end(), v.begin(), v.end());
      }
      if (!verdicts.empty()) bundle.dimensions = dimension_stats(verdicts);
      if (diversity) {
        std::vector<NamedCorpus> corpora{{"corpus", {}}};
        for (const auto& cv : convs) corpora.front().second.push_back(diversity_context(cv));
        for (const auto& spec : compare) {
          const auto eq = spec.find('=');
          if (eq == std::string::npos) throw Error(ErrorCode::Config, "--compare expects name=path");
          NamedCorpus extra_corpus{spec.substr(0, eq), {}};
          for (const auto& cv : read_records<Conversation>(spec.substr(eq + 1))) {
            extra_corpus.second.push_back(diversity_context(cv));
          }
          corpora.push_back(std::move(extra_corpus));
        }
        bundle.diversity = diversity_compare(corpora, cfg.diversity_k, derive_seed(cfg.seed, "analyze"),
                                             *get_clients().embedder, cfg.workers);
      }
      const fs::path dir(out);
      write_text_file((dir / "report.md").string(), render_report(bundle));
      write_text_file((dir / "stats.json").string(), stats_json(bundle).dump(2) + "\n");
      std::cout << "wrote " << (dir / "report.md").string() << "\n";
      return 0;
    };
  });

  // run
  std::string stages_arg, out_dir;
  auto* run = app.add_subcommand("run", "Run pipeline stages from a config file");
  run->add_option("--config", common.config, "Pipeline config")->required();
  run->add_option("--stages", stages_arg, "Comma-separated stages (default: all)");
  run->add_flag("--mock", common.mock, "Use the scripted mock clients");
  run->add_option("--out-dir", out_dir, "Override paths.output_dir");
  run->add_option("--global-seed", common.seed, "Override the seed");
  run->add_option("--workers", common.workers, "Worker threads");
  run->add_flag("-v,--verbose", common.verbose, "Log at info level");
  run->callback([&] {
    action = [&] {
      auto o = overrides_of(common);
      if (!out_dir.empty()) o["paths"]["output_dir"] = fs::absolute(out_dir).string();
      if (common.mock) o["clients"]["mode"] = "mock";
      auto cfg = load_config(common.config, o);
      std::vector<Stage> stages;
      if (stages_arg.empty()) {
        stages.assign(std::begin(kAllStages), std::end(kAllStages));
      } else {
        std::stringstream ss(stages_arg);
        for (std::string s; std::getline(ss, s, ',');) stages.push_back(parse_stage(s));
      }
      auto clients = make_clients(cfg, common.mock);
      const auto result = run_pipeline(cfg, stages, clients);
      for (const auto& s : result.executed) std::cout << "ran     " << s << "\n";
      for (const auto& s : result.skipped) std::cout << "skipped " << s << " (up to date)\n";
      if (result.exit_code != kExitOk) {
        std::cerr << "stage " << result.failed_stage << " failed: " << result.message << "\n";
      }
      return result.exit_code;
    };
  });

  // validate-config
  std::string config_file;
  auto* validate = app.add_subcommand("validate-config", "Check a config file without running anything");
  validate->add_option("path", config_file, "Config file")->required();
  validate->callback([&] {
    action = [&] {
      const auto check = validate_config(config_file);
      for (const auto& w : check.warnings) std::cout << "warning: " << w << "\n";
      for (const auto& e : check.errors) std::cout << "error: " << e << "\n";
      if (check.ok()) std::cout << "ok\n";
      return check.ok() ? kExitOk : kExitConfig;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  log::set_sink(log::stderr_sink(common.verbose ? log::Level::Info : log::Level::Warn));
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  }
}
