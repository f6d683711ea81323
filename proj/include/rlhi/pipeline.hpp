#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rlhi/dpo.hpp"
#include "rlhi/ingest.hpp"
#include "rlhi/model_io.hpp"
#include "rlhi/persona.hpp"
#include "rlhi/quality_filter.hpp"
#include "rlhi/usereval.hpp"

namespace rlhi {

struct ClientConfig {
  std::string mode = "mock";  // "mock" or "live"
  std::string mock_script;    // resolved path, empty = built-in simulators only
  std::string cassette;       // resolved path, empty = no recording
  std::string cassette_mode = "record";
  std::size_t embedding_dim = 256;
  int concurrency = 8;
};

struct PipelineConfig {
  std::filesystem::path config_path;
  std::string config_hash;  // sha256 of the effective config, minus output_dir and thread counts
  std::uint64_t seed = 0;

  std::string corpus;
  std::string prompts;
  std::string solutions;
  std::string output_dir;

  CorpusFilterConfig corpus_filter;
  double train_fraction = 0.8;
  std::size_t holdout_k = 5;
  PersonaConfig persona;
  bool persona_dimensions = true;
  GenParams generation;
  int reward_n = 64;
  FilterConfig quality_filter;
  dpo::TrainConfig dpo;
  std::string dpo_mode = "offline";
  int online_n = 4;
  std::size_t featurizer_dim = 512;
  std::size_t math_k = 10;
  std::vector<JudgeAxis> axes{kAllJudgeAxes.begin(), kAllJudgeAxes.end()};
  std::size_t diversity_k = 500;
  ClientConfig clients;
  std::size_t workers = 8;
};

struct ConfigCheck {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;  // unknown keys

  bool ok() const { return errors.empty(); }
};

/// Schema and invariant check of a parsed config; relative paths resolve against
/// `base_dir`. Never touches the network.
ConfigCheck check_config(const json& config, const std::filesystem::path& base_dir);

/// Reads and checks a config file. Throws FileNotFound when it does not exist.
ConfigCheck validate_config(const std::string& path);

/// Loads a config, applying `overrides` as a JSON merge patch (command-line flags win).
/// The config hash covers the merged result. Throws Error(Config) with
/// the first error when invalid.
PipelineConfig load_config(const std::string& path, const json& overrides = json::object());

/// Settings for a single subcommand: an optional config file (empty path = defaults)
/// merged with `overrides`. Paths and seed are not required; the seed defaults to 0.
PipelineConfig settings_config(const std::string& path, const json& overrides = json::object());

enum class Stage { Ingest, Classify, Persona, PairsRewrite, PairsReward, SynthMath, Filter, TrainDpo, Eval, Analyze };

/// Every stage in execution order.
inline constexpr Stage kAllStages[] = {Stage::Ingest,      Stage::Classify,  Stage::Persona, Stage::PairsRewrite,
                                       Stage::PairsReward, Stage::SynthMath, Stage::Filter,  Stage::TrainDpo,
                                       Stage::Eval,        Stage::Analyze};

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view name);

/// Stages whose outputs `s` reads.
std::vector<Stage> stage_dependencies(Stage s, const PipelineConfig& cfg);

struct Clients {
  std::shared_ptr<ChatClient> model;
  std::shared_ptr<ChatClient> judge;
  std::shared_ptr<Scorer> scorer;
  std::shared_ptr<Embedder> embedder;
};

/// Scripted mock stack, or live clients from the environment (MODEL_ENDPOINT etc.).
Clients make_clients(const PipelineConfig& cfg, bool force_mock);

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitDependency = 3, kExitStageFailure = 4 };

struct RunResult {
  int exit_code = kExitOk;
  std::string failed_stage;
  std::string message;
  std::vector<std::string> executed;  // stages that did work
  std::vector<std::string> skipped;   // stages found up to date
};

/// Runs the selected stages in dependency order and updates <output_dir>/manifest.json.
/// A stage whose recorded inputs, outputs and config are unchanged is skipped.
RunResult run_pipeline(const PipelineConfig& cfg, const std::vector<Stage>& stages, Clients& clients);

}  // namespace rlhi
