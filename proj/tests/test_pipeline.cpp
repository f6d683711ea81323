#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "rlhi/error.hpp"
#include "rlhi/pipeline.hpp"
#include "rlhi/serialize.hpp"
#include "test_support.hpp"

using namespace rlhi;
using rlhi::testing::data_path;
using rlhi::testing::TempDir;
namespace fs = std::filesystem;

namespace {

json read_json(const std::string& path) { return json::parse(read_text_file(path)); }
void write_json(const std::string& path, const json& j) { write_text_file(path, j.dump(2)); }

// The bundled config with its paths made absolute and the output redirected.
json bundled_config(const std::string& output_dir) {
  auto j = read_json(data_path("pipeline.json"));
  for (const char* key : {"corpus", "prompts", "solutions"}) {
    j["paths"][key] = data_path(j["paths"][key].get<std::string>());
  }
  j["paths"]["output_dir"] = output_dir;
  j["clients"]["mock_script"] = data_path(j["clients"]["mock_script"].get<std::string>());
  return j;
}

std::string write_config(const TempDir& dir, const json& j, const std::string& name = "cfg.json") {
  write_json(dir.file(name), j);
  return dir.file(name);
}

struct CliResult {
  int code;
  std::string output;
};

CliResult run_cli(const std::string& args, const TempDir& dir) {
  const auto log = dir.file("cli.log");
  const auto cmd = std::string(RLHI_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text_file(log)};
}

std::vector<std::string> all_stage_names() {
  std::vector<std::string> out;
  for (auto s : kAllStages) out.emplace_back(to_string(s));
  return out;
}

// Relative path -> bytes for every file under `root`.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_text_file(e.path().string());
  }
  return out;
}

RunResult run_all(const std::string& out_dir, std::size_t workers = 4) {
  TempDir cfg_dir;
  auto j = bundled_config(out_dir);
  j["workers"] = workers;
  auto cfg = load_config(write_config(cfg_dir, j));
  auto clients = make_clients(cfg, true);
  return run_pipeline(cfg, {std::begin(kAllStages), std::end(kAllStages)}, clients);
}

}  // namespace

TEST(Config, BundledIsValid) {
  auto check = validate_config(data_path("pipeline.json"));
  EXPECT_TRUE(check.ok());
  EXPECT_TRUE(check.warnings.empty());
  auto cfg = load_config(data_path("pipeline.json"));
  EXPECT_EQ(cfg.seed, 20240601u);
  EXPECT_TRUE(fs::path(cfg.corpus).is_absolute());
  EXPECT_EQ(cfg.holdout_k, 2u);
  EXPECT_EQ(cfg.dpo.beta, 0.01);
}

TEST(Config, NegativeBetaRejected) {
  TempDir dir;
  auto j = bundled_config(dir.file("out"));
  j["dpo"]["beta"] = -0.1;
  auto check = check_config(j, dir.path());
  ASSERT_FALSE(check.ok());
  EXPECT_NE(std::find(check.errors.begin(), check.errors.end(), "dpo: beta > 0"), check.errors.end());
  const auto path = write_config(dir, j);
  try {
    load_config(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
  auto r = run_cli("validate-config " + path, dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("dpo: beta > 0"), std::string::npos);
}

TEST(Config, UnknownKeyWarnsOnly) {
  TempDir dir;
  auto j = bundled_config(dir.file("out"));
  j["dpo"]["betta"] = 0.1;
  j["extra_section"] = 1;
  auto check = check_config(j, dir.path());
  EXPECT_TRUE(check.ok());
  EXPECT_EQ(check.warnings.size(), 2u);
  auto r = run_cli("validate-config " + write_config(dir, j), dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("warning: unknown key 'dpo.betta'"), std::string::npos);
}

TEST(Config, RequiredFieldsAndPaths) {
  TempDir dir;
  auto j = bundled_config(dir.file("out"));
  j.erase("seed");
  j["paths"]["corpus"] = dir.file("nope.jsonl");
  j["split"]["train_fraction"] = 1.0;
  auto check = check_config(j, dir.path());
  EXPECT_GE(check.errors.size(), 3u);
  EXPECT_THROW(validate_config(dir.file("missing.json")), Error);
  auto r = run_cli("validate-config " + dir.file("missing.json"), dir);
  EXPECT_EQ(r.code, 2);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  TempDir dir;
  auto j = read_json(data_path("pipeline.json"));
  fs::copy_file(data_path("mini_corpus.jsonl"), dir.file("mini_corpus.jsonl"));
  fs::copy_file(data_path("prompts.jsonl"), dir.file("prompts.jsonl"));
  fs::copy_file(data_path("math_solutions.jsonl"), dir.file("math_solutions.jsonl"));
  fs::copy_file(data_path("mock_script.json"), dir.file("mock_script.json"));
  auto cfg = load_config(write_config(dir, j));
  EXPECT_EQ(fs::path(cfg.corpus), dir.path() / "mini_corpus.jsonl");
}

TEST(Config, HashIgnoresOutputDirAndWorkers) {
  TempDir dir;
  auto a = bundled_config(dir.file("a"));
  auto b = bundled_config(dir.file("b"));
  b["workers"] = 1;
  auto c = bundled_config(dir.file("a"));
  c["seed"] = 1;
  const auto ha = load_config(write_config(dir, a, "a.json")).config_hash;
  EXPECT_EQ(ha, load_config(write_config(dir, b, "b.json")).config_hash);
  EXPECT_NE(ha, load_config(write_config(dir, c, "c.json")).config_hash);
  // Overrides are part of the hash.
  EXPECT_NE(ha, load_config(dir.file("a.json"), json{{"dpo", {{"steps", 5}}}}).config_hash);
}

TEST(Stages, NamesRoundTrip) {
  for (auto s : kAllStages) EXPECT_EQ(parse_stage(to_string(s)), s);
  EXPECT_THROW(parse_stage("bake"), Error);
  EXPECT_EQ(all_stage_names().size(), 10u);
}

TEST(RunPipeline, DependencyErrorNamesMissingStage) {
  TempDir dir;
  auto cfg = load_config(write_config(dir, bundled_config(dir.file("out"))));
  auto clients = make_clients(cfg, true);
  auto r = run_pipeline(cfg, {Stage::PairsRewrite}, clients);
  EXPECT_EQ(r.exit_code, kExitDependency);
  EXPECT_EQ(r.failed_stage, "pairs-rewrite");
  EXPECT_NE(r.message.find("classify"), std::string::npos);
  EXPECT_TRUE(r.executed.empty());

  auto cli = run_cli("run --mock --config " + dir.file("cfg.json") + " --stages pairs-rewrite", dir);
  EXPECT_EQ(cli.code, 3);
  EXPECT_NE(cli.output.find("classify"), std::string::npos);
}

TEST(RunPipeline, FullMockRunThenRerunSkips) {
  TempDir dir;
  auto first = run_all(dir.file("out"));
  ASSERT_EQ(first.exit_code, kExitOk) << first.message;
  EXPECT_EQ(first.executed, all_stage_names());
  auto manifest = read_json(dir.file("out/manifest.json"));
  EXPECT_EQ(manifest.at("stages").size(), 10u);
  for (const auto& name : all_stage_names()) {
    const auto& st = manifest.at("stages").at(name);
    EXPECT_TRUE(st.contains("outputs")) << name;
    EXPECT_TRUE(st.contains("config_hash")) << name;
  }
  for (const char* f : {"pairs_rewrite/pairs.jsonl", "pairs_reward/pairs.jsonl", "filter/ledger.jsonl",
                        "train_dpo/loss.jsonl", "eval/report.jsonl", "analyze/report.md"}) {
    EXPECT_TRUE(fs::exists(dir.file(std::string("out/") + f))) << f;
  }

  auto second = run_all(dir.file("out"));
  EXPECT_EQ(second.exit_code, kExitOk);
  EXPECT_TRUE(second.executed.empty());
  EXPECT_EQ(second.skipped, all_stage_names());
}

TEST(RunPipeline, TamperedOutputIsRebuilt) {
  TempDir dir;
  ASSERT_EQ(run_all(dir.file("out")).exit_code, kExitOk);
  const auto kept = dir.file("out/filter/kept.jsonl");
  const auto original = read_text_file(kept);
  write_text_file(kept, "");
  auto again = run_all(dir.file("out"));
  EXPECT_EQ(again.executed, std::vector<std::string>{"filter"});
  EXPECT_EQ(read_text_file(kept), original);
}

TEST(RunPipeline, ByteIdenticalAcrossDirsAndWorkers) {
  TempDir dir;
  ASSERT_EQ(run_all(dir.file("a"), 1).exit_code, kExitOk);
  ASSERT_EQ(run_all(dir.file("b"), 8).exit_code, kExitOk);
  auto a = snapshot(dir.file("a"));
  auto b = snapshot(dir.file("b"));
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, bytes] : a) {
    ASSERT_TRUE(b.count(name)) << name;
    EXPECT_EQ(bytes, b.at(name)) << name;
  }
}

TEST(Cli, RunAndSubcommands) {
  TempDir dir;
  write_config(dir, bundled_config(dir.file("out")));
  auto r = run_cli("run --mock --config " + dir.file("cfg.json") + " --stages ingest,classify", dir);
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("ran     ingest"), std::string::npos);
  EXPECT_NE(r.output.find("ran     classify"), std::string::npos);

  r = run_cli("synth-math --mock --in " + data_path("math_solutions.jsonl") + " --k 5 --seed 1 --out " +
                  dir.file("math.jsonl"),
              dir);
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_records<Conversation>(dir.file("math.jsonl")).size(), 5u);

  r = run_cli("synth-math --in " + data_path("math_solutions.jsonl") + " --k 46 --out " + dir.file("m2.jsonl"), dir);
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.output.find("InsufficientErroneous"), std::string::npos);

  EXPECT_EQ(run_cli("run --mock --config " + dir.file("cfg.json") + " --stages bake", dir).code, 2);
  EXPECT_EQ(run_cli("no-such-command", dir).code, 2);
  EXPECT_EQ(run_cli("--help", dir).code, 0);
}
