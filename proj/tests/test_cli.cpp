#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "support.hpp"
#include "toolpose/commands.hpp"
#include "toolpose/scene.hpp"

using namespace toolpose;
namespace fs = std::filesystem;

namespace {

int run_binary(const std::string& args) {
  const std::string cmd = std::string(TOOLPOSE_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// simgen, estimate, evaluate, adapt and losses into `root`.
void pipeline(const fs::path& root, std::uint64_t seed) {
  REQUIRE(cmd_simgen({std::nullopt, seed, 8, root / "data"}) == kExitOk);
  REQUIRE(cmd_estimate({root / "data", std::nullopt, seed, 0.5, root / "pred.jsonl"}) == kExitOk);
  REQUIRE(cmd_evaluate({root / "data", root / "pred.jsonl", std::nullopt, root / "report.json"}) == kExitOk);
  REQUIRE(cmd_adapt({root / "data", std::nullopt, seed, 0.5, 1, std::nullopt, std::nullopt, root / "adapt"}) == kExitOk);
  REQUIRE(cmd_losses({root / "oracle.jsonl", root / "data", std::nullopt, true, root / "unused.json"}) == kExitOk);
  REQUIRE(cmd_losses({root / "oracle.jsonl", root / "data", std::nullopt, false, root / "losses.json"}) == kExitOk);
}

}  // namespace

TEST_CASE("missing inputs are validation errors") {
  testing::TempDir dir("cli");
  const fs::path nowhere = dir / "missing";
  CHECK(cmd_simgen({nowhere / "cfg.json", std::nullopt, std::nullopt, dir / "out"}) == kExitValidation);
  CHECK(cmd_estimate({nowhere, std::nullopt, std::nullopt, std::nullopt, dir / "p.jsonl"}) == kExitValidation);
  CHECK(cmd_evaluate({nowhere, nowhere / "p.jsonl", std::nullopt, dir / "r.json"}) == kExitValidation);
  CHECK(cmd_adapt({nowhere, std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                   dir / "a"}) == kExitValidation);
  CHECK(cmd_losses({nowhere / "p.jsonl", nowhere, std::nullopt, false, dir / "l.json"}) == kExitValidation);
}

TEST_CASE("bad configs are validation errors") {
  testing::TempDir dir("cli");
  testing::spit(dir / "unknown.json", R"({"seed": 1, "nonsense": 2})");
  testing::spit(dir / "broken.json", R"({"seed": )");
  testing::spit(dir / "range.json", R"({"z_min": 0.9, "z_max": 0.5})");
  for (const char* name : {"unknown.json", "broken.json", "range.json"})
    CHECK(cmd_simgen({dir / name, std::nullopt, std::nullopt, dir / "out"}) == kExitValidation);
}

TEST_CASE("binary exit codes") {
  testing::TempDir dir("cli");
  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("") == kExitValidation);
  CHECK(run_binary("frobnicate") == kExitValidation);
  CHECK(run_binary("simgen") == kExitValidation);
  CHECK(run_binary("estimate " + (dir / "missing").string() + " --out " + (dir / "p.jsonl").string()) ==
        kExitValidation);
  CHECK(run_binary("--jobs 1 simgen --frames 2 --seed 4 --out " + (dir / "d").string()) == kExitOk);
  CHECK(fs::exists(dir / "d" / "scene_gt.json"));
  CHECK(fs::exists(dir / "d" / "effective_config.json"));
}

TEST_CASE("pipeline outputs and reports") {
  testing::TempDir dir("cli");
  pipeline(dir.path(), 12);
  const auto report = read_json_file(dir / "report.json");
  CHECK(report.at("version").get<std::string>() == "0.1.0");
  CHECK(report.at("config_hash").get<std::string>().size() == 16);
  CHECK(report.at("pose_ap").at("mean").get<double>() >= 0.9);
  CHECK(fs::exists(dir / "report.txt"));
  CHECK(fs::exists(dir / "pred.config.json"));
  CHECK(fs::exists(dir / "adapt" / "metrics.json"));
  CHECK(fs::exists(dir / "adapt" / "effective_config.json"));
  CHECK(fs::exists(dir / "adapt" / "round_1" / "pseudo_labels.json"));
  const auto losses = read_json_file(dir / "losses.json");
  CHECK(losses.at("mean").at("total").get<double>() < 1e-9);
  CHECK(losses.at("count").get<int>() > 0);
}

TEST_CASE("effective config snapshot reproduces the dataset") {
  testing::TempDir dir("cli");
  REQUIRE(cmd_simgen({std::nullopt, 21, 4, dir / "a"}) == kExitOk);
  REQUIRE(cmd_simgen({dir / "a" / "effective_config.json", std::nullopt, std::nullopt, dir / "b"}) == kExitOk);
  CHECK(testing::slurp(dir / "a" / "scene_gt.json") == testing::slurp(dir / "b" / "scene_gt.json"));
}

TEST_CASE("re-running with the same seed is byte-identical") {
  testing::TempDir dir("cli");
  const fs::path run = dir / "run";
  pipeline(run, 5);
  fs::rename(run, dir / "first");
  pipeline(run, 5);
  std::string diff;
  CHECK_MESSAGE(testing::trees_identical(dir / "first", run, &diff), diff);

  fs::remove_all(run);
  pipeline(run, 6);
  CHECK_FALSE(testing::trees_identical(dir / "first", run));
}

TEST_CASE("config hash is stable") {
  const nlohmann::json a = {{"x", 1}, {"y", {1, 2}}};
  CHECK(config_hash(a) == config_hash(nlohmann::json::parse(a.dump())));
  CHECK(config_hash(a) != config_hash(nlohmann::json{{"x", 2}, {"y", {1, 2}}}));
}
