#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace toolpose {

namespace fs = std::filesystem;

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

struct SimgenArgs {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> frames;
  fs::path out;
};

struct EstimateArgs {
  fs::path dataset;
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_sigma;
  fs::path out;  // JSON-lines predictions
};

struct EvaluateArgs {
  fs::path dataset;
  fs::path predictions;
  std::optional<fs::path> config;
  fs::path out;  // JSON report; a .txt twin is written beside it
};

struct AdaptArgs {
  fs::path dataset;
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_sigma;
  std::optional<int> rounds;
  std::optional<fs::path> detections;
  std::optional<fs::path> estimates;
  fs::path out;
};

struct LossesArgs {
  fs::path predictions;
  fs::path dataset;
  std::optional<fs::path> config;  // loss weights
  bool emit_oracle = false;        // write ground-truth-perfect predictions instead of scoring
  fs::path out;
};

// Each command returns an exit code; errors are reported on stderr.
int cmd_simgen(const SimgenArgs& args);
int cmd_estimate(const EstimateArgs& args);
int cmd_evaluate(const EvaluateArgs& args);
int cmd_adapt(const AdaptArgs& args);
int cmd_losses(const LossesArgs& args);

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

}  // namespace toolpose
