#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adcare/eval/experiment.h"

namespace adcare::cli {

/// Everything a run needs. Loaded from an INI file; keys that are absent keep
/// their defaults, unknown sections or keys are rejected.
struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string arm = "unified";
  // Tuning modes fine-tuned and benchmarked by the pipeline.
  std::vector<training::TuneMode> modes{training::TuneMode::regular};
  // "rule" or "external"; the external judge runs judge_command.
  std::string judge = "rule";
  std::string judge_command;
  std::vector<std::uint64_t> ablation_seeds{1, 2, 3, 4, 5};
  eval::ExperimentConfig experiment;
};

PipelineConfig parse_config(const std::string& ini_text);
PipelineConfig load_config(const std::filesystem::path& path);
// Writes every key, so parse_config(config_to_ini(c)) reproduces c.
std::string config_to_ini(const PipelineConfig& config);

// Throws ConfigError for values no stage can run with.
void validate(const PipelineConfig& config);

bool operator==(const training::TrainConfig& a, const training::TrainConfig& b);
bool same_config(const PipelineConfig& a, const PipelineConfig& b);

}  // namespace adcare::cli
