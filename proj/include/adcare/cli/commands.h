#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adcare/cli/config.h"
#include "adcare/eval/judge.h"

namespace adcare::cli {

namespace fs = std::filesystem;

struct Context {
  PipelineConfig config;
  fs::path config_path;  // empty when running on built-in defaults
  fs::path out = "out";
  std::ostream* text = nullptr;  // human-readable output; null to stay quiet
};

// Artifact locations under the output directory.
struct Layout {
  fs::path out;

  fs::path corpus() const { return out / "corpus"; }
  fs::path validation() const { return out / "validate.json"; }
  fs::path split() const { return out / "split.json"; }
  fs::path encoder() const { return out / "prealign" / "encoder.adcv"; }
  fs::path prealign_losses() const { return out / "prealign" / "losses.jsonl"; }
  fs::path features() const { return out / "balance" / "features.adcv"; }
  fs::path balance() const { return out / "balance" / "balance.json"; }
  fs::path pretrained() const { return out / "pretrain" / "model.adcv"; }
  fs::path finetune_dir(training::TuneMode mode) const { return out / "finetune" / training::to_string(mode); }
  fs::path benchmark_dir(training::TuneMode mode) const { return out / "benchmark" / training::to_string(mode); }
  fs::path results() const { return out / "results.json"; }
  fs::path stages() const { return out / "stages"; }
};

// Paths a stage read and wrote; recorded in its manifest with digests.
struct StageResult {
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
};

StageResult cmd_generate(const Context& ctx, std::optional<std::size_t> n);
StageResult cmd_validate(const Context& ctx, const fs::path& corpus_dir);
StageResult cmd_split(const Context& ctx);
StageResult cmd_prealign(const Context& ctx);
StageResult cmd_balance(const Context& ctx);
StageResult cmd_pretrain(const Context& ctx);
StageResult cmd_finetune(const Context& ctx, training::TuneMode mode);
StageResult cmd_benchmark(const Context& ctx, training::TuneMode mode);
StageResult cmd_ablate(const Context& ctx);
StageResult cmd_report(const Context& ctx, const fs::path& ledger);

/// generate, validate, split, prealign, balance, pretrain, then finetune and
/// benchmark for each configured mode. Stages whose completion marker matches
/// the current config and whose outputs are unchanged are skipped.
StageResult cmd_pipeline(const Context& ctx);

/// Tuning-type table rendered from a results ledger. Throws ParseError when the
/// ledger does not follow the adcare.results/1 schema.
struct Report {
  std::string json;
  std::string text;
};
Report render_report(const std::string& ledger_json);

std::unique_ptr<eval::Judge> make_judge(const PipelineConfig& config);

/// Runs one stage: writes its manifest line and, on success, a completion
/// marker under stages/; on failure a failure marker holding the message.
/// Returns the process exit code (0 ok, 1 runtime failure, 2 config/contract).
int run_stage(const Context& ctx, const std::string& name, const std::function<StageResult()>& body);

int exit_code(const std::exception& e);

}  // namespace adcare::cli
