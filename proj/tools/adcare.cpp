#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "adcare/cli/commands.h"
#include "adcare/cli/manifest.h"
#include "adcare/error.h"

using namespace adcare;
using namespace adcare::cli;

int main(int argc, char** argv) {
  CLI::App app{"Medication-adherence video QA: data, training and evaluation pipeline", "adcare"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  app.add_option("--config", config_path, "INI config file (defaults apply when omitted)");
  app.add_option("--seed", seed, "run seed, overrides [run] seed");
  app.add_option("--out", out, "output directory")->capture_default_str();

  std::optional<std::size_t> n;
  auto* generate = app.add_subcommand("generate", "render a synthetic corpus");
  generate->add_option("--n", n, "number of clips, overrides [corpus] n");

  std::string corpus_dir;
  auto* validate = app.add_subcommand("validate", "apply the unanimity and schema filter");
  validate->add_option("--corpus", corpus_dir, "corpus directory (default <out>/corpus)");

  auto* split = app.add_subcommand("split", "patient-disjoint train/validation split");
  auto* prealign = app.add_subcommand("prealign", "align the visual encoder with captions");
  auto* balance = app.add_subcommand("balance", "encode clips and rebalance the training split");
  auto* pretrain = app.add_subcommand("pretrain", "train the projection on captions");

  std::string mode_text;
  auto* finetune = app.add_subcommand("finetune", "fine-tune from the pre-trained weights");
  finetune->add_option("--mode", mode_text, "frozen, regular or lora (default: first of [run] modes)");
  auto* benchmark = app.add_subcommand("benchmark", "score a fine-tuned model on the validation split");
  benchmark->add_option("--mode", mode_text, "which fine-tuned model to score");
  auto* pipeline = app.add_subcommand("pipeline", "run every stage, resuming completed ones");
  pipeline->add_option("--mode", mode_text, "only this tuning mode instead of [run] modes");

  auto* ablate = app.add_subcommand("ablate", "unified versus separated encoder over several seeds");

  std::string ledger;
  auto* report = app.add_subcommand("report", "render a results ledger as a table");
  report->add_option("--ledger", ledger, "results ledger (default <out>/results.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  auto* command = app.get_subcommands().front();

  Context ctx;
  ctx.config_path = config_path;
  ctx.out = out;
  ctx.text = &std::cout;
  try {
    if (!config_path.empty()) ctx.config = load_config(config_path);
    if (seed) ctx.config.seed = *seed;
    if (!mode_text.empty()) {
      const auto mode = training::parse_mode(mode_text);
      if (command == pipeline) {
        ctx.config.modes = {mode};
      } else {
        ctx.config.modes.insert(ctx.config.modes.begin(), mode);
      }
    }
    cli::validate(ctx.config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    RunManifest m;
    m.command = command->get_name();
    m.config_path = config_path;
    m.seed = seed.value_or(ctx.config.seed);
    m.git_describe = git_describe();
    m.exit_status = exit_code(e);
    m.error = e.what();
    try {
      append_manifest(ctx.out, m);
    } catch (const std::exception&) {
    }
    return m.exit_status;
  }

  const auto mode = ctx.config.modes.front();
  const std::string name = command->get_name();
  if (command == generate) return run_stage(ctx, name, [&] { return cmd_generate(ctx, n); });
  if (command == validate) {
    const fs::path dir = corpus_dir.empty() ? Layout{ctx.out}.corpus() : fs::path(corpus_dir);
    return run_stage(ctx, name, [&] { return cmd_validate(ctx, dir); });
  }
  if (command == split) return run_stage(ctx, name, [&] { return cmd_split(ctx); });
  if (command == prealign) return run_stage(ctx, name, [&] { return cmd_prealign(ctx); });
  if (command == balance) return run_stage(ctx, name, [&] { return cmd_balance(ctx); });
  if (command == pretrain) return run_stage(ctx, name, [&] { return cmd_pretrain(ctx); });
  if (command == finetune) {
    return run_stage(ctx, name + "-" + training::to_string(mode), [&] { return cmd_finetune(ctx, mode); });
  }
  if (command == benchmark) {
    return run_stage(ctx, name + "-" + training::to_string(mode), [&] { return cmd_benchmark(ctx, mode); });
  }
  if (command == pipeline) return run_stage(ctx, name, [&] { return cmd_pipeline(ctx); });
  if (command == ablate) return run_stage(ctx, name, [&] { return cmd_ablate(ctx); });
  const fs::path path = ledger.empty() ? Layout{ctx.out}.results() : fs::path(ledger);
  return run_stage(ctx, name, [&] { return cmd_report(ctx, path); });
}
