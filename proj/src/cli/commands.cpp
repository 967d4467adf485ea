#include "adcare/cli/commands.h"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include "json.hpp"

#include "adcare/cli/manifest.h"
#include "adcare/data/synthetic.h"
#include "adcare/encoder/checkpoint.h"
#include "adcare/error.h"

namespace adcare::cli {

namespace {

using json = nlohmann::ordered_json;
using training::TuneMode;

void print(const Context& ctx, const std::string& text) {
  if (ctx.text) *ctx.text << text << std::flush;
}

eval::RunSeeds seeds_of(const Context& ctx) { return eval::RunSeeds::from(ctx.config.seed); }

fusion::ArmKind arm_of(const Context& ctx) {
  return ctx.config.arm == "separated" ? fusion::ArmKind::separated : fusion::ArmKind::unified;
}

json read_json(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + "; run '" + producer + "' first");
  }
  try {
    return json::parse(data::read_text(path));
  } catch (const json::exception& e) {
    throw ParseError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { data::write_text(path, j.dump(2) + "\n"); }

std::vector<encoder::NamedArray> read_arrays(const fs::path& path, const char* producer) {
  if (!fs::exists(path)) throw DataError("missing " + path.string() + "; run '" + producer + "' first");
  return encoder::read_checkpoint(path);
}

std::vector<std::string> ids_of(std::span<const data::AnnotationRecord> records) {
  std::vector<std::string> out;
  for (const auto& r : records) out.push_back(r.video_id);
  return out;
}

std::string label_counts_text(std::span<const data::AnnotationRecord> records) {
  std::array<std::size_t, 3> n{};
  for (const auto& r : records) ++n[static_cast<std::size_t>(r.label)];
  char buf[128];
  std::snprintf(buf, sizeof buf, "positive %zu, negative %zu, ambiguous %zu", n[0], n[1], n[2]);
  return buf;
}

json label_counts_json(std::span<const data::AnnotationRecord> records) {
  json out = json::object();
  for (auto l : data::kLabels) out[data::to_string(l)] = 0;
  for (const auto& r : records) out[data::to_string(r.label)] = out[data::to_string(r.label)].get<std::size_t>() + 1;
  return out;
}

std::vector<data::SyntheticItem> load_corpus(const fs::path& dir) {
  const auto manifest = dir / "manifest.tsv";
  if (!fs::exists(manifest)) throw DataError("missing " + manifest.string() + "; run 'generate' first");
  std::vector<data::SyntheticItem> items;
  for (const auto& entry : data::read_manifest(manifest)) {
    items.push_back({data::parse_record(data::read_text(entry.record)), data::read_video(entry.video)});
  }
  return items;
}

std::vector<data::AnnotationRecord> pick(const std::map<std::string, const data::AnnotationRecord*>& by_id,
                                         const json& ids) {
  std::vector<data::AnnotationRecord> out;
  for (const auto& id : ids) {
    auto it = by_id.find(id.get<std::string>());
    if (it == by_id.end()) throw DataError("record " + id.get<std::string>() + " is not in the corpus");
    out.push_back(*it->second);
  }
  return out;
}

// Corpus, filter result and split as recorded on disk.
eval::PreparedCorpus load_prepared(const Context& ctx) {
  const Layout at{ctx.out};
  eval::PreparedCorpus c;
  c.items = load_corpus(at.corpus());
  std::map<std::string, const data::AnnotationRecord*> by_id;
  for (const auto& item : c.items) by_id[item.record.video_id] = &item.record;
  const auto v = read_json(at.validation(), "validate");
  c.filtered.retained = pick(by_id, v.at("retained"));
  const auto s = read_json(at.split(), "split");
  c.split.ratio = s.at("ratio").get<double>();
  c.split.train = pick(by_id, s.at("train"));
  c.split.validation = pick(by_id, s.at("validation"));
  return c;
}

fusion::VisualArm load_arm(const Context& ctx) {
  const auto& cfg = ctx.config.experiment;
  auto arm = fusion::make_arm(arm_of(ctx), eval::visual_config(cfg), seeds_of(ctx).encoder);
  std::vector<encoder::NamedArray> visual;
  for (auto& a : read_arrays(Layout{ctx.out}.encoder(), "prealign"))
    if (a.name.starts_with("encoder.visual.")) visual.push_back(std::move(a));
  encoder::restore(arm.encoder->parameters(), visual);
  arm.encoder->set_trainable(false);
  return arm;
}

struct Clips {
  std::vector<training::LabeledClip> train, validation;
};

Clips load_clips(const Context& ctx, const eval::PreparedCorpus& corpus) {
  const Layout at{ctx.out};
  const auto b = read_json(at.balance(), "balance");
  std::map<std::string, Tensor> features;
  for (auto& a : read_arrays(at.features(), "balance")) features[a.name] = Tensor::from(a.shape, std::move(a.data));
  auto feature = [&](const std::string& name) {
    auto it = features.find(name);
    if (it == features.end()) throw DataError("features file has no entry " + name);
    return it->second;
  };
  std::map<std::string, const data::AnnotationRecord*> by_id;
  for (const auto& r : corpus.split.train) by_id[r.video_id] = &r;
  Clips out;
  for (const auto& entry : b.at("train")) {
    const auto id = entry.at("id").get<std::string>();
    const auto source = entry.at("source").get<std::string>();
    auto it = by_id.find(source);
    if (it == by_id.end()) throw DataError("balanced clip " + id + " comes from unknown record " + source);
    training::LabeledClip clip{*it->second, feature("train/" + id), entry.at("synthetic").get<bool>()};
    clip.record.video_id = id;
    out.train.push_back(std::move(clip));
  }
  for (const auto& r : corpus.split.validation) out.validation.push_back({r, feature("validation/" + r.video_id), false});
  return out;
}

std::vector<NamedParameter> base_parameters(const decoder::VisionLanguageModel& model) {
  auto params = model.projection().parameters();
  for (auto& p : model.decoder().base_parameters()) params.push_back(std::move(p));
  return params;
}

std::unique_ptr<decoder::VisionLanguageModel> load_model(const Context& ctx, const fs::path& base,
                                                         const fs::path& adapter, const char* producer) {
  auto model = std::make_unique<decoder::VisionLanguageModel>(eval::model_config(ctx.config.experiment),
                                                              seeds_of(ctx).model);
  encoder::restore(base_parameters(*model), read_arrays(base, producer));
  if (!adapter.empty() && fs::exists(adapter)) {
    double alpha = 0.0;
    std::map<std::string, std::pair<Tensor, Tensor>> parts;
    for (auto& a : read_arrays(adapter, producer)) {
      if (a.name == "lora.alpha") {
        if (a.data.size() != 1) throw DataError("adapter file has a malformed alpha");
        alpha = a.data[0];
        continue;
      }
      const bool is_a = a.name.ends_with(".a");
      if (!a.name.starts_with("lora.") || (!is_a && !a.name.ends_with(".b"))) {
        throw DataError("unexpected array " + a.name + " in adapter file");
      }
      const auto target = a.name.substr(5, a.name.size() - 7);
      (is_a ? parts[target].first : parts[target].second) = Tensor::from(a.shape, std::move(a.data));
    }
    std::vector<decoder::LoraAdapter> adapters;
    for (auto& [target, ab] : parts) {
      if (!ab.first.defined() || !ab.second.defined()) throw DataError("adapter " + target + " is incomplete");
      const auto rank = ab.first.dim(0);
      adapters.push_back({target, ab.first, ab.second, rank, alpha});
    }
    model->decoder().attach(std::move(adapters));
  }
  return model;
}

void write_train_report(const fs::path& dir, const training::TrainReport& report, StageResult& result) {
  data::write_text(dir / "train.jsonl", report.to_jsonl());
  data::write_text(dir / "census.json", report.census_json());
  result.outputs.push_back(dir / "train.jsonl");
  result.outputs.push_back(dir / "census.json");
}

std::string census_text(const training::TrainReport& report) {
  std::string out;
  char buf[160];
  for (const auto& g : report.census) {
    std::snprintf(buf, sizeof buf, "  %-20s trainable %-5s changed %-5s max|delta| %.3g\n", g.group.c_str(),
                  g.trainable ? "yes" : "no", g.changed ? "yes" : "no", g.max_abs_delta);
    out += buf;
  }
  return out;
}

std::string loss_text(const training::TrainReport& report) {
  if (report.steps.empty()) return "no optimizer steps\n";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu steps, loss %.4f -> %.4f\n", report.steps.size(), report.steps.front().loss,
                report.steps.back().loss);
  return buf;
}

std::string config_digest(const PipelineConfig& config) {
  auto c = config;
  c.modes = {TuneMode::regular};
  return sha256_hex(config_to_ini(c));
}

fs::path marker(const Context& ctx, const std::string& name, const char* ext) {
  return Layout{ctx.out}.stages() / (name + ext);
}

bool stage_is_current(const Context& ctx, const std::string& name) {
  const auto path = marker(ctx, name, ".done");
  if (!fs::exists(path)) return false;
  try {
    const auto m = json::parse(data::read_text(path));
    if (m.at("config") != config_digest(ctx.config)) return false;
    for (const char* side : {"inputs", "outputs"})
      for (const auto& [file, hash] : m.at(side).items())
        if (digest(file) != hash.get<std::string>()) return false;
    return true;
  } catch (const json::exception&) {
    return false;
  }
}

std::map<std::string, std::string> digests(const std::vector<fs::path>& paths) {
  std::map<std::string, std::string> out;
  for (const auto& p : paths) out[p.generic_string()] = digest(p);
  return out;
}

// Runs a stage body, records manifest and markers, and rethrows failures.
StageResult stage(const Context& ctx, const std::string& name, const std::function<StageResult()>& body) {
  const auto started = std::chrono::steady_clock::now();
  RunManifest m;
  m.command = name;
  m.config_path = ctx.config_path.empty() ? "" : ctx.config_path.generic_string();
  m.seed = ctx.config.seed;
  m.git_describe = git_describe();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  fs::create_directories(Layout{ctx.out}.stages());
  fs::remove(marker(ctx, name, ".done"));
  try {
    auto result = body();
    m.inputs = digests(result.inputs);
    m.outputs = digests(result.outputs);
    m.wall_clock_seconds = elapsed();
    append_manifest(ctx.out, m);
    fs::remove(marker(ctx, name, ".failed"));
    write_json(marker(ctx, name, ".done"), json{{"config", config_digest(ctx.config)}, {"inputs", m.inputs}, {"outputs", m.outputs}});
    return result;
  } catch (const std::exception& e) {
    m.wall_clock_seconds = elapsed();
    m.exit_status = exit_code(e);
    m.error = e.what();
    append_manifest(ctx.out, m);
    data::write_text(marker(ctx, name, ".failed"), std::string(e.what()) + "\n");
    throw;
  }
}

const char* tuning_label(TuneMode mode) {
  switch (mode) {
    case TuneMode::frozen:
      return "pre-trained";
    case TuneMode::regular:
      return "regular";
    case TuneMode::lora:
      return "lora";
  }
  return "";
}

// Rebuilds results.json from whichever benchmark directories exist.
fs::path write_results(const Context& ctx) {
  const Layout at{ctx.out};
  json rows = json::array();
  for (auto mode : {TuneMode::frozen, TuneMode::regular, TuneMode::lora}) {
    const auto path = at.benchmark_dir(mode) / "result.json";
    if (!fs::exists(path)) continue;
    const auto r = read_json(path, "benchmark");
    rows.push_back({{"tuning_type", tuning_label(mode)}, {"accuracy", r.at("accuracy")}, {"score", r.at("mean_score")}});
  }
  write_json(at.results(), json{{"schema", "adcare.results/1"}, {"rows", rows}});
  return at.results();
}

}  // namespace

int exit_code(const std::exception& e) { return dynamic_cast<const Error*>(&e) ? 2 : 1; }

std::unique_ptr<eval::Judge> make_judge(const PipelineConfig& config) {
  if (config.judge == "external") return std::make_unique<eval::ExternalJudge>(config.judge_command);
  return std::make_unique<eval::RuleJudge>();
}

StageResult cmd_generate(const Context& ctx, std::optional<std::size_t> n) {
  auto cfg = ctx.config.experiment.corpus;
  if (n) cfg.n = *n;
  const auto items = data::generate_synthetic_corpus(cfg, seeds_of(ctx).corpus);
  const auto dir = Layout{ctx.out}.corpus();
  if (fs::exists(dir)) fs::remove_all(dir);
  data::write_corpus(dir, items);
  std::vector<data::AnnotationRecord> records;
  for (const auto& item : items) records.push_back(item.record);
  print(ctx, "generated " + std::to_string(items.size()) + " clips (" + label_counts_text(records) + ") in " +
                 dir.string() + "\n");
  return {{}, {dir}};
}

StageResult cmd_validate(const Context& ctx, const fs::path& corpus_dir) {
  std::vector<data::AnnotationRecord> records;
  for (const auto& item : load_corpus(corpus_dir)) records.push_back(item.record);
  const auto result = data::validate_and_filter(records);
  json rejected = json::array();
  std::map<std::string, std::size_t> reasons;
  for (const auto& r : result.rejected) {
    rejected.push_back({{"video_id", r.video_id}, {"reason", r.reason}, {"detail", r.detail}});
    ++reasons[r.reason];
  }
  const auto path = Layout{ctx.out}.validation();
  write_json(path, json{{"schema", "adcare.validation/1"},
                        {"retained", ids_of(result.retained)},
                        {"counts", label_counts_json(result.retained)},
                        {"rejected", rejected}});
  std::string text = "retained " + std::to_string(result.retained.size()) + " (" +
                     label_counts_text(result.retained) + "), rejected " + std::to_string(result.rejected.size()) +
                     "\n";
  for (const auto& [reason, count] : reasons) text += "  " + reason + ": " + std::to_string(count) + "\n";
  data::write_text(path.parent_path() / "validate.txt", text);
  print(ctx, text);
  return {{corpus_dir}, {path, path.parent_path() / "validate.txt"}};
}

StageResult cmd_split(const Context& ctx) {
  const Layout at{ctx.out};
  auto items = load_corpus(at.corpus());
  std::map<std::string, const data::AnnotationRecord*> by_id;
  for (const auto& item : items) by_id[item.record.video_id] = &item.record;
  const auto retained = pick(by_id, read_json(at.validation(), "validate").at("retained"));
  const auto s = data::split(retained, ctx.config.experiment.split_ratio, seeds_of(ctx).split);
  write_json(at.split(), json{{"schema", "adcare.split/1"},
                              {"ratio", s.ratio},
                              {"train", ids_of(s.train)},
                              {"validation", ids_of(s.validation)}});
  const std::string text = "train " + std::to_string(s.train.size()) + " (" + label_counts_text(s.train) +
                           ")\nvalidation " + std::to_string(s.validation.size()) + " (" +
                           label_counts_text(s.validation) + ")\n";
  data::write_text(at.out / "split.txt", text);
  print(ctx, text);
  return {{at.corpus(), at.validation()}, {at.split(), at.out / "split.txt"}};
}

StageResult cmd_prealign(const Context& ctx) {
  const Layout at{ctx.out};
  const auto corpus = load_prepared(ctx);
  const auto built = eval::build_arm(arm_of(ctx), ctx.config.experiment, corpus, ctx.config.seed);
  auto arrays = encoder::snapshot(built.arm.encoder->parameters());
  for (auto& a : encoder::snapshot(built.text->parameters())) arrays.push_back(std::move(a));
  fs::create_directories(at.encoder().parent_path());
  encoder::write_checkpoint(at.encoder(), arrays);
  std::string losses;
  for (std::size_t i = 0; i < built.prealign_losses.size(); ++i) {
    losses += json{{"step", i + 1}, {"loss", built.prealign_losses[i]}}.dump() + "\n";
  }
  data::write_text(at.prealign_losses(), losses);
  if (built.prealign_losses.empty()) {
    print(ctx, "separated arm: encoder kept at its random initialization\n");
  } else {
    char buf[128];
    std::snprintf(buf, sizeof buf, "pre-aligned %zu steps, loss %.4f -> %.4f\n", built.prealign_losses.size(),
                  built.prealign_losses.front(), built.prealign_losses.back());
    print(ctx, buf);
  }
  return {{at.corpus(), at.split()}, {at.encoder(), at.prealign_losses()}};
}

StageResult cmd_balance(const Context& ctx) {
  const Layout at{ctx.out};
  const auto& cfg = ctx.config.experiment;
  const auto corpus = load_prepared(ctx);
  const auto arm = load_arm(ctx);
  auto train = eval::featurize(arm, corpus.split.train, corpus);
  const auto validation = eval::featurize(arm, corpus.split.validation, corpus);
  std::vector<data::AnnotationRecord> before;
  for (const auto& c : train) before.push_back(c.record);
  if (cfg.balance) train = eval::balance_clips(train, cfg.balancing, seeds_of(ctx).balance);

  std::vector<encoder::NamedArray> arrays;
  json entries = json::array();
  std::vector<data::AnnotationRecord> after;
  for (const auto& c : train) {
    const auto& id = c.record.video_id;
    arrays.push_back({"train/" + id, c.visual.shape(), {c.visual.data().begin(), c.visual.data().end()}});
    entries.push_back({{"id", id},
                       {"label", data::to_string(c.record.label)},
                       {"synthetic", c.synthetic},
                       {"source", c.synthetic ? id.substr(0, id.find("~syn")) : id}});
    after.push_back(c.record);
  }
  for (const auto& c : validation) {
    arrays.push_back(
        {"validation/" + c.record.video_id, c.visual.shape(), {c.visual.data().begin(), c.visual.data().end()}});
  }
  fs::create_directories(at.features().parent_path());
  encoder::write_checkpoint(at.features(), arrays);
  write_json(at.balance(), json{{"schema", "adcare.balance/1"},
                                {"enabled", cfg.balance},
                                {"before", label_counts_json(before)},
                                {"after", label_counts_json(after)},
                                {"train", entries},
                                {"validation", ids_of(corpus.split.validation)}});
  const std::string text = "before " + label_counts_text(before) + "\nafter  " + label_counts_text(after) + "\n";
  data::write_text(at.balance().parent_path() / "balance.txt", text);
  print(ctx, text);
  return {{at.corpus(), at.split(), at.encoder()}, {at.features(), at.balance(), at.balance().parent_path() / "balance.txt"}};
}

StageResult cmd_pretrain(const Context& ctx) {
  const Layout at{ctx.out};
  const auto corpus = load_prepared(ctx);
  const auto clips = load_clips(ctx, corpus);
  const auto arm = load_arm(ctx);
  decoder::VisionLanguageModel model(eval::model_config(ctx.config.experiment), seeds_of(ctx).model);
  auto cfg = ctx.config.experiment.pretrain;
  cfg.stage = training::Stage::pretrain;
  cfg.mode = TuneMode::regular;
  cfg.seed = seeds_of(ctx).train;
  const auto report = training::pretrain(
      model, training::pretrain_examples(clips.train, decoder::Vocabulary::standard()), cfg, arm.encoder->parameters());
  fs::create_directories(at.pretrained().parent_path());
  encoder::write_checkpoint(at.pretrained(), encoder::snapshot(base_parameters(model)));
  StageResult result{{at.features(), at.balance(), at.encoder()}, {at.pretrained()}};
  write_train_report(at.pretrained().parent_path(), report, result);
  print(ctx, "pre-training: " + loss_text(report) + census_text(report));
  return result;
}

StageResult cmd_finetune(const Context& ctx, TuneMode mode) {
  const Layout at{ctx.out};
  const auto corpus = load_prepared(ctx);
  const auto clips = load_clips(ctx, corpus);
  const auto arm = load_arm(ctx);
  auto model = load_model(ctx, at.pretrained(), {}, "pretrain");
  auto cfg = ctx.config.experiment.finetune;
  cfg.stage = training::Stage::finetune;
  cfg.mode = mode;
  cfg.seed = seeds_of(ctx).train + 1;
  const auto data = training::finetune_examples(clips.train, decoder::Vocabulary::standard(),
                                                ctx.config.experiment.chat_rounds, seeds_of(ctx).train);
  const auto report = training::finetune(*model, data, cfg, arm.encoder->parameters());

  const auto dir = at.finetune_dir(mode);
  if (fs::exists(dir)) fs::remove_all(dir);
  fs::create_directories(dir);
  StageResult result{{at.features(), at.balance(), at.pretrained()}, {dir / "base.adcv"}};
  encoder::write_checkpoint(dir / "base.adcv", encoder::snapshot(base_parameters(*model)));
  if (mode == TuneMode::lora) {
    auto arrays = encoder::snapshot(model->decoder().adapter_parameters());
    arrays.push_back({"lora.alpha", {1}, {cfg.lora_alpha}});
    encoder::write_checkpoint(dir / "adapter.adcv", arrays);
    result.outputs.push_back(dir / "adapter.adcv");
  }
  write_train_report(dir, report, result);
  print(ctx, std::string("fine-tuning (") + training::to_string(mode) + "): " + loss_text(report) +
                 census_text(report));
  return result;
}

StageResult cmd_benchmark(const Context& ctx, TuneMode mode) {
  const Layout at{ctx.out};
  const auto corpus = load_prepared(ctx);
  const auto clips = load_clips(ctx, corpus);
  const auto dir = at.finetune_dir(mode);
  const auto model = load_model(ctx, dir / "base.adcv", dir / "adapter.adcv", "finetune");
  const auto judge = make_judge(ctx.config);
  const auto result = eval::evaluate_model(*model, clips.validation, ctx.config.experiment, *judge);

  const auto out = at.benchmark_dir(mode);
  fs::create_directories(out);
  data::write_text(out / "result.json", eval::result_json(result));
  data::write_text(out / "ledger.jsonl", eval::ledger_jsonl(result));
  data::write_text(out / "result.txt", eval::result_table(result));
  // results.json is shared by every mode, so it is not one of this stage's outputs
  write_results(ctx);
  print(ctx, std::string("benchmark (") + training::to_string(mode) + ")\n" + eval::result_table(result));
  return {{dir, at.features()}, {out / "result.json", out / "ledger.jsonl", out / "result.txt"}};
}

StageResult cmd_ablate(const Context& ctx) {
  const auto judge = make_judge(ctx.config);
  auto cfg = ctx.config.experiment;
  cfg.finetune.mode = ctx.config.modes.front();
  const auto table = eval::run_ablation(ctx.config.ablation_seeds, cfg, cfg, *judge);
  const auto json_path = ctx.out / "ablation.json";
  const auto text_path = ctx.out / "ablation.txt";
  fs::create_directories(ctx.out);
  data::write_text(json_path, eval::ablation_json(table));
  data::write_text(text_path, eval::ablation_text(table));
  print(ctx, eval::ablation_text(table));
  return {{}, {json_path, text_path}};
}

Report render_report(const std::string& ledger_json) {
  json j;
  try {
    j = json::parse(ledger_json);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed results ledger: ") + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || j["schema"] != "adcare.results/1" || !j.contains("rows") ||
      !j["rows"].is_array()) {
    throw ParseError("results ledger does not follow schema adcare.results/1");
  }
  const std::vector<std::string> order{"pre-trained", "regular", "lora"};
  std::map<std::string, std::pair<double, double>> rows;
  for (const auto& row : j["rows"]) {
    if (!row.is_object() || !row.contains("tuning_type") || !row["tuning_type"].is_string() ||
        !row.contains("accuracy") || !row["accuracy"].is_number() || !row.contains("score") ||
        !row["score"].is_number()) {
      throw ParseError("results row must have tuning_type, accuracy and score");
    }
    const auto type = row["tuning_type"].get<std::string>();
    if (std::find(order.begin(), order.end(), type) == order.end()) {
      throw ParseError("unknown tuning type '" + type + "'");
    }
    if (!rows.emplace(type, std::make_pair(row["accuracy"].get<double>(), row["score"].get<double>())).second) {
      throw ParseError("tuning type '" + type + "' appears twice");
    }
  }
  Report out;
  json normalized = json::array();
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s  %12s  %6s\n", "Tuning Type", "Accuracy (%)", "Score");
  out.text = buf;
  for (const auto& type : order) {
    auto it = rows.find(type);
    if (it == rows.end()) continue;
    std::snprintf(buf, sizeof buf, "%-12s  %12.1f  %6.2f\n", type.c_str(), it->second.first, it->second.second);
    out.text += buf;
    normalized.push_back({{"tuning_type", type}, {"accuracy", it->second.first}, {"score", it->second.second}});
  }
  out.json = json{{"schema", "adcare.report/1"}, {"rows", normalized}}.dump(2) + "\n";
  return out;
}

StageResult cmd_report(const Context& ctx, const fs::path& ledger) {
  if (!fs::exists(ledger)) throw DataError("results ledger not found: " + ledger.string());
  const auto report = render_report(data::read_text(ledger));
  fs::create_directories(ctx.out);
  data::write_text(ctx.out / "report.json", report.json);
  data::write_text(ctx.out / "report.txt", report.text);
  print(ctx, report.text);
  return {{ledger}, {ctx.out / "report.json", ctx.out / "report.txt"}};
}

StageResult cmd_pipeline(const Context& ctx) {
  const Layout at{ctx.out};
  StageResult all;
  auto step = [&](const std::string& name, const std::function<StageResult()>& body) {
    if (stage_is_current(ctx, name)) {
      print(ctx, "[" + name + "] up to date, skipped\n");
      return;
    }
    print(ctx, "[" + name + "]\n");
    auto r = stage(ctx, name, body);
    all.outputs.insert(all.outputs.end(), r.outputs.begin(), r.outputs.end());
  };
  step("generate", [&] { return cmd_generate(ctx, std::nullopt); });
  step("validate", [&] { return cmd_validate(ctx, at.corpus()); });
  step("split", [&] { return cmd_split(ctx); });
  step("prealign", [&] { return cmd_prealign(ctx); });
  step("balance", [&] { return cmd_balance(ctx); });
  step("pretrain", [&] { return cmd_pretrain(ctx); });
  for (auto mode : ctx.config.modes) {
    const std::string m = training::to_string(mode);
    step("finetune-" + m, [&] { return cmd_finetune(ctx, mode); });
    step("benchmark-" + m, [&] { return cmd_benchmark(ctx, mode); });
  }
  const auto report = cmd_report(ctx, at.results());
  all.outputs.insert(all.outputs.end(), report.outputs.begin(), report.outputs.end());
  return all;
}

int run_stage(const Context& ctx, const std::string& name, const std::function<StageResult()>& body) {
  try {
    stage(ctx, name, body);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  }
}

}  // namespace adcare::cli
