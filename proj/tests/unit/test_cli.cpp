#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "adcare/cli/commands.h"
#include "adcare/cli/config.h"
#include "adcare/cli/manifest.h"
#include "adcare/data/annotation.h"
#include "adcare/data/synthetic.h"
#include "adcare/error.h"

using namespace adcare;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(ADCARE_BIN) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            (std::string("adcare_cli_") + info->test_suite_name() + "_" + info->name() + "_" +
             std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }

 private:
  fs::path path_;
};

std::string source(const std::string& rel) { return (fs::path(ADCARE_SOURCE_DIR) / rel).string(); }

std::string slurp(const fs::path& p) { return data::read_text(p); }

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST(CliGenerate, SameSeedGivesIdenticalCorpus) {
  TempDir tmp;
  const auto a = run("--seed 7 --out " + (tmp / "a") + " generate --n 50");
  const auto b = run("--seed 7 --out " + (tmp / "b") + " generate --n 50");
  ASSERT_EQ(a.status, 0) << a.output;
  ASSERT_EQ(b.status, 0) << b.output;
  EXPECT_EQ(cli::digest(tmp.path() / "a" / "corpus"), cli::digest(tmp.path() / "b" / "corpus"));
  EXPECT_FALSE(cli::digest(tmp.path() / "a" / "corpus").empty());

  const auto c = run("--seed 8 --out " + (tmp / "c") + " generate --n 50");
  ASSERT_EQ(c.status, 0);
  EXPECT_NE(cli::digest(tmp.path() / "a" / "corpus"), cli::digest(tmp.path() / "c" / "corpus"));
}

TEST(CliGenerate, DefaultDistributionCounts) {
  TempDir tmp;
  ASSERT_EQ(run("--out " + (tmp / "o") + " generate --n 50").status, 0);
  std::array<int, 3> n{};
  for (const auto& entry : fs::directory_iterator(tmp.path() / "o" / "corpus" / "records")) {
    const auto r = data::parse_record(slurp(entry.path()));
    ++n[static_cast<std::size_t>(r.label)];
  }
  // 50 x (0.60, 0.28, 0.12)
  EXPECT_EQ(n[static_cast<std::size_t>(data::Label::positive)], 30);
  EXPECT_EQ(n[static_cast<std::size_t>(data::Label::negative)], 14);
  EXPECT_EQ(n[static_cast<std::size_t>(data::Label::ambiguous)], 6);
}

TEST(CliGenerate, TooFewClipsExitsTwo) {
  TempDir tmp;
  const auto r = run("--out " + (tmp / "o") + " generate --n 5");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("error:"), std::string::npos);
  EXPECT_FALSE(fs::exists(tmp.path() / "o" / "corpus"));
}

TEST(CliArgs, UnknownFlagAndMissingSubcommandExitTwo) {
  EXPECT_EQ(run("generate --bogus 1").status, 2);
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("--help").status, 0);
}

TEST(CliArgs, BadModeAndBadConfigExitTwo) {
  TempDir tmp;
  EXPECT_EQ(run("--out " + (tmp / "o") + " finetune --mode sideways").status, 2);
  std::ofstream(tmp / "bad.ini") << "[corpus]\nnot_a_key = 3\n";
  EXPECT_EQ(run("--config " + (tmp / "bad.ini") + " --out " + (tmp / "o") + " generate").status, 2);
  EXPECT_EQ(run("--config " + (tmp / "missing.ini") + " --out " + (tmp / "o") + " generate").status, 2);
}

TEST(CliArgs, StageWithoutInputsFailsWithHint) {
  TempDir tmp;
  const auto r = run("--out " + (tmp / "o") + " split");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("first"), std::string::npos) << r.output;
}

TEST(CliReport, EmptyLedgerGivesHeaderOnly) {
  TempDir tmp;
  std::ofstream(tmp / "empty.json") << R"({"schema": "adcare.results/1", "rows": []})";
  const auto r = run("--out " + (tmp / "o") + " report --ledger " + (tmp / "empty.json"));
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(r.output, "Tuning Type   Accuracy (%)   Score\n");
  EXPECT_EQ(slurp(tmp.path() / "o" / "report.txt"), r.output);
}

TEST(CliReport, FixtureMatchesGoldenTextAndRowOrder) {
  TempDir tmp;
  const auto r = run("--out " + (tmp / "o") + " report --ledger " + source("tests/fixtures/results_ledger.json"));
  ASSERT_EQ(r.status, 0) << r.output;
  const auto golden = slurp(source("tests/fixtures/report_golden.txt"));
  EXPECT_EQ(r.output, golden);
  EXPECT_EQ(slurp(tmp.path() / "o" / "report.txt"), golden);

  const auto j = slurp(tmp.path() / "o" / "report.json");
  const auto pt = j.find("pre-trained"), reg = j.find("regular"), lora = j.find("lora");
  ASSERT_NE(pt, std::string::npos);
  EXPECT_LT(pt, reg);
  EXPECT_LT(reg, lora);

  const auto again = run("--out " + (tmp / "p") + " report --ledger " + source("tests/fixtures/results_ledger.json"));
  EXPECT_EQ(slurp(tmp.path() / "p" / "report.json"), j);
}

TEST(CliReport, SchemaProblemsExitTwo) {
  TempDir tmp;
  std::ofstream(tmp / "v2.json") << R"({"schema": "adcare.results/2", "rows": []})";
  std::ofstream(tmp / "dup.json")
      << R"({"schema": "adcare.results/1", "rows": [{"tuning_type": "lora", "accuracy": 1, "score": 1},
                                                    {"tuning_type": "lora", "accuracy": 2, "score": 2}]})";
  std::ofstream(tmp / "odd.json")
      << R"({"schema": "adcare.results/1", "rows": [{"tuning_type": "partial", "accuracy": 1, "score": 1}]})";
  std::ofstream(tmp / "junk.json") << "{ not json";
  for (const char* f : {"v2.json", "dup.json", "odd.json", "junk.json"}) {
    EXPECT_EQ(run("--out " + (tmp / "o") + " report --ledger " + (tmp / f)).status, 2) << f;
  }
  EXPECT_EQ(run("--out " + (tmp / "o") + " report --ledger " + (tmp / "absent.json")).status, 2);
}

TEST(CliReport, RenderDirectly) {
  const auto r = cli::render_report(R"({"schema": "adcare.results/1", "rows": [
      {"tuning_type": "regular", "accuracy": 50, "score": 3}]})");
  EXPECT_EQ(r.text, "Tuning Type   Accuracy (%)   Score\nregular               50.0    3.00\n");
  EXPECT_THROW(cli::render_report("[]"), ParseError);
}

TEST(CliConfig, RoundTripAndDefaultFile) {
  const cli::PipelineConfig defaults;
  EXPECT_TRUE(cli::same_config(cli::parse_config(cli::config_to_ini(defaults)), defaults));
  EXPECT_TRUE(cli::same_config(cli::load_config(source("configs/default.ini")), defaults));

  const auto smoke = cli::load_config(source("configs/smoke.ini"));
  EXPECT_TRUE(cli::same_config(cli::parse_config(cli::config_to_ini(smoke)), smoke));
  EXPECT_EQ(smoke.experiment.corpus.n, 50u);
  EXPECT_EQ(smoke.experiment.pretrain.max_steps, 50u);
  EXPECT_EQ(smoke.experiment.finetune.max_steps, 50u);
  EXPECT_EQ(smoke.modes.size(), 3u);
  EXPECT_NO_THROW(cli::validate(smoke));
  EXPECT_NO_THROW(cli::validate(cli::load_config(source("configs/desk.ini"))));
}

TEST(CliConfig, AbsentKeysKeepDefaultsAndBadValuesReject) {
  const auto c = cli::parse_config("[run]\nseed = 9\n");
  EXPECT_EQ(c.seed, 9u);
  auto expect = cli::PipelineConfig{};
  expect.seed = 9;
  EXPECT_TRUE(cli::same_config(c, expect));
  EXPECT_THROW(cli::parse_config("[nowhere]\nx = 1\n"), Error);
  EXPECT_THROW(cli::parse_config("[run]\nseed = banana\n"), Error);
  EXPECT_THROW(cli::parse_config("[run]\nmodes = sideways\n"), Error);
  EXPECT_THROW(cli::validate(cli::parse_config("[split]\nratio = 1.5\n")), ConfigError);
}

TEST(CliManifest, EachInvocationAppendsChainedLine) {
  TempDir tmp;
  const auto out = tmp / "o";
  ASSERT_EQ(run("--seed 3 --out " + out + " generate --n 20").status, 0);
  ASSERT_EQ(run("--seed 3 --out " + out + " validate").status, 0);
  EXPECT_EQ(run("--seed 3 --out " + out + " generate --n 2").status, 2);
  const auto path = tmp.path() / "o" / "manifests.jsonl";
  ASSERT_EQ(line_count(path), 3u);
  std::ifstream in(path);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  EXPECT_NE(l1.find("\"command\":\"generate\""), std::string::npos);
  EXPECT_NE(l1.find("\"seed\":3"), std::string::npos);
  EXPECT_NE(l1.find("\"parent\":null"), std::string::npos);
  EXPECT_NE(l2.find("\"parent\":\"" + cli::sha256_hex(l1) + "\""), std::string::npos)
      << l2.substr(0, 400);
  EXPECT_NE(l3.find("\"exit_status\":2"), std::string::npos);
  EXPECT_NE(l3.find("\"parent\":\"" + cli::sha256_hex(l2) + "\""), std::string::npos);
}

TEST(CliManifest, DigestOfKnownBytes) {
  EXPECT_EQ(cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(cli::digest("/definitely/not/here"), "");
}

TEST(CliPipeline, SmokeRunResumesAndSeparatesModes) {
  TempDir tmp;
  const auto out = tmp / "o";
  const auto t0 = std::chrono::steady_clock::now();
  const auto first = run("--config " + source("configs/smoke.ini") + " --out " + out + " pipeline");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(first.status, 0) << first.output;
  EXPECT_LT(seconds, 600.0);

  const fs::path o = tmp.path() / "o";
  for (const char* f : {"results.json", "report.json", "report.txt", "pretrain/model.adcv",
                        "finetune/regular/base.adcv", "finetune/lora/base.adcv", "finetune/lora/adapter.adcv",
                        "finetune/frozen/base.adcv", "benchmark/lora/ledger.jsonl", "benchmark/regular/result.json"}) {
    EXPECT_TRUE(fs::exists(o / f)) << f;
  }
  EXPECT_FALSE(fs::exists(o / "finetune/regular/adapter.adcv"));
  EXPECT_NE(slurp(o / "finetune/regular/base.adcv"), slurp(o / "finetune/lora/base.adcv"));
  // lora leaves the pre-trained base untouched
  EXPECT_EQ(slurp(o / "finetune/lora/base.adcv"), slurp(o / "finetune/frozen/base.adcv"));

  const auto report = slurp(o / "report.txt");
  EXPECT_LT(report.find("pre-trained"), report.find("regular"));
  EXPECT_LT(report.find("regular"), report.find("lora"));

  const auto second = run("--config " + source("configs/smoke.ini") + " --out " + out + " pipeline");
  ASSERT_EQ(second.status, 0) << second.output;
  for (const char* s : {"generate", "validate", "split", "prealign", "balance", "pretrain", "finetune-lora",
                        "benchmark-regular"}) {
    EXPECT_NE(second.output.find(std::string("[") + s + "] up to date, skipped"), std::string::npos) << s;
  }

  const auto adapter = slurp(o / "finetune/lora/adapter.adcv");
  fs::remove(o / "finetune/lora/adapter.adcv");
  const auto third = run("--config " + source("configs/smoke.ini") + " --out " + out + " pipeline");
  ASSERT_EQ(third.status, 0) << third.output;
  EXPECT_NE(third.output.find("[generate] up to date, skipped"), std::string::npos);
  EXPECT_NE(third.output.find("[pretrain] up to date, skipped"), std::string::npos);
  EXPECT_NE(third.output.find("[finetune-lora]\n"), std::string::npos);
  EXPECT_EQ(slurp(o / "finetune/lora/adapter.adcv"), adapter);
}

TEST(CliPipeline, ModeFlagRestrictsToOneMode) {
  TempDir tmp;
  std::ofstream(tmp / "tiny.ini") << "[corpus]\nn = 30\nrecords_per_patient = 5\n"
                                     "[balance]\nk = 1\n[prealign]\nsteps = 5\n"
                                     "[pretrain]\nmax_steps = 3\nbatch_size = 4\n"
                                     "[finetune]\nmax_steps = 3\nbatch_size = 4\n";
  const auto r = run("--config " + (tmp / "tiny.ini") + " --out " + (tmp / "o") + " pipeline --mode lora");
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(fs::exists(tmp.path() / "o" / "finetune/lora/adapter.adcv"));
  EXPECT_FALSE(fs::exists(tmp.path() / "o" / "finetune/regular"));
  EXPECT_EQ(slurp(tmp.path() / "o" / "report.txt").find("regular"), std::string::npos);
}
