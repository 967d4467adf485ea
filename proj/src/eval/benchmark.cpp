#include "adcare/eval/benchmark.h"

#include <algorithm>
#include <cstdio>

#include "json.hpp"

#include "adcare/error.h"

namespace adcare::eval {

using json = nlohmann::ordered_json;

std::vector<std::string> all_dimensions() { return {data::kDimensions.begin(), data::kDimensions.end()}; }

std::vector<BenchmarkItem> items_from_records(std::span<const data::AnnotationRecord> records) {
  std::vector<BenchmarkItem> out;
  for (const auto& r : records) {
    for (const auto& qa : r.qa_pairs) {
      out.push_back({r.video_id + "/" + qa.dimension, r.video_id, qa.dimension, qa.question, qa.answer, qa.paraphrase});
    }
  }
  return out;
}

BenchmarkResult aggregate(std::vector<LedgerEntry> ledger) {
  std::ranges::sort(ledger, {}, &LedgerEntry::item_id);
  BenchmarkResult r;
  std::map<std::string, std::pair<double, std::size_t>> per_dim;
  double score_sum = 0.0;
  std::size_t correct = 0;
  for (const auto& e : ledger) {
    score_sum += e.score;
    if (e.correct) ++correct;
    auto& [s, n] = per_dim[e.dimension];
    s += e.score;
    ++n;
  }
  r.items = ledger.size();
  if (r.items > 0) {
    r.accuracy = 100.0 * double(correct) / double(r.items);
    r.mean_score = score_sum / double(r.items);
  }
  for (const auto& [d, sn] : per_dim) r.dimension_means[d] = sn.first / double(sn.second);
  r.ledger = std::move(ledger);
  return r;
}

BenchmarkResult run_benchmark(std::span<const BenchmarkItem> items, const Responder& respond, const Judge& judge,
                              std::span<const std::string> dimensions) {
  std::vector<LedgerEntry> ledger;
  for (const auto& item : items) {
    if (std::ranges::find(dimensions, item.dimension) == dimensions.end()) continue;
    LedgerEntry e{item.id, item.dimension, item.question, item.reference, respond(item, item.question),
                  std::nullopt, false, 1};
    if (item.dimension == "consistency") {
      if (!item.paraphrase || item.paraphrase->empty()) {
        throw DataError("consistency item " + item.id + " has no paraphrased question");
      }
      e.paraphrase_candidate = respond(item, *item.paraphrase);
      const auto first = judge.judge(item.question, item.reference, e.candidate);
      const auto second = judge.judge(*item.paraphrase, item.reference, *e.paraphrase_candidate);
      const auto agree = e.candidate.empty() ? JudgeVerdict{false, 1}
                                             : judge.judge(item.question, e.candidate, *e.paraphrase_candidate);
      e.correct = first.correct && second.correct && agree.correct;
      e.score = std::min({first.score, second.score, agree.score});
    } else {
      const auto v = judge.judge(item.question, item.reference, e.candidate);
      e.correct = v.correct;
      e.score = v.score;
    }
    ledger.push_back(std::move(e));
  }
  return aggregate(std::move(ledger));
}

std::string result_json(const BenchmarkResult& r) {
  json dims = json::object();
  for (const auto& d : data::kDimensions) {
    auto it = r.dimension_means.find(std::string(d));
    if (it != r.dimension_means.end()) dims[std::string(d)] = it->second;
  }
  return json{{"schema", "adcare.benchmark/1"},
              {"items", r.items},
              {"accuracy", r.accuracy},
              {"mean_score", r.mean_score},
              {"dimensions", dims}}
             .dump(2) +
         "\n";
}

std::string ledger_jsonl(const BenchmarkResult& r) {
  std::string out;
  for (const auto& e : r.ledger) {
    json line{{"item", e.item_id},         {"dimension", e.dimension}, {"question", e.question},
              {"reference", e.reference},  {"candidate", e.candidate}};
    if (e.paraphrase_candidate) line["paraphrase_candidate"] = *e.paraphrase_candidate;
    line["correct"] = e.correct;
    line["score"] = e.score;
    out += line.dump() + "\n";
  }
  return out;
}

std::string result_table(const BenchmarkResult& r) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-14s %8s\n", "dimension", "score");
  out += buf;
  for (const auto& d : data::kDimensions) {
    auto it = r.dimension_means.find(std::string(d));
    if (it == r.dimension_means.end()) continue;
    std::snprintf(buf, sizeof buf, "%-14s %8.2f\n", std::string(d).c_str(), it->second);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-14s %7.1f%%\n%-14s %8.2f\n", "accuracy", r.accuracy, "mean score", r.mean_score);
  out += buf;
  return out;
}

}  // namespace adcare::eval
