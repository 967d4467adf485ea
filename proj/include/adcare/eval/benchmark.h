#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adcare/data/annotation.h"
#include "adcare/eval/judge.h"

namespace adcare::eval {

struct BenchmarkItem {
  std::string id;       // "<video id>/<dimension>"
  std::string clip_id;  // video the question is about
  std::string dimension;
  std::string question;
  std::string reference;
  std::optional<std::string> paraphrase;
};

/// One item per qa pair of each record, in record order.
std::vector<BenchmarkItem> items_from_records(std::span<const data::AnnotationRecord> records);

struct LedgerEntry {
  std::string item_id;
  std::string dimension;
  std::string question;
  std::string reference;
  std::string candidate;
  std::optional<std::string> paraphrase_candidate;
  bool correct = false;
  int score = 1;
};

struct BenchmarkResult {
  // Mean score per evaluated dimension.
  std::map<std::string, double> dimension_means;
  double accuracy = 0.0;  // percent of correct items
  double mean_score = 0.0;
  std::size_t items = 0;
  std::vector<LedgerEntry> ledger;  // sorted by item id
};

// Produces the model's answer to `question` about item.clip_id.
using Responder = std::function<std::string(const BenchmarkItem& item, const std::string& question)>;

/// Scores every item whose dimension is listed. A consistency item is asked
/// twice (question and paraphrase); it is correct only if both answers are
/// correct and agree with each other, and its score is the lowest of the
/// three judgements. Throws DataError if a consistency item has no paraphrase.
BenchmarkResult run_benchmark(std::span<const BenchmarkItem> items, const Responder& respond, const Judge& judge,
                              std::span<const std::string> dimensions);

/// Recomputes the aggregate numbers from a ledger alone. Summation runs in
/// item-id order so any permutation of the ledger gives identical bits.
BenchmarkResult aggregate(std::vector<LedgerEntry> ledger);

std::vector<std::string> all_dimensions();

std::string result_json(const BenchmarkResult& result);
std::string ledger_jsonl(const BenchmarkResult& result);
std::string result_table(const BenchmarkResult& result);

}  // namespace adcare::eval
