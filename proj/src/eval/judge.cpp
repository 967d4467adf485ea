#include "adcare/eval/judge.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

#include "adcare/decoder/vocabulary.h"
#include "adcare/error.h"

namespace adcare::eval {

namespace {

const std::set<std::string> kStopwords{"a", "an", "the", "of", "is", "are", "in", "and", "with", "then"};
const std::vector<std::string> kLabelWords{"positive", "negative", "ambiguous"};
const std::vector<std::string> kEntities{"pill", "face", "water"};
const std::vector<std::string> kActions{"holds", "swallows", "drinks"};

bool has(const std::vector<std::string>& words, const std::string& w) {
  return std::find(words.begin(), words.end(), w) != words.end();
}

std::vector<std::string> in_order(const std::vector<std::string>& words, const std::vector<std::string>& vocab) {
  std::vector<std::string> out;
  for (const auto& w : words)
    if (has(vocab, w) && !has(out, w)) out.push_back(w);
  return out;
}

std::set<std::string> present(const std::vector<std::string>& words, const std::vector<std::string>& vocab) {
  std::set<std::string> out;
  for (const auto& w : words)
    if (has(vocab, w)) out.insert(w);
  return out;
}

}  // namespace

std::vector<std::string> RuleJudge::keywords(std::string_view reference) {
  std::vector<std::string> out;
  for (auto& w : decoder::split_words(reference))
    if (!kStopwords.contains(w) && !has(out, w)) out.push_back(std::move(w));
  return out;
}

JudgeVerdict RuleJudge::judge(std::string_view question, std::string_view reference,
                              std::string_view candidate) const {
  const auto cand = decoder::split_words(candidate);
  if (cand.empty()) return {false, 1};
  const auto ref = decoder::split_words(reference);
  const auto keys = keywords(reference);

  std::size_t matched = 0;
  for (const auto& k : keys)
    if (has(cand, k)) ++matched;
  const double fraction = keys.empty() ? 1.0 : double(matched) / double(keys.size());
  const int score = std::clamp(static_cast<int>(std::floor(1.0 + 4.0 * fraction + 0.5)), 1, 5);

  bool correct = true;
  const auto ref_labels = present(ref, kLabelWords);
  const auto ref_entities = present(ref, kEntities);
  if (!ref_labels.empty()) correct = correct && present(cand, kLabelWords) == ref_labels;
  if (!ref_entities.empty() || has(decoder::split_words(question), "objects")) {
    const auto cand_entities = present(cand, kEntities);
    if (has(decoder::split_words(question), "objects")) {
      correct = correct && cand_entities == ref_entities;
    } else {
      correct = correct && std::includes(cand_entities.begin(), cand_entities.end(), ref_entities.begin(),
                                         ref_entities.end());
    }
  }
  if (has(ref, "then")) correct = correct && in_order(cand, kActions) == in_order(ref, kActions);
  if (ref_labels.empty() && ref_entities.empty()) correct = correct && matched == keys.size();
  return {correct, score};
}

JudgeVerdict ExternalJudge::judge(std::string_view question, std::string_view reference,
                                  std::string_view candidate) const {
  const std::string request = nlohmann::json{{"question", std::string(question)},
                                             {"reference", std::string(reference)},
                                             {"candidate", std::string(candidate)}}
                                  .dump();
  char path[] = "/tmp/adcare-judge-XXXXXX";
  const int fd = mkstemp(path);
  if (fd < 0) throw IoError("cannot create a temporary file for the external judge");
  const bool wrote = ::write(fd, request.data(), request.size()) == static_cast<ssize_t>(request.size());
  ::close(fd);
  if (!wrote) {
    std::remove(path);
    throw IoError("cannot write the external judge request");
  }
  const std::string cmd = "(" + command_ + ") < " + path;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    std::remove(path);
    throw IoError("cannot start external judge: " + command_);
  }
  std::string reply;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) reply.append(buf, got);
  const int status = pclose(pipe);
  std::remove(path);
  if (status != 0) {
    throw IoError("external judge exited with status " +
                  std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : status));
  }
  try {
    const auto j = nlohmann::json::parse(reply);
    JudgeVerdict v{j.at("correct").get<bool>(), j.at("score").get<int>()};
    if (v.score < 1 || v.score > 5) throw DataError("external judge score out of range: " + std::to_string(v.score));
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed external judge reply: ") + e.what());
  }
}

}  // namespace adcare::eval
