#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace adcare::eval {

struct JudgeVerdict {
  bool correct = false;
  int score = 1;  // 1..5
  bool operator==(const JudgeVerdict&) const = default;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgeVerdict judge(std::string_view question, std::string_view reference,
                             std::string_view candidate) const = 0;
};

/// Deterministic keyword judge.
///
/// Keywords are the distinct reference words minus a small stop list; the
/// score is 1 + 4 * (fraction of keywords found in the candidate), rounded
/// half up. A candidate is correct when
///   - it names the reference's adherence label and no other label,
///   - it mentions every entity (pill, face, water) the reference does, and
///     exactly those when the question asks which objects are visible,
///   - for "x then y" references, its actions come in the same order,
///   - and, when the reference has neither a label nor an entity, it contains
///     every keyword.
/// An empty candidate is incorrect with score 1.
class RuleJudge : public Judge {
 public:
  JudgeVerdict judge(std::string_view question, std::string_view reference,
                     std::string_view candidate) const override;

  static std::vector<std::string> keywords(std::string_view reference);
};

/// Runs a user command per verdict. The command receives
///   {"question": ..., "reference": ..., "candidate": ...}
/// on standard input and must print {"correct": bool, "score": 1..5}.
/// Throws IoError if the command fails and DataError on a malformed reply.
class ExternalJudge : public Judge {
 public:
  explicit ExternalJudge(std::string command) : command_(std::move(command)) {}
  JudgeVerdict judge(std::string_view question, std::string_view reference,
                     std::string_view candidate) const override;

 private:
  std::string command_;
};

}  // namespace adcare::eval
