#include "adcare/decoder/chat.h"

#include <string>

#include "adcare/error.h"

namespace adcare::decoder {

namespace {

const ChatTurn& find_round(std::span<const ChatTurn> history, int round) {
  const ChatTurn* hit = nullptr;
  for (const auto& t : history) {
    if (t.round != round) continue;
    if (hit) throw ContractError("round " + std::to_string(round) + " appears twice in the history");
    hit = &t;
  }
  if (!hit) throw ContractError("history has no round " + std::to_string(round));
  return *hit;
}

}  // namespace

std::vector<int> build_round_input(std::span<const ChatTurn> history, int m, int separator) {
  if (m < 1) throw ContractError("round index must be at least 1, got " + std::to_string(m));
  std::vector<int> out;
  for (int r = 1; r < m; ++r) {
    const ChatTurn& t = find_round(history, r);
    if (t.question.empty() || t.answer.empty()) {
      throw ContractError("round " + std::to_string(r) + " has an empty question or answer");
    }
    if (!out.empty()) out.push_back(separator);
    out.insert(out.end(), t.question.begin(), t.question.end());
    out.push_back(separator);
    out.insert(out.end(), t.answer.begin(), t.answer.end());
  }
  const ChatTurn& current = find_round(history, m);
  if (current.question.empty()) throw ContractError("round " + std::to_string(m) + " has an empty question");
  if (!out.empty()) out.push_back(separator);
  out.insert(out.end(), current.question.begin(), current.question.end());
  return out;
}

}  // namespace adcare::decoder
