#pragma once

#include <span>
#include <vector>

#include "adcare/decoder/vocabulary.h"

namespace adcare::decoder {

struct ChatTurn {
  std::vector<int> question;
  std::vector<int> answer;
  int round = 1;  // 1-based
};

/// Decoder text input for round m. Round 1 is the first question alone; later
/// rounds replay every earlier question and answer in order, then the round-m
/// question, with one separator token between consecutive segments:
///   q1 SEP a1 SEP q2 ... SEP q_m
/// Throws ContractError when m < 1, a round in 1..m is missing or duplicated,
/// or a replayed answer is empty.
std::vector<int> build_round_input(std::span<const ChatTurn> history, int m,
                                   int separator = Vocabulary::kSeparator);

}  // namespace adcare::decoder
