#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adcare::decoder {

/// Fixed word-level vocabulary shared by captions, questions and answers.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSeparator = 1;  // role separator between chat segments
  static constexpr int kEos = 2;
  static constexpr int kUnknown = 3;

  static const Vocabulary& standard();

  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  int id(std::string_view word) const;
  const std::string& word(int id) const;

  // Lowercases, drops punctuation, maps unknown words to kUnknown.
  std::vector<int> encode(std::string_view text) const;
  // Joins words with single spaces; stops at kEos and skips reserved ids.
  std::string decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> words_;
};

// Lowercase alphanumeric word split used by both the tokenizer and the judge.
std::vector<std::string> split_words(std::string_view text);

}  // namespace adcare::decoder
