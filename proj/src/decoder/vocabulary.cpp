#include "adcare/decoder/vocabulary.h"

#include <algorithm>
#include <cctype>

#include "adcare/error.h"

namespace adcare::decoder {

namespace {

std::vector<std::string> standard_words() {
  return {"<pad>", "<sep>", "<eos>", "<unk>",
          // prompts
          "describe", "the", "video", "what", "is", "adherence", "status", "did", "patient", "take",
          "medication", "which", "objects", "are", "visible", "how", "lighting", "happens", "in", "order",
          // answers and captions
          "positive", "negative", "ambiguous", "swallows", "pill", "no", "intake", "not", "face", "water",
          "good", "dark", "blurry", "view", "holds", "then", "drinks", "observed", "unclear", "activity",
          // spare descriptive words
          "after", "before", "hands", "bottle", "talking", "listening", "body", "motion", "oligocentric",
          "polycentric", "clear", "scene", "and", "a", "of", "with", "yes", "seen", "empty", "room"};
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '<' || ch == '>' || ch == '_') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab(standard_words());
  return vocab;
}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  if (words_.size() < 4 || words_[kPad] != "<pad>" || words_[kSeparator] != "<sep>" || words_[kEos] != "<eos>" ||
      words_[kUnknown] != "<unk>") {
    throw ConfigError("vocabulary must start with <pad>, <sep>, <eos>, <unk>");
  }
}

int Vocabulary::id(std::string_view word) const {
  auto it = std::find(words_.begin(), words_.end(), word);
  return it == words_.end() ? kUnknown : static_cast<int>(it - words_.begin());
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(words_.size()));
  }
  return words_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id(w));
  return ids;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  std::string out;
  for (int t : ids) {
    if (t == kEos) break;
    if (t == kPad || t == kSeparator || t == kUnknown) continue;
    if (!out.empty()) out += ' ';
    out += word(t);
  }
  return out;
}

}  // namespace adcare::decoder
