#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fdm/vocab.hpp"

namespace fdm {

// Byte-pair tokenizer with byte fallback. Ids [0, 256) are raw bytes, so
// every byte string tokenizes; learned merges take ids 256 upward. All ids
// sit inside the text range.
class TextTokenizer {
 public:
  static constexpr std::size_t kByteFallback = 256;
  static constexpr std::uint8_t kFileVersion = 1;

  // A tokenizer with byte fallback only.
  TextTokenizer();

  static TextTokenizer train(std::span<const std::string> corpus,
                             std::size_t vocab_size);

  std::vector<Token> tokenize(std::string_view text) const;
  std::string detokenize(std::span<const Token> tokens) const;

  std::size_t size() const { return pieces_.size(); }
  const std::string& piece(Token id) const { return pieces_.at(id); }
  const std::vector<std::pair<Token, Token>>& merges() const {
    return merges_;
  }
  bool contains(std::string_view piece) const;

  std::string serialize() const;
  static TextTokenizer deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static TextTokenizer load(const std::filesystem::path& path);

  friend bool operator==(const TextTokenizer& a, const TextTokenizer& b) {
    return a.merges_ == b.merges_;
  }

 private:
  void add_merge(Token a, Token b);

  std::vector<std::string> pieces_;
  std::vector<std::pair<Token, Token>> merges_;
  std::map<std::pair<Token, Token>, Token> merge_rank_;
};

// Splits text into chunks that start at word boundaries; a leading space
// stays attached to the following word. Merges never cross chunks.
std::vector<std::string_view> split_words(std::string_view text);

}  // namespace fdm
