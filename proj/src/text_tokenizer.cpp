#include "fdm/text_tokenizer.hpp"

#include <algorithm>

#include "fdm/binio.hpp"
#include "fdm/common.hpp"

namespace fdm {

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 1; i < text.size(); ++i) {
    if (text[i] == ' ' && text[i - 1] != ' ') {
      out.push_back(text.substr(start, i - start));
      start = i;
    }
  }
  if (start < text.size()) out.push_back(text.substr(start));
  return out;
}

TextTokenizer::TextTokenizer() {
  pieces_.reserve(kByteFallback);
  for (std::size_t b = 0; b < kByteFallback; ++b) {
    pieces_.emplace_back(1, static_cast<char>(b));
  }
}

void TextTokenizer::add_merge(Token a, Token b) {
  const auto id = static_cast<Token>(pieces_.size());
  pieces_.push_back(pieces_.at(a) + pieces_.at(b));
  merges_.emplace_back(a, b);
  merge_rank_.emplace(std::make_pair(a, b), id);
}

namespace {

void apply_merge(std::vector<Token>& ids, std::pair<Token, Token> pair,
                 Token merged) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (r + 1 < ids.size() && ids[r] == pair.first && ids[r + 1] == pair.second) {
      ids[w++] = merged;
      ++r;
    } else {
      ids[w++] = ids[r];
    }
  }
  ids.resize(w);
}

}  // namespace

TextTokenizer TextTokenizer::train(std::span<const std::string> corpus,
                                   std::size_t vocab_size) {
  if (vocab_size < kByteFallback) {
    throw ConfigError("tokenizer vocab_size " + std::to_string(vocab_size) +
                      " is below the 256-entry byte fallback");
  }
  if (vocab_size > vocab::kTextEnd) {
    throw ConfigError("tokenizer vocab_size " + std::to_string(vocab_size) +
                      " exceeds the text range (32000)");
  }
  if (corpus.empty()) throw ConfigError("tokenizer corpus is empty");

  std::map<std::string, std::uint64_t> word_counts;
  for (const auto& doc : corpus) {
    for (auto w : split_words(doc)) ++word_counts[std::string(w)];
  }
  std::vector<std::vector<Token>> words;
  std::vector<std::uint64_t> freq;
  for (const auto& [w, c] : word_counts) {
    std::vector<Token> ids;
    for (unsigned char ch : w) ids.push_back(ch);
    words.push_back(std::move(ids));
    freq.push_back(c);
  }

  TextTokenizer tok;
  while (tok.size() < vocab_size) {
    std::map<std::pair<Token, Token>, std::uint64_t> pair_counts;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto& ids = words[i];
      for (std::size_t j = 0; j + 1 < ids.size(); ++j) {
        pair_counts[{ids[j], ids[j + 1]}] += freq[i];
      }
    }
    // Highest count wins; ties go to the smallest pair (map order).
    const std::pair<Token, Token>* best = nullptr;
    std::uint64_t best_count = 0;
    for (const auto& [p, c] : pair_counts) {
      if (c > best_count) {
        best = &p;
        best_count = c;
      }
    }
    if (best == nullptr || best_count < 2) break;
    const auto pair = *best;
    tok.add_merge(pair.first, pair.second);
    const auto merged = static_cast<Token>(tok.size() - 1);
    for (auto& ids : words) apply_merge(ids, pair, merged);
  }
  return tok;
}

std::vector<Token> TextTokenizer::tokenize(std::string_view text) const {
  std::vector<Token> out;
  for (auto word : split_words(text)) {
    std::vector<Token> ids;
    ids.reserve(word.size());
    for (unsigned char ch : word) ids.push_back(ch);
    while (ids.size() > 1) {
      // Lowest-rank (earliest learned) merge first.
      Token best_id = 0;
      bool found = false;
      std::pair<Token, Token> best_pair;
      for (std::size_t j = 0; j + 1 < ids.size(); ++j) {
        auto it = merge_rank_.find({ids[j], ids[j + 1]});
        if (it != merge_rank_.end() && (!found || it->second < best_id)) {
          best_id = it->second;
          best_pair = it->first;
          found = true;
        }
      }
      if (!found) break;
      apply_merge(ids, best_pair, best_id);
    }
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::string TextTokenizer::detokenize(std::span<const Token> tokens) const {
  std::string out;
  for (Token t : tokens) {
    if (t >= pieces_.size()) {
      throw RangeError("text token " + std::to_string(t) +
                       " outside tokenizer vocabulary of " +
                       std::to_string(pieces_.size()));
    }
    out += pieces_[t];
  }
  return out;
}

bool TextTokenizer::contains(std::string_view piece) const {
  return std::find(pieces_.begin(), pieces_.end(), piece) != pieces_.end();
}

std::string TextTokenizer::serialize() const {
  ByteWriter w;
  w.header("FDMV", kFileVersion);
  w.u32(static_cast<std::uint32_t>(pieces_.size()));
  for (const auto& p : pieces_) w.str(p);
  w.u32(static_cast<std::uint32_t>(merges_.size()));
  for (auto [a, b] : merges_) {
    w.u32(a);
    w.u32(b);
  }
  return w.take();
}

TextTokenizer TextTokenizer::deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  r.header("FDMV", kFileVersion);
  const std::uint32_t n = r.u32();
  if (n < kByteFallback || n > vocab::kTextEnd) {
    r.fail(FormatFault::kCorrupt, "vocabulary size out of range");
  }
  std::vector<std::string> pieces;
  pieces.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) pieces.push_back(r.str());
  const std::uint32_t m = r.u32();
  if (m != n - kByteFallback) {
    r.fail(FormatFault::kCorrupt, "merge count does not match vocabulary");
  }
  TextTokenizer tok;
  for (std::uint32_t i = 0; i < m; ++i) {
    const Token a = r.u32();
    const Token b = r.u32();
    if (a >= tok.size() || b >= tok.size()) {
      r.fail(FormatFault::kCorrupt, "merge references unknown id");
    }
    tok.add_merge(a, b);
  }
  if (tok.pieces_ != pieces) {
    r.fail(FormatFault::kCorrupt, "vocabulary entries disagree with merges");
  }
  if (!r.at_end()) r.fail(FormatFault::kCorrupt, "trailing bytes");
  return tok;
}

void TextTokenizer::save(const std::filesystem::path& path) const {
  write_file(path, serialize());
}

TextTokenizer TextTokenizer::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

}  // namespace fdm
