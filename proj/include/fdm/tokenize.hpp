#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fdm/modality.hpp"
#include "fdm/patches.hpp"
#include "fdm/text_tokenizer.hpp"
#include "fdm/vocab.hpp"

namespace fdm {

// local_pos markers for entries that are not observation elements.
inline constexpr int kActionPosition = -1;
inline constexpr int kNoPosition = -2;  // padding

enum class EntryKind : std::uint8_t { kSymbol = 0, kPatch = 1 };

// One input position: either a vocabulary symbol or an image patch. Patch
// pixels are shared, so copying entries between caches and batches is cheap.
struct Entry {
  EntryKind kind = EntryKind::kSymbol;
  Token symbol = 0;
  std::shared_ptr<const Patch> patch;
  // Resolved row/column position-table indices; -1 until resolved.
  int row_pos = -1;
  int col_pos = -1;

  static Entry of_symbol(Token t) { return Entry{EntryKind::kSymbol, t, {}}; }
  static Entry of_patch(std::shared_ptr<const Patch> p) {
    return Entry{EntryKind::kPatch, 0, std::move(p)};
  }
  bool is_patch() const { return kind == EntryKind::kPatch; }

  friend bool operator==(const Entry& a, const Entry& b);
};

// Parallel arrays of entries, loss mask and local position ids.
struct TokenSeq {
  std::vector<Entry> entries;
  std::vector<std::uint8_t> loss_mask;
  std::vector<int> local_pos;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  void push(Entry e, std::uint8_t mask, int pos);
  void append(const TokenSeq& other);
  void append(const TokenSeq& other, std::size_t begin, std::size_t end);
  TokenSeq slice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

using TimestepTokens = TokenSeq;

struct FlatEpisode : TokenSeq {
  // step_offsets[t] is the first entry of timestep t; size = steps + 1.
  std::vector<std::uint32_t> step_offsets;

  std::size_t steps() const {
    return step_offsets.empty() ? 0 : step_offsets.size() - 1;
  }
  friend bool operator==(const FlatEpisode&, const FlatEpisode&) = default;
};

// Orders an observation as text, then image patches (raster), then tensors
// (row-major), each group by key; then the separator; then the action.
// A tokenizer is needed only when text fields or text actions are present.
TimestepTokens assemble_timestep(const Observation& obs,
                                 const std::optional<ActionValue>& action,
                                 const ModalitySpec& spec,
                                 const TextTokenizer* tokenizer = nullptr);

// Observation entries plus the separator (no action): the decoding context.
TimestepTokens assemble_observation(const Observation& obs,
                                    const ModalitySpec& spec,
                                    const TextTokenizer* tokenizer = nullptr);

// Concatenates timesteps in order and resolves patch positions for `mode`.
FlatEpisode flatten_episode(const Episode& episode, const ModalitySpec& spec,
                            const TextTokenizer* tokenizer, Mode mode,
                            Rng* rng);

// Fills row_pos/col_pos on every patch entry.
void resolve_patch_positions(TokenSeq& seq, Mode mode, Rng* rng);

std::vector<Token> tokenize_action(const ActionValue& action,
                                   const ActionSpec& spec,
                                   const TextTokenizer* tokenizer);
ActionValue detokenize_action(std::span<const Token> tokens,
                              const ActionSpec& spec,
                              const TextTokenizer* tokenizer);

// Token ids an action slot may take, as [begin, end).
struct TokenRange {
  Token begin = 0;
  Token end = 0;
  bool contains(Token t) const { return t >= begin && t < end; }
};
TokenRange action_token_range(const ActionSpec& spec,
                              const TextTokenizer* tokenizer);

}  // namespace fdm
