#include "fdm/tokenize.hpp"

#include <string>

#include "fdm/common.hpp"

namespace fdm {

bool operator==(const Entry& a, const Entry& b) {
  if (a.kind != b.kind || a.symbol != b.symbol || a.row_pos != b.row_pos ||
      a.col_pos != b.col_pos) {
    return false;
  }
  if (a.patch == b.patch) return true;
  if (!a.patch || !b.patch) return false;
  return *a.patch == *b.patch;
}

void TokenSeq::push(Entry e, std::uint8_t mask, int pos) {
  entries.push_back(std::move(e));
  loss_mask.push_back(mask);
  local_pos.push_back(pos);
}

void TokenSeq::append(const TokenSeq& other) {
  append(other, 0, other.size());
}

void TokenSeq::append(const TokenSeq& other, std::size_t begin,
                      std::size_t end) {
  entries.insert(entries.end(), other.entries.begin() + begin,
                 other.entries.begin() + end);
  loss_mask.insert(loss_mask.end(), other.loss_mask.begin() + begin,
                   other.loss_mask.begin() + end);
  local_pos.insert(local_pos.end(), other.local_pos.begin() + begin,
                   other.local_pos.begin() + end);
}

TokenSeq TokenSeq::slice(std::size_t begin, std::size_t end) const {
  TokenSeq out;
  out.append(*this, begin, end);
  return out;
}

namespace {

const TextTokenizer& need_tokenizer(const TextTokenizer* tok,
                                    const std::string& what) {
  if (tok == nullptr) throw SpecError(what + " requires a text tokenizer");
  return *tok;
}

void append_observation(TimestepTokens& out, const Observation& obs,
                        const ModalitySpec& spec,
                        const TextTokenizer* tokenizer) {
  validate_observation(obs, spec);
  int order = 0;
  for (const auto& f : spec.fields) {
    if (f.kind != Modality::kText) continue;
    const auto& text = std::get<std::string>(obs.at(f.name));
    const auto& tok = need_tokenizer(tokenizer, "text field '" + f.name + "'");
    for (Token t : tok.tokenize(text)) {
      out.push(Entry::of_symbol(t), f.supervised ? 1 : 0, order++);
    }
  }
  for (const auto& f : spec.fields) {
    if (f.kind != Modality::kImage) continue;
    for (auto& p : extract_patches(std::get<Image>(obs.at(f.name)))) {
      out.push(Entry::of_patch(std::make_shared<const Patch>(std::move(p))), 0,
               order++);
    }
  }
  for (const auto& f : spec.fields) {
    if (f.kind == Modality::kDiscrete) {
      for (auto v : std::get<std::vector<std::int64_t>>(obs.at(f.name))) {
        out.push(Entry::of_symbol(encode_discrete(v, f.name)), 0, order++);
      }
    } else if (f.kind == Modality::kContinuous) {
      for (double v : std::get<std::vector<double>>(obs.at(f.name))) {
        out.push(Entry::of_symbol(encode_continuous(v)), 0, order++);
      }
    }
  }
  out.push(Entry::of_symbol(vocab::kSeparator), 0, order);
}

}  // namespace

TimestepTokens assemble_observation(const Observation& obs,
                                    const ModalitySpec& spec,
                                    const TextTokenizer* tokenizer) {
  TimestepTokens out;
  append_observation(out, obs, spec, tokenizer);
  return out;
}

TimestepTokens assemble_timestep(const Observation& obs,
                                 const std::optional<ActionValue>& action,
                                 const ModalitySpec& spec,
                                 const TextTokenizer* tokenizer) {
  TimestepTokens out;
  append_observation(out, obs, spec, tokenizer);
  if (action) {
    for (Token t : tokenize_action(*action, spec.action, tokenizer)) {
      out.push(Entry::of_symbol(t), 1, kActionPosition);
    }
  }
  return out;
}

void resolve_patch_positions(TokenSeq& seq, Mode mode, Rng* rng) {
  for (auto& e : seq.entries) {
    if (!e.is_patch()) continue;
    e.row_pos = patch_position_index(e.patch->rows, mode, rng);
    e.col_pos = patch_position_index(e.patch->cols, mode, rng);
  }
}

FlatEpisode flatten_episode(const Episode& episode, const ModalitySpec& spec,
                            const TextTokenizer* tokenizer, Mode mode,
                            Rng* rng) {
  if (episode.steps.empty()) throw DataError("episode has no timesteps");
  FlatEpisode out;
  out.step_offsets.push_back(0);
  for (std::size_t t = 0; t < episode.steps.size(); ++t) {
    const auto& step = episode.steps[t];
    try {
      out.append(assemble_timestep(step.observation, step.action, spec,
                                   tokenizer));
    } catch (const SpecError& e) {
      throw DataError("timestep " + std::to_string(t) +
                      " does not match the episode spec: " + e.what());
    }
    out.step_offsets.push_back(static_cast<std::uint32_t>(out.size()));
  }
  resolve_patch_positions(out, mode, rng);
  return out;
}

std::vector<Token> tokenize_action(const ActionValue& action,
                                   const ActionSpec& spec,
                                   const TextTokenizer* tokenizer) {
  validate_action(action, spec);
  std::vector<Token> out;
  switch (spec.kind) {
    case Modality::kDiscrete:
      for (auto v : std::get<std::vector<std::int64_t>>(action)) {
        out.push_back(encode_discrete(v, "action"));
      }
      break;
    case Modality::kContinuous:
      for (double v : std::get<std::vector<double>>(action)) {
        out.push_back(encode_continuous(v));
      }
      break;
    case Modality::kText: {
      const auto& tok = need_tokenizer(tokenizer, "text action");
      out = tok.tokenize(std::get<std::string>(action));
      if (out.size() > static_cast<std::size_t>(spec.count)) {
        throw SpecError("text action needs " + std::to_string(out.size()) +
                        " tokens, spec allows " + std::to_string(spec.count));
      }
      out.resize(spec.count, 0);
      break;
    }
    case Modality::kImage:
      throw SpecError("image actions are not supported");
  }
  return out;
}

ActionValue detokenize_action(std::span<const Token> tokens,
                              const ActionSpec& spec,
                              const TextTokenizer* tokenizer) {
  if (tokens.size() != static_cast<std::size_t>(spec.count)) {
    throw SpecError("expected " + std::to_string(spec.count) +
                    " action tokens, got " + std::to_string(tokens.size()));
  }
  switch (spec.kind) {
    case Modality::kDiscrete: {
      std::vector<std::int64_t> v;
      for (Token t : tokens) v.push_back(decode_discrete(t));
      return v;
    }
    case Modality::kContinuous: {
      std::vector<double> v;
      for (Token t : tokens) v.push_back(decode_continuous(t));
      return v;
    }
    case Modality::kText: {
      const auto& tok = need_tokenizer(tokenizer, "text action");
      std::string s = tok.detokenize(tokens);
      // Padding id 0 decodes to NUL bytes.
      const auto end = s.find('\0');
      if (end != std::string::npos) s.resize(end);
      return s;
    }
    case Modality::kImage:
      break;
  }
  throw SpecError("image actions are not supported");
}

TokenRange action_token_range(const ActionSpec& spec,
                              const TextTokenizer* tokenizer) {
  switch (spec.kind) {
    case Modality::kDiscrete:
      return {0, static_cast<Token>(spec.cardinality)};
    case Modality::kContinuous:
      return {vocab::kContinuousBegin, vocab::kContinuousEnd};
    case Modality::kText:
      return {0, static_cast<Token>(need_tokenizer(tokenizer, "text action").size())};
    case Modality::kImage:
      break;
  }
  throw SpecError("image actions are not supported");
}

}  // namespace fdm
