#include <cmath>

#include "internal.hpp"

namespace fdm {

template <class S>
DecodeState<S> start_decode(const ModelConfig& cfg) {
  DecodeState<S> st;
  st.window = cfg.resolved_mem_len();
  return st;
}

template <class S>
Token choose_token(const RowVec<S>& logits, TokenRange range, const DecodeOptions& opt,
                   Rng* rng) {
  if (range.end <= range.begin || range.end > static_cast<Token>(logits.size())) {
    throw SpecError("empty or out-of-table valid token set");
  }
  if (opt.strategy == Strategy::kGreedy) {
    Token best = range.begin;
    for (Token t = range.begin + 1; t < range.end; ++t) {
      if (logits[t] > logits[best]) best = t;
    }
    return best;
  }
  if (!(opt.temperature > 0)) throw ConfigError("sampling temperature must be positive");
  if (!rng) throw ConfigError("sampling needs an rng");
  double mx = -std::numeric_limits<double>::infinity();
  for (Token t = range.begin; t < range.end; ++t) mx = std::max(mx, static_cast<double>(logits[t]));
  std::vector<double> w(range.end - range.begin);
  double sum = 0.0;
  for (Token t = range.begin; t < range.end; ++t) {
    w[t - range.begin] = std::exp((logits[t] - mx) / opt.temperature);
    sum += w[t - range.begin];
  }
  double u = rng->uniform() * sum;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return range.begin + static_cast<Token>(i);
    u -= w[i];
  }
  return range.end - 1;
}

namespace {

// Feeds every pending entry; returns the hidden state of the last one.
template <class S>
RowVec<S> feed(const ModelParams<S>& p, const ModelConfig& cfg, DecodeState<S>& st) {
  if (st.pending.empty()) throw DataError("nothing to condition the decoder on");
  const auto window = static_cast<std::size_t>(std::max(1, st.window));
  RowVec<S> last;
  std::size_t at = 0;
  while (at < st.pending.size()) {
    const std::size_t n = std::min(window, st.pending.size() - at);
    const auto keep = static_cast<Eigen::Index>(window - n);
    for (auto& layer : st.memory.layers) {
      if (layer.rows() > keep) layer = Mat<S>(layer.bottomRows(keep));
    }
    const TokenSeq chunk = st.pending.slice(at, at + n);
    const Mat<S> x = embed_inputs(p, cfg, chunk, Mode::kEval, nullptr);
    auto r = forward_hidden(p, cfg, x, st.memory.length() ? &st.memory : nullptr);
    st.memory = std::move(r.memory);
    last = r.hidden.bottomRows(1);
    at += n;
  }
  st.fed += st.pending.size();
  st.pending = TokenSeq{};
  return last;
}

}  // namespace

template <class S>
std::vector<Token> decode_step(const ModelParams<S>& p, const ModelConfig& cfg,
                               DecodeState<S>& st, TokenRange range, std::size_t count,
                               const DecodeOptions& opt, Rng* rng) {
  std::vector<Token> out;
  for (std::size_t i = 0; i < count; ++i) {
    const RowVec<S> h = feed(p, cfg, st);
    const RowVec<S> logits = output_logits<S>(p, cfg, h);
    const Token t = choose_token<S>(logits, range, opt, rng);
    out.push_back(t);
    st.pending.push(Entry::of_symbol(t), 1, kActionPosition);
  }
  return out;
}

template <class S>
std::vector<Token> decode_recompute(const ModelParams<S>& p, const ModelConfig& cfg,
                                    TokenSeq& context, TokenRange range, std::size_t count,
                                    const DecodeOptions& opt, Rng* rng) {
  std::vector<Token> out;
  for (std::size_t i = 0; i < count; ++i) {
    const Mat<S> x = embed_inputs(p, cfg, context, Mode::kEval, nullptr);
    const auto r = forward_hidden<S>(p, cfg, x, nullptr);
    const RowVec<S> logits = output_logits<S>(p, cfg, r.hidden.bottomRows(1));
    const Token t = choose_token<S>(logits, range, opt, rng);
    out.push_back(t);
    context.push(Entry::of_symbol(t), 1, kActionPosition);
  }
  return out;
}

#define FDM_INSTANTIATE(S)                                                                    \
  template DecodeState<S> start_decode<S>(const ModelConfig&);                                \
  template Token choose_token(const RowVec<S>&, TokenRange, const DecodeOptions&, Rng*);      \
  template std::vector<Token> decode_step(const ModelParams<S>&, const ModelConfig&,          \
                                          DecodeState<S>&, TokenRange, std::size_t,           \
                                          const DecodeOptions&, Rng*);                        \
  template std::vector<Token> decode_recompute(const ModelParams<S>&, const ModelConfig&,     \
                                               TokenSeq&, TokenRange, std::size_t,            \
                                               const DecodeOptions&, Rng*);

FDM_INSTANTIATE(float)
FDM_INSTANTIATE(double)

}  // namespace fdm
