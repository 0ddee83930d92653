#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fdm/common.hpp"
#include "fdm/tokenize.hpp"

namespace fdm {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

enum class NormPlacement { kPre, kPost };

struct ModelConfig {
  int blocks = 4;
  int heads = 4;
  int width = 128;
  int ffn_size = 512;  // before the GeGLU split
  double dropout = 0.1;
  NormPlacement norm = NormPlacement::kPre;
  bool tied_embedding = true;
  int seq_len = 256;
  int mem_len = -1;  // <0: seq_len
  int table_size = static_cast<int>(vocab::kTableSize);
  int patch_channels = 3;   // image channels the patch embedder accepts
  int patch_hidden = 32;    // conv channels inside the patch embedder
  int norm_groups = 32;

  static ModelConfig preset(const std::string& name);
  int resolved_mem_len() const { return mem_len < 0 ? seq_len : mem_len; }
  int head_dim() const { return width / heads; }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string to_string(NormPlacement n);
NormPlacement parse_norm(const std::string& s);

// How a tensor is treated by weight decay.
enum class ParamRole { kWeight, kBias, kNorm, kEmbedding };

template <class S>
struct BlockParams {
  RowVec<S> ln1_g, ln1_b;
  Mat<S> w_qkv;  // D x 3D
  Mat<S> w_o;    // D x D
  RowVec<S> b_o;
  Mat<S> w_r;    // D x D, projects the sinusoidal distance encoding
  RowVec<S> r_u, r_v;  // content and position biases, one D-vector each
  RowVec<S> ln2_g, ln2_b;
  Mat<S> w_1;  // D x F
  RowVec<S> b_1;
  Mat<S> w_2;  // F/2 x D
  RowVec<S> b_2;
};

template <class S>
struct ModelParams {
  Mat<S> embed;        // table_size x D, also the output head when tied
  Mat<S> head;         // D x table_size, untied only
  Mat<S> local_pos;    // seq_len x D
  RowVec<S> action_marker;
  Mat<S> patch_row, patch_col;  // 128 x D each
  // Patch embedder: 3x3 stem conv, one pre-activation residual block
  // (GroupNorm, GELU, conv, GroupNorm, GELU, conv), 4x4 average pooling,
  // linear projection to the model width.
  Mat<S> stem_w;  // 9*C x K
  RowVec<S> stem_b;
  RowVec<S> gn1_g, gn1_b;
  Mat<S> conv1_w;  // 9*K x K
  RowVec<S> conv1_b;
  RowVec<S> gn2_g, gn2_b;
  Mat<S> conv2_w;
  RowVec<S> conv2_b;
  Mat<S> proj_w;  // 16*K x D
  RowVec<S> proj_b;
  std::vector<BlockParams<S>> blocks;
  RowVec<S> lnf_g, lnf_b;  // pre-norm only

  // f(name, tensor, role) for every trainable tensor in a fixed order.
  template <class F>
  void visit(const ModelConfig& cfg, F&& f);
  template <class F>
  void visit(const ModelConfig& cfg, F&& f) const;
};

template <class S>
ModelParams<S> init_params(const ModelConfig& cfg, Rng& rng);
template <class S>
ModelParams<S> zeros_like(const ModelConfig& cfg);
template <class To, class From>
ModelParams<To> cast_params(const ModelConfig& cfg, const ModelParams<From>& p);
std::size_t parameter_count(const ModelConfig& cfg);

// Per-block inputs of earlier segments (oldest first).
template <class S>
struct Memory {
  std::vector<Mat<S>> layers;
  std::size_t length() const { return layers.empty() ? 0 : layers[0].rows(); }
};

// Embeds a sequence; patch positions still unresolved (-1) are resolved
// with `mode`.
template <class S>
Mat<S> embed_inputs(const ModelParams<S>& p, const ModelConfig& cfg,
                    const TokenSeq& seq, Mode mode, Rng* rng);

template <class S>
struct ForwardResult {
  Mat<S> hidden;  // final (normalized) hidden states, T x D
  Memory<S> memory;
};

// Inference forward. Rows attend causally to the memory and to earlier rows;
// the returned memory holds the last mem_len block inputs.
template <class S>
ForwardResult<S> forward_hidden(const ModelParams<S>& p, const ModelConfig& cfg,
                                const Mat<S>& x, const Memory<S>* memory);
template <class S>
Mat<S> output_logits(const ModelParams<S>& p, const ModelConfig& cfg,
                     const Mat<S>& hidden);
template <class S>
struct LogitsResult {
  Mat<S> logits;
  Memory<S> memory;
};
template <class S>
LogitsResult<S> forward(const ModelParams<S>& p, const ModelConfig& cfg,
                        const Mat<S>& x, const Memory<S>* memory);

// -sum over masked rows of log softmax(logits)[target]. Row i predicts
// targets[i]; an all-zero mask gives 0.
template <class S>
double loss_masked_nll(const Mat<S>& logits, const std::vector<Token>& targets,
                       const std::vector<std::uint8_t>& mask);

template <class S>
Mat<S> softmax_rows(const Mat<S>& logits);

struct GradOptions {
  Rng* dropout_rng = nullptr;  // null: dropout off
};

template <class S>
struct GradResult {
  double loss = 0.0;          // summed masked NLL
  std::size_t targets = 0;    // masked target count
  std::size_t tokens = 0;     // non-pad tokens processed
  ModelParams<S> grads;
};

// Teacher-forced loss and gradients for a batch of sequences. Position i
// predicts entry i+1 whenever loss_mask[i+1] is set. Leading padding is
// skipped (it is never attended).
template <class S>
GradResult<S> compute_gradients(const ModelParams<S>& p, const ModelConfig& cfg,
                                const std::vector<const TokenSeq*>& batch,
                                const GradOptions& opt);
template <class S>
double batch_loss(const ModelParams<S>& p, const ModelConfig& cfg,
                  const std::vector<const TokenSeq*>& batch);

// ---------------------------------------------------------------------------
// Decoding

enum class Strategy { kGreedy, kSample };

struct DecodeOptions {
  Strategy strategy = Strategy::kGreedy;
  double temperature = 1.0;
};

// Incremental decoding context: memory of everything fed so far plus
// entries queued for the next forward pass. Before each pass the memory is
// trimmed so memory + new entries span at most `window` positions.
template <class S>
struct DecodeState {
  Memory<S> memory;
  TokenSeq pending;
  int window = 0;
  std::size_t fed = 0;
};

template <class S>
DecodeState<S> start_decode(const ModelConfig& cfg);

// Picks one token from `logits` restricted to `range`.
template <class S>
Token choose_token(const RowVec<S>& logits, TokenRange range,
                   const DecodeOptions& opt, Rng* rng);

// Feeds the pending entries and decodes `count` tokens, each drawn from
// `range`. Emitted tokens are fed back as action entries (mask 1, local
// position kActionPosition).
template <class S>
std::vector<Token> decode_step(const ModelParams<S>& p, const ModelConfig& cfg,
                               DecodeState<S>& state, TokenRange range,
                               std::size_t count, const DecodeOptions& opt,
                               Rng* rng);

// Reference decoder: recomputes the whole context for every token.
template <class S>
std::vector<Token> decode_recompute(const ModelParams<S>& p,
                                    const ModelConfig& cfg, TokenSeq& context,
                                    TokenRange range, std::size_t count,
                                    const DecodeOptions& opt, Rng* rng);

// ---------------------------------------------------------------------------

template <class S>
template <class F>
void ModelParams<S>::visit(const ModelConfig& cfg, F&& f) {
  f("embed", embed, ParamRole::kEmbedding);
  if (!cfg.tied_embedding) f("head", head, ParamRole::kWeight);
  f("local_pos", local_pos, ParamRole::kEmbedding);
  f("action_marker", action_marker, ParamRole::kEmbedding);
  f("patch_row", patch_row, ParamRole::kEmbedding);
  f("patch_col", patch_col, ParamRole::kEmbedding);
  f("patch.stem_w", stem_w, ParamRole::kWeight);
  f("patch.stem_b", stem_b, ParamRole::kBias);
  f("patch.gn1_g", gn1_g, ParamRole::kNorm);
  f("patch.gn1_b", gn1_b, ParamRole::kNorm);
  f("patch.conv1_w", conv1_w, ParamRole::kWeight);
  f("patch.conv1_b", conv1_b, ParamRole::kBias);
  f("patch.gn2_g", gn2_g, ParamRole::kNorm);
  f("patch.gn2_b", gn2_b, ParamRole::kNorm);
  f("patch.conv2_w", conv2_w, ParamRole::kWeight);
  f("patch.conv2_b", conv2_b, ParamRole::kBias);
  f("patch.proj_w", proj_w, ParamRole::kWeight);
  f("patch.proj_b", proj_b, ParamRole::kBias);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& b = blocks[i];
    const std::string n = "block" + std::to_string(i) + ".";
    f(n + "ln1_g", b.ln1_g, ParamRole::kNorm);
    f(n + "ln1_b", b.ln1_b, ParamRole::kNorm);
    f(n + "w_qkv", b.w_qkv, ParamRole::kWeight);
    f(n + "w_o", b.w_o, ParamRole::kWeight);
    f(n + "b_o", b.b_o, ParamRole::kBias);
    f(n + "w_r", b.w_r, ParamRole::kWeight);
    f(n + "r_u", b.r_u, ParamRole::kBias);
    f(n + "r_v", b.r_v, ParamRole::kBias);
    f(n + "ln2_g", b.ln2_g, ParamRole::kNorm);
    f(n + "ln2_b", b.ln2_b, ParamRole::kNorm);
    f(n + "w_1", b.w_1, ParamRole::kWeight);
    f(n + "b_1", b.b_1, ParamRole::kBias);
    f(n + "w_2", b.w_2, ParamRole::kWeight);
    f(n + "b_2", b.b_2, ParamRole::kBias);
  }
  if (cfg.norm == NormPlacement::kPre) {
    f("lnf_g", lnf_g, ParamRole::kNorm);
    f("lnf_b", lnf_b, ParamRole::kNorm);
  }
}

template <class S>
template <class F>
void ModelParams<S>::visit(const ModelConfig& cfg, F&& f) const {
  const_cast<ModelParams<S>*>(this)->visit(
      cfg, [&](const std::string& name, auto& t, ParamRole role) {
        f(name, static_cast<const std::remove_reference_t<decltype(t)>&>(t), role);
      });
}

}  // namespace fdm
