#include <cmath>
#include <iostream>
#include <map>

#include "internal.hpp"

namespace fdm {

namespace detail {

// Transformer-XL distance encoding: row d = [sin(d * f_i), cos(d * f_i)].
// Rows do not depend on n, so one growing table per width is reused.
template <class S>
Mat<S> distance_encoding(Eigen::Index n, int d) {
  thread_local std::map<int, Mat<S>> tables;
  Mat<S>& r = tables[d];
  if (r.rows() < n) {
    const Eigen::Index old = r.rows();
    Mat<S> grown(n, d);
    grown.topRows(old) = r;
    const int half = d / 2;
    for (Eigen::Index pos = old; pos < n; ++pos) {
      for (int i = 0; i < half; ++i) {
        const double f = std::pow(10000.0, -2.0 * i / d);
        grown(pos, i) = static_cast<S>(std::sin(pos * f));
        grown(pos, half + i) = static_cast<S>(std::cos(pos * f));
      }
    }
    r = std::move(grown);
  }
  return r.topRows(n);
}

template <class S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Mat<S> m(rows, cols);
  const S keep = static_cast<S>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform() < rate ? S(0) : keep;
  }
  return m;
}

template <class S>
struct EmbedCache {
  std::vector<Eigen::Index> patch_rows;
  std::vector<int> row_pos, col_pos;
  PatchCache<S> patch;
  Mat<S> drop;
};

template <class S>
struct BlockCache {
  Mat<S> src_mem;  // key/value source for memory rows
  Mat<S> a;        // key/value/query source for current rows
  NormCache<S> ln1, ln2;
  Mat<S> qkv, kv_mem, rk;
  std::vector<Mat<S>> probs;
  Mat<S> o, drop_a, drop_f, z, g, y;
};

template <class S>
struct ForwardCache {
  EmbedCache<S> embed;
  std::vector<BlockCache<S>> blocks;
  NormCache<S> lnf;
  Mat<S> R;
};

template <class S>
Mat<S> embed_rows(const ModelParams<S>& p, const ModelConfig& cfg, const TokenSeq& seq,
                  std::size_t begin, Mode mode, Rng* pos_rng, Rng* drop_rng,
                  EmbedCache<S>* cache) {
  const auto t = static_cast<Eigen::Index>(seq.size() - begin);
  Mat<S> x(t, cfg.width);
  EmbedCache<S> local;
  EmbedCache<S>& c = cache ? *cache : local;
  std::vector<const Patch*> patches;
  for (Eigen::Index i = 0; i < t; ++i) {
    const Entry& e = seq.entries[begin + i];
    if (e.is_patch()) {
      int rp = e.row_pos, cp = e.col_pos;
      if (rp < 0) rp = patch_position_index(e.patch->rows, mode, pos_rng);
      if (cp < 0) cp = patch_position_index(e.patch->cols, mode, pos_rng);
      patches.push_back(e.patch.get());
      c.patch_rows.push_back(i);
      c.row_pos.push_back(rp);
      c.col_pos.push_back(cp);
      x.row(i).setZero();
    } else {
      if (e.symbol >= static_cast<Token>(cfg.table_size)) {
        throw RangeError("symbol " + std::to_string(e.symbol) + " outside the embedding table");
      }
      x.row(i) = p.embed.row(e.symbol);
    }
    const int lp = seq.local_pos[begin + i];
    if (lp >= 0) {
      if (lp >= cfg.seq_len) {
        throw RangeError("local position " + std::to_string(lp) + " exceeds the table");
      }
      x.row(i) += p.local_pos.row(lp);
    } else if (lp == kActionPosition) {
      x.row(i) += p.action_marker;
    }
  }
  if (!patches.empty()) {
    const Mat<S> pe = patch_forward(p, cfg, patches, cache ? &c.patch : nullptr);
    for (std::size_t j = 0; j < patches.size(); ++j) {
      x.row(c.patch_rows[j]) += pe.row(j) + p.patch_row.row(c.row_pos[j]) +
                                p.patch_col.row(c.col_pos[j]);
    }
  }
  if (drop_rng && cfg.dropout > 0) {
    c.drop = dropout_mask<S>(t, cfg.width, cfg.dropout, *drop_rng);
    x.array() *= c.drop.array();
  }
  return x;
}

template <class S>
Mat<S> block_forward(const BlockParams<S>& b, const ModelConfig& cfg, const Mat<S>& x,
                     const Mat<S>& mem, const Mat<S>& R, Rng* drop_rng, BlockCache<S>* cache) {
  const bool pre = cfg.norm == NormPlacement::kPre;
  const Eigen::Index t = x.rows(), m = mem.rows(), n = m + t;
  const int d = cfg.width, heads = cfg.heads, dh = cfg.head_dim();
  const S scale = S(1) / std::sqrt(S(dh));
  BlockCache<S> local;
  BlockCache<S>& c = cache ? *cache : local;

  c.a = pre ? layer_norm(x, b.ln1_g, b.ln1_b, &c.ln1) : x;
  c.src_mem = (pre && m > 0) ? layer_norm<S>(mem, b.ln1_g, b.ln1_b, nullptr) : mem;
  c.qkv.noalias() = c.a * b.w_qkv;
  c.kv_mem = Mat<S>(m, 2 * d);
  if (m > 0) c.kv_mem.noalias() = c.src_mem * b.w_qkv.rightCols(2 * d);
  c.rk.noalias() = R.topRows(n) * b.w_r;
  c.o.resize(t, d);
  c.probs.resize(heads);

  Mat<S> keys(n, dh), vals(n, dh);
  for (int h = 0; h < heads; ++h) {
    const auto off = h * dh;
    keys.topRows(m) = c.kv_mem.middleCols(off, dh);
    keys.bottomRows(t) = c.qkv.middleCols(d + off, dh);
    vals.topRows(m) = c.kv_mem.middleCols(d + off, dh);
    vals.bottomRows(t) = c.qkv.middleCols(2 * d + off, dh);
    const Mat<S> qu = c.qkv.middleCols(off, dh).rowwise() + b.r_u.segment(off, dh);
    const Mat<S> qv = c.qkv.middleCols(off, dh).rowwise() + b.r_v.segment(off, dh);
    Mat<S> scores = qu * keys.transpose();
    const Mat<S> bd = qv * c.rk.middleCols(off, dh).transpose();
    Mat<S>& pr = c.probs[h];
    pr.setZero(t, n);
    for (Eigen::Index i = 0; i < t; ++i) {
      const Eigen::Index last = i + m;  // newest visible key
      S mx = -std::numeric_limits<S>::infinity();
      for (Eigen::Index j = 0; j <= last; ++j) {
        scores(i, j) = (scores(i, j) + bd(i, last - j)) * scale;
        mx = std::max(mx, scores(i, j));
      }
      S sum = 0;
      for (Eigen::Index j = 0; j <= last; ++j) {
        pr(i, j) = std::exp(scores(i, j) - mx);
        sum += pr(i, j);
      }
      pr.row(i).head(last + 1) /= sum;
    }
    c.o.middleCols(off, dh).noalias() = pr * vals;
  }
  Mat<S> attn = (c.o * b.w_o).rowwise() + b.b_o;
  if (drop_rng && cfg.dropout > 0) {
    c.drop_a = dropout_mask<S>(t, d, cfg.dropout, *drop_rng);
    attn.array() *= c.drop_a.array();
  }
  Mat<S> h1 = x + attn;
  if (!pre) h1 = layer_norm(h1, b.ln1_g, b.ln1_b, &c.ln1);
  c.z = pre ? layer_norm(h1, b.ln2_g, b.ln2_b, &c.ln2) : h1;
  c.g = (c.z * b.w_1).rowwise() + b.b_1;
  const Eigen::Index half = c.g.cols() / 2;
  c.y = c.g.leftCols(half).array() *
        c.g.rightCols(half).unaryExpr([](S v) { return gelu(v); }).array();
  Mat<S> f = (c.y * b.w_2).rowwise() + b.b_2;
  if (drop_rng && cfg.dropout > 0) {
    c.drop_f = dropout_mask<S>(t, d, cfg.dropout, *drop_rng);
    f.array() *= c.drop_f.array();
  }
  Mat<S> out = h1 + f;
  if (!pre) out = layer_norm(out, b.ln2_g, b.ln2_b, &c.ln2);
  return out;
}

template <class S>
Mat<S> block_backward(const BlockParams<S>& b, const ModelConfig& cfg, const BlockCache<S>& c,
                      const Mat<S>& R, const Mat<S>& d_out, BlockParams<S>& gb) {
  const bool pre = cfg.norm == NormPlacement::kPre;
  const Eigen::Index t = d_out.rows(), m = c.src_mem.rows(), n = m + t;
  const int d = cfg.width, heads = cfg.heads, dh = cfg.head_dim();
  const S scale = S(1) / std::sqrt(S(dh));

  Mat<S> dh1 = pre ? d_out : layer_norm_backward(d_out, b.ln2_g, c.ln2, gb.ln2_g, gb.ln2_b);
  Mat<S> df = dh1;
  if (c.drop_f.size()) df.array() *= c.drop_f.array();
  gb.w_2.noalias() += c.y.transpose() * df;
  gb.b_2 += df.colwise().sum();
  const Mat<S> dy = df * b.w_2.transpose();
  const Eigen::Index half = c.g.cols() / 2;
  Mat<S> dg(t, 2 * half);
  const auto gate = c.g.rightCols(half);
  dg.leftCols(half) = dy.array() * gate.unaryExpr([](S v) { return gelu(v); }).array();
  dg.rightCols(half) = dy.array() * c.g.leftCols(half).array() *
                       gate.unaryExpr([](S v) { return gelu_grad(v); }).array();
  gb.w_1.noalias() += c.z.transpose() * dg;
  gb.b_1 += dg.colwise().sum();
  const Mat<S> dz = dg * b.w_1.transpose();
  if (pre) {
    dh1 += layer_norm_backward(dz, b.ln2_g, c.ln2, gb.ln2_g, gb.ln2_b);
  } else {
    dh1 += dz;
    dh1 = layer_norm_backward(dh1, b.ln1_g, c.ln1, gb.ln1_g, gb.ln1_b);
  }
  Mat<S> dx = dh1;
  Mat<S> dattn = dh1;
  if (c.drop_a.size()) dattn.array() *= c.drop_a.array();
  gb.w_o.noalias() += c.o.transpose() * dattn;
  gb.b_o += dattn.colwise().sum();
  const Mat<S> d_o = dattn * b.w_o.transpose();

  Mat<S> dqkv = Mat<S>::Zero(t, 3 * d);
  Mat<S> dkv_mem = Mat<S>::Zero(m, 2 * d);
  Mat<S> drk(n, d);
  Mat<S> keys(n, dh), vals(n, dh);
  for (int h = 0; h < heads; ++h) {
    const auto off = h * dh;
    keys.topRows(m) = c.kv_mem.middleCols(off, dh);
    keys.bottomRows(t) = c.qkv.middleCols(d + off, dh);
    vals.topRows(m) = c.kv_mem.middleCols(d + off, dh);
    vals.bottomRows(t) = c.qkv.middleCols(2 * d + off, dh);
    const Mat<S> qu = c.qkv.middleCols(off, dh).rowwise() + b.r_u.segment(off, dh);
    const Mat<S> qv = c.qkv.middleCols(off, dh).rowwise() + b.r_v.segment(off, dh);
    const Mat<S>& pr = c.probs[h];
    const auto doh = d_o.middleCols(off, dh);
    const Mat<S> dp = doh * vals.transpose();
    const Mat<S> dv = pr.transpose() * doh;
    Mat<S> ds = pr.array() * (dp.colwise() - (pr.array() * dp.array()).rowwise().sum().matrix()).array();
    ds *= scale;
    Mat<S> dbd = Mat<S>::Zero(t, n);
    for (Eigen::Index i = 0; i < t; ++i) {
      const Eigen::Index last = i + m;
      for (Eigen::Index j = 0; j <= last; ++j) dbd(i, last - j) = ds(i, j);
    }
    const Mat<S> dqu = ds * keys;
    const Mat<S> dk = ds.transpose() * qu;
    const Mat<S> dqv = dbd * c.rk.middleCols(off, dh);
    drk.middleCols(off, dh).noalias() = dbd.transpose() * qv;
    gb.r_u.segment(off, dh) += dqu.colwise().sum();
    gb.r_v.segment(off, dh) += dqv.colwise().sum();
    dqkv.middleCols(off, dh) = dqu + dqv;
    dqkv.middleCols(d + off, dh) = dk.bottomRows(t);
    dqkv.middleCols(2 * d + off, dh) = dv.bottomRows(t);
    if (m > 0) {
      dkv_mem.middleCols(off, dh) = dk.topRows(m);
      dkv_mem.middleCols(d + off, dh) = dv.topRows(m);
    }
  }
  gb.w_r.noalias() += R.topRows(n).transpose() * drk;
  gb.w_qkv.noalias() += c.a.transpose() * dqkv;
  if (m > 0) gb.w_qkv.rightCols(2 * d).noalias() += c.src_mem.transpose() * dkv_mem;
  const Mat<S> da = dqkv * b.w_qkv.transpose();
  if (pre) {
    dx += layer_norm_backward(da, b.ln1_g, c.ln1, gb.ln1_g, gb.ln1_b);
  } else {
    dx += da;
  }
  return dx;
}

// Runs every block over `x`; fills `cache` when given. Returns the final
// hidden states (after the closing norm in pre-norm mode).
template <class S>
Mat<S> run_blocks(const ModelParams<S>& p, const ModelConfig& cfg, Mat<S> x,
                  const Memory<S>* memory, Rng* drop_rng, ForwardCache<S>* cache,
                  Memory<S>* new_memory) {
  const Eigen::Index m = memory ? static_cast<Eigen::Index>(memory->length()) : 0;
  if (memory && m > 0 && memory->layers.size() != static_cast<std::size_t>(cfg.blocks)) {
    throw ShapeError("memory has the wrong number of layers");
  }
  const Mat<S> local_r = cache ? Mat<S>() : distance_encoding<S>(m + x.rows(), cfg.width);
  if (cache) cache->R = distance_encoding<S>(m + x.rows(), cfg.width);
  const Mat<S>& R = cache ? cache->R : local_r;
  if (cache) cache->blocks.resize(cfg.blocks);
  const Mat<S> empty(0, cfg.width);
  const Eigen::Index keep = cfg.resolved_mem_len();
  if (new_memory) new_memory->layers.resize(cfg.blocks);
  for (int i = 0; i < cfg.blocks; ++i) {
    const Mat<S>& mem = m > 0 ? memory->layers[i] : empty;
    if (new_memory) {
      Mat<S> all(mem.rows() + x.rows(), cfg.width);
      all << mem, x;
      const Eigen::Index k = std::min<Eigen::Index>(keep, all.rows());
      new_memory->layers[i] = all.bottomRows(k);
    }
    x = block_forward(p.blocks[i], cfg, x, mem, R, drop_rng, cache ? &cache->blocks[i] : nullptr);
    if (!x.allFinite()) {
      throw NumericalError("non-finite activations in block " + std::to_string(i));
    }
  }
  if (cfg.norm == NormPlacement::kPre) {
    x = layer_norm(x, p.lnf_g, p.lnf_b, cache ? &cache->lnf : nullptr);
  }
  return x;
}

std::size_t leading_pad(const TokenSeq& seq) {
  std::size_t i = 0;
  while (i < seq.size() && seq.local_pos[i] == kNoPosition) ++i;
  return i;
}

}  // namespace detail

using namespace detail;

template <class S>
Mat<S> embed_inputs(const ModelParams<S>& p, const ModelConfig& cfg, const TokenSeq& seq,
                    Mode mode, Rng* rng) {
  return embed_rows<S>(p, cfg, seq, 0, mode, rng, nullptr, nullptr);
}

template <class S>
ForwardResult<S> forward_hidden(const ModelParams<S>& p, const ModelConfig& cfg,
                                const Mat<S>& x, const Memory<S>* memory) {
  ForwardResult<S> r;
  r.hidden = run_blocks<S>(p, cfg, x, memory, nullptr, nullptr, &r.memory);
  return r;
}

template <class S>
Mat<S> output_logits(const ModelParams<S>& p, const ModelConfig& cfg, const Mat<S>& hidden) {
  if (cfg.tied_embedding) return hidden * p.embed.transpose();
  return hidden * p.head;
}

template <class S>
LogitsResult<S> forward(const ModelParams<S>& p, const ModelConfig& cfg, const Mat<S>& x,
                        const Memory<S>* memory) {
  auto r = forward_hidden(p, cfg, x, memory);
  LogitsResult<S> out{output_logits(p, cfg, r.hidden), std::move(r.memory)};
  if (!out.logits.allFinite()) throw NumericalError("non-finite logits");
  return out;
}

template <class S>
Mat<S> softmax_rows(const Mat<S>& logits) {
  Mat<S> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const S mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <class S>
double loss_masked_nll(const Mat<S>& logits, const std::vector<Token>& targets,
                       const std::vector<std::uint8_t>& mask) {
  if (targets.size() != static_cast<std::size_t>(logits.rows()) || mask.size() != targets.size()) {
    throw ShapeError("targets and mask must have one entry per logits row");
  }
  double loss = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    any = true;
    if (targets[i] >= static_cast<Token>(logits.cols())) throw RangeError("target outside vocabulary");
    const double mx = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) sum += std::exp(logits(i, j) - mx);
    loss += mx + std::log(sum) - logits(i, targets[i]);
  }
  if (!any) std::cerr << "warning: loss mask is all zero; loss defined as 0\n";
  return loss;
}

namespace {

constexpr Eigen::Index kHeadChunk = 256;

// Masked NLL over selected rows of `hidden`; writes d(hidden) and the head
// gradient when `grads` is given.
template <class S>
double head_loss(const ModelParams<S>& p, const ModelConfig& cfg, const Mat<S>& hidden,
                 const std::vector<Eigen::Index>& rows, const std::vector<Token>& targets,
                 Mat<S>* d_hidden, ModelParams<S>* grads) {
  double loss = 0.0;
  const Eigen::Index total = static_cast<Eigen::Index>(rows.size());
  for (Eigen::Index c0 = 0; c0 < total; c0 += kHeadChunk) {
    const Eigen::Index n = std::min(kHeadChunk, total - c0);
    Mat<S> h(n, cfg.width);
    for (Eigen::Index i = 0; i < n; ++i) h.row(i) = hidden.row(rows[c0 + i]);
    Mat<S> logits = output_logits(p, cfg, h);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Token tgt = targets[c0 + i];
      const S mx = logits.row(i).maxCoeff();
      const S shifted = logits(i, tgt) - mx;
      logits.row(i).array() = (logits.row(i).array() - mx).exp();
      const S sum = logits.row(i).sum();
      loss += std::log(static_cast<double>(sum)) - static_cast<double>(shifted);
      logits.row(i) /= sum;
      logits(i, tgt) -= S(1);
    }
    if (!grads) continue;
    Mat<S> dh;
    if (cfg.tied_embedding) {
      dh.noalias() = logits * p.embed;
      grads->embed.noalias() += logits.transpose() * h;
    } else {
      dh.noalias() = logits * p.head.transpose();
      grads->head.noalias() += h.transpose() * logits;
    }
    for (Eigen::Index i = 0; i < n; ++i) d_hidden->row(rows[c0 + i]) = dh.row(i);
  }
  return loss;
}

template <class S>
void select_targets(const TokenSeq& seq, std::size_t begin, std::vector<Eigen::Index>& rows,
                    std::vector<Token>& targets) {
  rows.clear();
  targets.clear();
  for (std::size_t i = begin; i + 1 < seq.size(); ++i) {
    if (!seq.loss_mask[i + 1]) continue;
    const Entry& e = seq.entries[i + 1];
    if (e.is_patch()) throw DataError("loss mask set on an image patch");
    rows.push_back(static_cast<Eigen::Index>(i - begin));
    targets.push_back(e.symbol);
  }
}

}  // namespace

template <class S>
GradResult<S> compute_gradients(const ModelParams<S>& p, const ModelConfig& cfg,
                                const std::vector<const TokenSeq*>& batch,
                                const GradOptions& opt) {
  GradResult<S> res;
  res.grads = zeros_like<S>(cfg);
  ModelParams<S>& g = res.grads;
  std::vector<Eigen::Index> rows;
  std::vector<Token> targets;
  for (const TokenSeq* seq : batch) {
    const std::size_t begin = leading_pad(*seq);
    if (begin == seq->size()) continue;
    if (seq->size() - begin > static_cast<std::size_t>(cfg.seq_len)) {
      throw ShapeError("sequence longer than seq_len");
    }
    select_targets<S>(*seq, begin, rows, targets);
    res.tokens += seq->size() - begin;
    if (rows.empty()) continue;

    ForwardCache<S> cache;
    // Patch positions are resolved by the sampler; eval mode is only a
    // fallback for unresolved entries.
    Mat<S> x = embed_rows(p, cfg, *seq, begin, Mode::kEval, nullptr, opt.dropout_rng, &cache.embed);
    const Mat<S> hidden = run_blocks(p, cfg, std::move(x), static_cast<const Memory<S>*>(nullptr),
                                     opt.dropout_rng, &cache, static_cast<Memory<S>*>(nullptr));
    Mat<S> dh = Mat<S>::Zero(hidden.rows(), hidden.cols());
    res.loss += head_loss(p, cfg, hidden, rows, targets, &dh, &g);
    res.targets += rows.size();

    if (cfg.norm == NormPlacement::kPre) dh = layer_norm_backward(dh, p.lnf_g, cache.lnf, g.lnf_g, g.lnf_b);
    for (int i = cfg.blocks - 1; i >= 0; --i) {
      dh = block_backward(p.blocks[i], cfg, cache.blocks[i], cache.R, dh, g.blocks[i]);
    }
    if (cache.embed.drop.size()) dh.array() *= cache.embed.drop.array();
    Mat<S> d_patch(static_cast<Eigen::Index>(cache.embed.patch_rows.size()), cfg.width);
    for (std::size_t j = 0; j < cache.embed.patch_rows.size(); ++j) {
      const auto r = cache.embed.patch_rows[j];
      d_patch.row(j) = dh.row(r);
      g.patch_row.row(cache.embed.row_pos[j]) += dh.row(r);
      g.patch_col.row(cache.embed.col_pos[j]) += dh.row(r);
    }
    for (Eigen::Index i = 0; i < dh.rows(); ++i) {
      const Entry& e = seq->entries[begin + i];
      if (!e.is_patch()) g.embed.row(e.symbol) += dh.row(i);
      const int lp = seq->local_pos[begin + i];
      if (lp >= 0) {
        g.local_pos.row(lp) += dh.row(i);
      } else if (lp == kActionPosition) {
        g.action_marker += dh.row(i);
      }
    }
    if (d_patch.rows() > 0) patch_backward(p, cfg, cache.embed.patch, d_patch, g);
  }
  if (!std::isfinite(res.loss)) throw NumericalError("non-finite loss");
  g.visit(cfg, [](const std::string& name, const auto& t, ParamRole) {
    if (!t.allFinite()) throw NumericalError("non-finite gradient in " + name);
  });
  return res;
}

template <class S>
double batch_loss(const ModelParams<S>& p, const ModelConfig& cfg,
                  const std::vector<const TokenSeq*>& batch) {
  double loss = 0.0;
  std::vector<Eigen::Index> rows;
  std::vector<Token> targets;
  for (const TokenSeq* seq : batch) {
    const std::size_t begin = leading_pad(*seq);
    if (begin == seq->size()) continue;
    select_targets<S>(*seq, begin, rows, targets);
    if (rows.empty()) continue;
    Mat<S> x = embed_rows<S>(p, cfg, *seq, begin, Mode::kEval, nullptr, nullptr, nullptr);
    const Mat<S> hidden = run_blocks(p, cfg, std::move(x), static_cast<const Memory<S>*>(nullptr),
                                     nullptr, static_cast<ForwardCache<S>*>(nullptr),
                                     static_cast<Memory<S>*>(nullptr));
    loss += head_loss<S>(p, cfg, hidden, rows, targets, nullptr, nullptr);
  }
  return loss;
}

#define FDM_INSTANTIATE(S)                                                                   \
  template Mat<S> embed_inputs(const ModelParams<S>&, const ModelConfig&, const TokenSeq&,   \
                               Mode, Rng*);                                                  \
  template ForwardResult<S> forward_hidden(const ModelParams<S>&, const ModelConfig&,        \
                                           const Mat<S>&, const Memory<S>*);                 \
  template Mat<S> output_logits(const ModelParams<S>&, const ModelConfig&, const Mat<S>&);   \
  template LogitsResult<S> forward(const ModelParams<S>&, const ModelConfig&, const Mat<S>&, \
                                   const Memory<S>*);                                        \
  template Mat<S> softmax_rows(const Mat<S>&);                                               \
  template double loss_masked_nll(const Mat<S>&, const std::vector<Token>&,                  \
                                  const std::vector<std::uint8_t>&);                         \
  template GradResult<S> compute_gradients(const ModelParams<S>&, const ModelConfig&,        \
                                           const std::vector<const TokenSeq*>&,              \
                                           const GradOptions&);                              \
  template double batch_loss(const ModelParams<S>&, const ModelConfig&,                      \
                             const std::vector<const TokenSeq*>&);

FDM_INSTANTIATE(float)
FDM_INSTANTIATE(double)

}  // namespace fdm
