#include <cmath>

#include "fdm/model.hpp"
#include "fdm/patches.hpp"

namespace fdm {

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  if (name == "desk") return c;
  if (name == "db1") {
    c.blocks = 24;
    c.heads = 16;
    c.width = 2048;
    c.ffn_size = 8192;
    c.dropout = 0.1;
    c.seq_len = 1024;
    return c;
  }
  throw ConfigError("unknown model preset '" + name + "' (expected desk or db1)");
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model config: " + what);
  };
  need(blocks >= 1, "blocks must be positive");
  need(heads >= 1 && width % heads == 0, "width must be divisible by heads");
  need(width % 2 == 0, "width must be even");
  need(ffn_size >= width && ffn_size % 2 == 0, "ffn_size must be even and >= width");
  need(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  need(seq_len >= 1, "seq_len must be positive");
  need(table_size == static_cast<int>(vocab::kTableSize), "table_size must be 33205");
  need(patch_channels >= 1, "patch_channels must be positive");
  need(norm_groups >= 1 && patch_hidden % norm_groups == 0,
       "patch_hidden must be a multiple of norm_groups");
}

std::string to_string(NormPlacement n) { return n == NormPlacement::kPre ? "pre" : "post"; }

NormPlacement parse_norm(const std::string& s) {
  if (s == "pre") return NormPlacement::kPre;
  if (s == "post") return NormPlacement::kPost;
  throw ConfigError("norm placement must be pre or post, got '" + s + "'");
}

namespace {

template <class S>
void shape_params(const ModelConfig& cfg, ModelParams<S>& p) {
  const int d = cfg.width, v = cfg.table_size, k = cfg.patch_hidden;
  const int c = cfg.patch_channels, f = cfg.ffn_size;
  p.embed = Mat<S>::Zero(v, d);
  if (!cfg.tied_embedding) p.head = Mat<S>::Zero(d, v);
  p.local_pos = Mat<S>::Zero(cfg.seq_len, d);
  p.action_marker = RowVec<S>::Zero(d);
  p.patch_row = Mat<S>::Zero(kPatchPositions, d);
  p.patch_col = Mat<S>::Zero(kPatchPositions, d);
  p.stem_w = Mat<S>::Zero(9 * c, k);
  p.stem_b = RowVec<S>::Zero(k);
  p.gn1_g = RowVec<S>::Ones(k);
  p.gn1_b = RowVec<S>::Zero(k);
  p.conv1_w = Mat<S>::Zero(9 * k, k);
  p.conv1_b = RowVec<S>::Zero(k);
  p.gn2_g = RowVec<S>::Ones(k);
  p.gn2_b = RowVec<S>::Zero(k);
  p.conv2_w = Mat<S>::Zero(9 * k, k);
  p.conv2_b = RowVec<S>::Zero(k);
  p.proj_w = Mat<S>::Zero(16 * k, d);
  p.proj_b = RowVec<S>::Zero(d);
  p.blocks.resize(cfg.blocks);
  for (auto& b : p.blocks) {
    b.ln1_g = RowVec<S>::Ones(d);
    b.ln1_b = RowVec<S>::Zero(d);
    b.w_qkv = Mat<S>::Zero(d, 3 * d);
    b.w_o = Mat<S>::Zero(d, d);
    b.b_o = RowVec<S>::Zero(d);
    b.w_r = Mat<S>::Zero(d, d);
    b.r_u = RowVec<S>::Zero(d);
    b.r_v = RowVec<S>::Zero(d);
    b.ln2_g = RowVec<S>::Ones(d);
    b.ln2_b = RowVec<S>::Zero(d);
    b.w_1 = Mat<S>::Zero(d, f);
    b.b_1 = RowVec<S>::Zero(f);
    b.w_2 = Mat<S>::Zero(f / 2, d);
    b.b_2 = RowVec<S>::Zero(d);
  }
  if (cfg.norm == NormPlacement::kPre) {
    p.lnf_g = RowVec<S>::Ones(d);
    p.lnf_b = RowVec<S>::Zero(d);
  }
}

}  // namespace

template <class S>
ModelParams<S> init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams<S> p;
  shape_params(cfg, p);
  // Truncated normal, std 0.02, cut at two standard deviations.
  p.visit(cfg, [&](const std::string&, auto& t, ParamRole role) {
    if (role == ParamRole::kWeight || role == ParamRole::kEmbedding) {
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        double z;
        do {
          z = rng.normal();
        } while (std::abs(z) > 2.0);
        t.data()[i] = static_cast<S>(0.02 * z);
      }
    }
  });
  return p;
}

template <class S>
ModelParams<S> zeros_like(const ModelConfig& cfg) {
  ModelParams<S> p;
  shape_params(cfg, p);
  p.visit(cfg, [](const std::string&, auto& t, ParamRole) { t.setZero(); });
  return p;
}

template <class To, class From>
ModelParams<To> cast_params(const ModelConfig& cfg, const ModelParams<From>& p) {
  ModelParams<To> out;
  shape_params(cfg, out);
  std::vector<const From*> src;
  p.visit(cfg, [&](const std::string&, const auto& t, ParamRole) { src.push_back(t.data()); });
  std::size_t i = 0;
  out.visit(cfg, [&](const std::string&, auto& t, ParamRole) {
    const From* s = src[i++];
    for (Eigen::Index j = 0; j < t.size(); ++j) t.data()[j] = static_cast<To>(s[j]);
  });
  return out;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  const std::size_t d = cfg.width, v = cfg.table_size, k = cfg.patch_hidden;
  const std::size_t c = cfg.patch_channels, f = cfg.ffn_size;
  std::size_t n = v * d + (cfg.tied_embedding ? 0 : d * v) + cfg.seq_len * d + d +
                  2 * kPatchPositions * d;
  n += 9 * c * k + k + 2 * k + 9 * k * k + k + 2 * k + 9 * k * k + k + 16 * k * d + d;
  const std::size_t block = 2 * d + 3 * d * d + d * d + d + d * d + 2 * d + 2 * d + d * f +
                            f + (f / 2) * d + d;
  n += cfg.blocks * block;
  if (cfg.norm == NormPlacement::kPre) n += 2 * d;
  return n;
}

template ModelParams<float> init_params<float>(const ModelConfig&, Rng&);
template ModelParams<double> init_params<double>(const ModelConfig&, Rng&);
template ModelParams<float> zeros_like<float>(const ModelConfig&);
template ModelParams<double> zeros_like<double>(const ModelConfig&);
template ModelParams<float> cast_params<float, double>(const ModelConfig&, const ModelParams<double>&);
template ModelParams<double> cast_params<double, float>(const ModelConfig&, const ModelParams<float>&);
template ModelParams<float> cast_params<float, float>(const ModelConfig&, const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelConfig&, const ModelParams<double>&);

}  // namespace fdm
