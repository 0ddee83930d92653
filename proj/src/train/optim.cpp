#include <cmath>
#include <numbers>

#include "fdm/train.hpp"

namespace fdm {

TrainConfig TrainConfig::preset(const std::string& name) {
  TrainConfig c;
  if (name == "db1") return c;
  if (name == "desk") {
    c.batch = 16;
    c.seq_len = 256;
    c.warmup_steps = 150;
    c.decay_steps = 2400;
    c.total_steps = 2550;
    c.checkpoint_every = 250;
    return c;
  }
  throw ConfigError("unknown train preset '" + name + "' (expected desk or db1)");
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("train config: " + what);
  };
  need(batch >= 1, "batch must be positive");
  need(seq_len >= 1, "seq_len must be positive");
  need(warmup_steps >= 1, "warmup_steps must be >= 1");
  need(decay_steps >= 1, "decay_steps must be positive");
  need(lr_max > 0.0 && std::isfinite(lr_max), "lr_max must be positive");
  need(decay_factor > 1.0, "decay_factor must exceed 1");
  need(beta1 > 0.0 && beta1 < 1.0, "beta1 must lie in (0, 1)");
  need(beta2 > 0.0 && beta2 < 1.0, "beta2 must lie in (0, 1)");
  need(eps > 0.0, "eps must be positive");
  need(weight_decay >= 0.0, "weight_decay must be >= 0");
  need(clip_norm >= 0.0, "clip_norm must be >= 0");
  need(total_steps >= 0, "total_steps must be >= 0");
  need(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  need(workers >= 1, "workers must be positive");
}

double lr_at(std::int64_t step, const TrainConfig& cfg) {
  if (step < 0) throw RangeError("learning-rate step must be >= 0");
  if (step < cfg.warmup_steps) {
    return cfg.lr_max * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  const double lo = cfg.lr_min();
  if (step > cfg.warmup_steps + cfg.decay_steps) return lo;
  const double t = static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(cfg.decay_steps);
  return lo + 0.5 * (cfg.lr_max - lo) * (1.0 + std::cos(std::numbers::pi * t));
}

template <class S>
void adamw_update(std::span<S> p, std::span<const S> g, std::span<S> m, std::span<S> v,
                  std::int64_t t, double lr, double weight_decay, const AdamHyper& h) {
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    throw ShapeError("adamw: parameter, gradient and moment sizes differ");
  }
  if (t < 1) throw RangeError("adamw: update count must be >= 1");
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = g[i];
    const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
    const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
    m[i] = static_cast<S>(mi);
    v[i] = static_cast<S>(vi);
    const double pi = p[i];
    p[i] = static_cast<S>(pi - lr * ((mi / c1) / (std::sqrt(vi / c2) + h.eps) + weight_decay * pi));
  }
}

template <class S>
AdamState<S> adam_init(const ModelConfig& cfg) {
  return AdamState<S>{0, zeros_like<S>(cfg), zeros_like<S>(cfg)};
}

namespace {

template <class S>
struct FlatRef {
  std::string name;
  S* data;
  Eigen::Index rows, cols;
  ParamRole role;
};

template <class S, class P>
std::vector<FlatRef<S>> flat_refs(P& params, const ModelConfig& cfg) {
  std::vector<FlatRef<S>> out;
  params.visit(cfg, [&](const std::string& name, auto& t, ParamRole role) {
    out.push_back({name, const_cast<S*>(t.data()), t.rows(), t.cols(), role});
  });
  return out;
}

}  // namespace

template <class S>
void adamw_step(ModelParams<S>& params, const ModelParams<S>& grads, AdamState<S>& state,
                double lr, const ModelConfig& mcfg, const TrainConfig& tcfg) {
  const auto p = flat_refs<S>(params, mcfg);
  const auto g = flat_refs<S>(grads, mcfg);
  const auto m = flat_refs<S>(state.m, mcfg);
  const auto v = flat_refs<S>(state.v, mcfg);
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    throw ShapeError("adamw: tensor counts differ");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (const auto* other : {&g[i], &m[i], &v[i]}) {
      if (other->rows != p[i].rows || other->cols != p[i].cols) {
        throw ShapeError("adamw: shape mismatch in " + p[i].name);
      }
    }
    const auto n = static_cast<std::size_t>(p[i].rows * p[i].cols);
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(g[i].data[j])) throw NumericalError("non-finite gradient in " + p[i].name);
    }
  }
  const AdamHyper h{tcfg.beta1, tcfg.beta2, tcfg.eps};
  const std::int64_t t = state.step + 1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto n = static_cast<std::size_t>(p[i].rows * p[i].cols);
    const double wd = p[i].role == ParamRole::kWeight ? tcfg.weight_decay : 0.0;
    adamw_update<S>({p[i].data, n}, {g[i].data, n}, {m[i].data, n}, {v[i].data, n}, t, lr, wd, h);
  }
  state.step = t;
}

template <class S>
double clip_global_norm(ModelParams<S>& grads, const ModelConfig& cfg, double max_norm) {
  double sq = 0.0;
  grads.visit(cfg, [&](const std::string&, auto& t, ParamRole) {
    sq += t.template cast<double>().squaredNorm();
  });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    grads.visit(cfg, [&](const std::string&, auto& t, ParamRole) { t *= scale; });
  }
  return norm;
}

#define FDM_INSTANTIATE(S)                                                                  \
  template void adamw_update<S>(std::span<S>, std::span<const S>, std::span<S>,             \
                                std::span<S>, std::int64_t, double, double, const AdamHyper&); \
  template AdamState<S> adam_init<S>(const ModelConfig&);                                   \
  template void adamw_step<S>(ModelParams<S>&, const ModelParams<S>&, AdamState<S>&, double, \
                              const ModelConfig&, const TrainConfig&);                      \
  template double clip_global_norm<S>(ModelParams<S>&, const ModelConfig&, double);

FDM_INSTANTIATE(float)
FDM_INSTANTIATE(double)

}  // namespace fdm
