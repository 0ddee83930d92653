#include <chrono>
#include <cmath>
#include <cstdio>

#include "fdm/train.hpp"

namespace fdm {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;   // "init"
constexpr std::uint64_t kStepStream = 0x73746570;   // "step"
constexpr std::uint64_t kBatchStream = 0x62617463;  // "batc"

}  // namespace

TrainState init_train_state(const ModelConfig& model, std::uint64_t seed) {
  model.validate();
  TrainState s;
  s.model = model;
  Rng init(derive_seed(seed, kInitStream));
  s.params = init_params<float>(model, init);
  s.opt = adam_init<float>(model);
  s.seed = seed;
  s.rng = Rng(derive_seed(seed, kStepStream));
  return s;
}

std::string format_log_row(const TrainLogRow& row) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.1f", static_cast<long long>(row.step), row.loss,
                row.lr, row.tokens_per_s);
  return buf;
}

std::vector<TrainLogRow> train(TrainState& state, const Dataset& data,
                               const SampleWeights& weights, const PromptConfig& prompt,
                               const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (cfg.seq_len != static_cast<std::size_t>(state.model.seq_len)) {
    throw ConfigError("train seq_len " + std::to_string(cfg.seq_len) +
                      " differs from model seq_len " + std::to_string(state.model.seq_len));
  }
  std::vector<TrainLogRow> log;
  if (state.step >= cfg.total_steps) return log;

  const BatchSampler sampler(data, weights, cfg.batch, cfg.seq_len, prompt,
                             derive_seed(state.seed, kBatchStream), cfg.workers);
  const bool save = !hooks.checkpoint_path.empty();
  while (state.step < cfg.total_steps) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::int64_t s = state.step;
    const auto batch = sampler.batch(static_cast<std::uint64_t>(s));
    std::vector<const TokenSeq*> seqs;
    seqs.reserve(batch.size());
    for (const auto& b : batch) seqs.push_back(&b.seq);

    Rng dropout(state.rng.next());
    GradOptions opt;
    if (state.model.dropout > 0.0) opt.dropout_rng = &dropout;
    GradResult<float> res;
    try {
      res = compute_gradients<float>(state.params, state.model, seqs, opt);
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(s) + ": " + e.what());
    }
    const double n = static_cast<double>(std::max<std::size_t>(res.targets, 1));
    const double loss = res.loss / n;
    if (!std::isfinite(loss)) throw NumericalError("step " + std::to_string(s) + ": non-finite loss");
    const float inv = static_cast<float>(1.0 / n);
    res.grads.visit(state.model, [&](const std::string&, auto& t, ParamRole) { t *= inv; });
    clip_global_norm(res.grads, state.model, cfg.clip_norm);
    const double lr = lr_at(s, cfg);
    adamw_step(state.params, res.grads, state.opt, lr, state.model, cfg);
    state.step = s + 1;

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    TrainLogRow row{s, loss, lr, secs > 0.0 ? static_cast<double>(res.tokens) / secs : 0.0};
    log.push_back(row);
    if (hooks.on_step) hooks.on_step(row);

    const bool cadence = cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0;
    if (save && (cadence || state.step == cfg.total_steps)) {
      checkpoint_save(hooks.checkpoint_path, state);
    }
  }
  return log;
}

}  // namespace fdm
