#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fdm/dataset.hpp"
#include "fdm/model.hpp"

namespace fdm {

struct TrainConfig {
  std::size_t batch = 512;
  std::size_t seq_len = 1024;
  std::int64_t warmup_steps = 15000;
  std::int64_t decay_steps = 240000;
  double lr_max = 5e-5;
  double decay_factor = 20.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;  // not applied to biases, norms, embeddings
  double clip_norm = 1.0;      // global gradient norm; 0 disables
  std::int64_t total_steps = 255000;
  std::int64_t checkpoint_every = 1000;  // 0: only at the end
  std::uint64_t seed = 0;
  int workers = 1;  // sampler rng streams

  // "db1": the full-scale schedule. "desk": batch 16, L 256 and a 150/2400
  // step schedule with the same peak rate and decay factor.
  static TrainConfig preset(const std::string& name);
  double lr_min() const { return lr_max / decay_factor; }
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Linear warm-up from 0, cosine decay to lr_max / decay_factor, then flat.
double lr_at(std::int64_t step, const TrainConfig& cfg);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
};

// AdamW on one flat tensor; `t` is the 1-based update count. Decay is
// decoupled: p -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p).
template <class S>
void adamw_update(std::span<S> p, std::span<const S> g, std::span<S> m,
                  std::span<S> v, std::int64_t t, double lr,
                  double weight_decay, const AdamHyper& h);

template <class S>
struct AdamState {
  std::int64_t step = 0;  // completed updates
  ModelParams<S> m;
  ModelParams<S> v;
};

template <class S>
AdamState<S> adam_init(const ModelConfig& cfg);

// Updates every tensor; decay applies to ParamRole::kWeight tensors only.
// Throws ShapeError on mismatched shapes and NumericalError on a
// non-finite gradient.
template <class S>
void adamw_step(ModelParams<S>& params, const ModelParams<S>& grads,
                AdamState<S>& state, double lr, const ModelConfig& mcfg,
                const TrainConfig& tcfg);

// Scales grads so their global L2 norm is at most `max_norm`; returns the
// norm before scaling.
template <class S>
double clip_global_norm(ModelParams<S>& grads, const ModelConfig& cfg,
                        double max_norm);

// ---------------------------------------------------------------------------
// Training loop

struct TrainState {
  ModelConfig model;
  ModelParams<float> params;
  AdamState<float> opt;
  std::int64_t step = 0;  // completed updates
  std::uint64_t seed = 0;
  Rng rng;  // draws the per-step dropout seeds
};

TrainState init_train_state(const ModelConfig& model, std::uint64_t seed);

struct TrainLogRow {
  std::int64_t step = 0;
  double loss = 0.0;  // mean NLL per masked target, before the update
  double lr = 0.0;
  double tokens_per_s = 0.0;
};

std::string format_log_row(const TrainLogRow& row);
inline constexpr const char* kTrainLogHeader = "step,loss,lr,tokens_per_s";

struct TrainHooks {
  // Checkpoints are written here; empty disables them.
  std::filesystem::path checkpoint_path;
  // Receives every row; the CLI appends them to the metrics log.
  std::function<void(const TrainLogRow&)> on_step;
};

// Runs updates until state.step reaches cfg.total_steps. Step s trains on
// BatchSampler batch s with learning rate lr_at(s), so a run resumed from a
// checkpoint replays the same stream. A non-finite loss raises
// NumericalError before the update; the last checkpoint is left intact.
std::vector<TrainLogRow> train(TrainState& state, const Dataset& data,
                               const SampleWeights& weights,
                               const PromptConfig& prompt,
                               const TrainConfig& cfg,
                               const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Checkpoints: "FDMC", model config, counters, rng state, then the named
// f32 parameter tensors followed by the optimizer moments.

inline constexpr std::uint8_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const TrainState& state);
TrainState parse_checkpoint(std::string_view bytes);
void checkpoint_save(const std::filesystem::path& path, const TrainState& state);
TrainState checkpoint_load(const std::filesystem::path& path);

}  // namespace fdm
