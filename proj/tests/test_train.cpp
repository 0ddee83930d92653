#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fdm/binio.hpp"
#include "fdm/train.hpp"
#include "model_fixtures.hpp"
#include "oracles.hpp"
#include "pipeline_fixtures.hpp"

using namespace fdm;

namespace {

TrainConfig db1_schedule() { return TrainConfig::preset("db1"); }

}  // namespace

TEST_CASE("lr_at examples") {
  const TrainConfig c = db1_schedule();
  CHECK(lr_at(0, c) == 0.0);
  CHECK(std::abs(lr_at(15000, c) - 5e-5) < 1e-12);
  CHECK(std::abs(lr_at(15000 + 120000, c) - 2.625e-5) < 1e-12);
  CHECK(std::abs(lr_at(15000 + 240000, c) - 2.5e-6) < 1e-12);
  CHECK(lr_at(10'000'000, c) == c.lr_min());
  CHECK(std::abs(lr_at(7500, c) - 2.5e-5) < 1e-12);
  CHECK_THROWS_AS(lr_at(-1, c), RangeError);
}

TEST_CASE("lr_at is continuous at the warm-up boundary and non-increasing after it") {
  const TrainConfig c = db1_schedule();
  CHECK(std::abs(lr_at(14999, c) - lr_at(15000, c)) < c.lr_max / c.warmup_steps + 1e-15);
  double prev = lr_at(c.warmup_steps, c);
  for (std::int64_t s = c.warmup_steps + 1; s < c.warmup_steps + c.decay_steps + 1000; s += 37) {
    const double lr = lr_at(s, c);
    CHECK(lr <= prev);
    prev = lr;
  }
  for (std::int64_t s = 1; s < c.warmup_steps; s += 101) CHECK(lr_at(s, c) > lr_at(s - 1, c));
}

TEST_CASE("train config validation") {
  TrainConfig c = TrainConfig::preset("desk");
  CHECK_NOTHROW(c.validate());
  CHECK(c.warmup_steps == 150);
  CHECK(c.decay_steps == 2400);
  CHECK(c.lr_max == 5e-5);
  c.warmup_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig::preset("desk");
  c.decay_factor = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(TrainConfig::preset("huge"), ConfigError);
}

TEST_CASE("adamw_update examples") {
  const AdamHyper h;
  SUBCASE("zero gradient, no decay: unchanged") {
    std::vector<double> p = {0.5, -2.0}, g = {0.0, 0.0}, m(2, 0.0), v(2, 0.0);
    adamw_update<double>(p, g, m, v, 1, 1e-3, 0.0, h);
    CHECK(p == std::vector<double>{0.5, -2.0});
  }
  SUBCASE("closed-form first step") {
    std::vector<double> p = {0.0}, g = {1.0}, m = {0.0}, v = {0.0};
    adamw_update<double>(p, g, m, v, 1, 1e-3, 0.0, h);
    CHECK(std::abs(p[0] - (-1e-3 / (1.0 + 1e-8))) < 1e-18);
  }
  SUBCASE("pure decay") {
    std::vector<double> p = {3.0}, g = {0.0}, m = {0.0}, v = {0.0};
    adamw_update<double>(p, g, m, v, 1, 1e-2, 0.1, h);
    CHECK(std::abs(p[0] - 3.0 * (1 - 1e-2 * 0.1)) < 1e-15);
  }
  SUBCASE("size mismatch") {
    std::vector<double> p = {0.0, 1.0}, g = {1.0}, m = {0.0, 0.0}, v = {0.0, 0.0};
    CHECK_THROWS_AS(adamw_update<double>(p, g, m, v, 1, 1e-3, 0.0, h), ShapeError);
  }
}

TEST_CASE("adamw matches a 10-step scalar reference trace") {
  const AdamHyper h;
  std::vector<double> p = {0.7}, m = {0.0}, v = {0.0};
  oracles::ScalarAdam ref{0.7L, 0, 0, 0.9L, 0.95L, 1e-8L};
  const TrainConfig sched = [] {
    TrainConfig c;
    c.warmup_steps = 3;
    c.decay_steps = 6;
    c.lr_max = 1e-2;
    return c;
  }();
  for (int t = 1; t <= 10; ++t) {
    const double g = std::sin(1.3 * t) + 0.25 * t - 1.0;
    const double lr = lr_at(t, sched);
    std::vector<double> gv = {g};
    adamw_update<double>(p, gv, m, v, t, lr, 0.01, h);
    ref.step(g, lr, 0.01L);
    CHECK(std::abs(p[0] - static_cast<double>(ref.p)) < 1e-12);
  }
  CHECK(p[0] != 0.7);
}

TEST_CASE("adamw_step decays weights only") {
  const ModelConfig cfg = fixtures::small_config();
  Rng rng(5);
  auto params = init_params<double>(cfg, rng);
  const auto before = params;
  const auto grads = zeros_like<double>(cfg);
  auto state = adam_init<double>(cfg);
  TrainConfig tc;
  tc.weight_decay = 0.1;
  adamw_step(params, grads, state, 1e-2, cfg, tc);
  CHECK(state.step == 1);
  std::vector<std::pair<std::string, ParamRole>> roles;
  before.visit(cfg, [&](const std::string& n, const auto&, ParamRole r) { roles.emplace_back(n, r); });
  std::size_t i = 0;
  std::vector<const double*> after;
  params.visit(cfg, [&](const std::string&, const auto& t, ParamRole) { after.push_back(t.data()); });
  before.visit(cfg, [&](const std::string& name, const auto& t, ParamRole role) {
    const double factor = role == ParamRole::kWeight ? 1.0 - 1e-2 * 0.1 : 1.0;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      worst = std::max(worst, std::abs(after[i][j] - t.data()[j] * factor));
    }
    INFO(name);
    CHECK(worst < 1e-15);
    ++i;
  });
  const bool embedding_exempt = std::any_of(roles.begin(), roles.end(), [](const auto& r) {
    return r.first == "embed" && r.second == ParamRole::kEmbedding;
  });
  CHECK(embedding_exempt);
}

TEST_CASE("adamw_step errors") {
  const ModelConfig cfg = fixtures::small_config();
  Rng rng(6);
  auto params = init_params<double>(cfg, rng);
  auto grads = zeros_like<double>(cfg);
  auto state = adam_init<double>(cfg);
  const TrainConfig tc;
  grads.blocks[1].w_o(0, 0) = std::nan("");
  CHECK_THROWS_AS(adamw_step(params, grads, state, 1e-3, cfg, tc), NumericalError);
  grads = zeros_like<double>(cfg);
  grads.blocks[0].b_1.resize(3);
  CHECK_THROWS_AS(adamw_step(params, grads, state, 1e-3, cfg, tc), ShapeError);
  CHECK(state.step == 0);
}

TEST_CASE("global norm clipping") {
  const ModelConfig cfg = fixtures::small_config();
  auto g = zeros_like<double>(cfg);
  g.embed(0, 0) = 3.0;
  g.blocks[0].w_1(1, 1) = 4.0;
  auto copy = g;
  CHECK(clip_global_norm(copy, cfg, 0.0) == doctest::Approx(5.0));
  CHECK(copy.embed(0, 0) == 3.0);
  CHECK(clip_global_norm(g, cfg, 1.0) == doctest::Approx(5.0));
  CHECK(g.embed(0, 0) == doctest::Approx(0.6));
  CHECK(g.blocks[0].w_1(1, 1) == doctest::Approx(0.8));
  CHECK(clip_global_norm(g, cfg, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("convex probe: loss is non-increasing at a small learning rate") {
  // Least squares with one linear layer y = X w.
  Rng rng(11);
  const int n = 64, d = 8;
  std::vector<double> x(n * d), y(n), w(d, 0.0), m(d, 0.0), v(d, 0.0);
  for (auto& e : x) e = rng.normal();
  for (int i = 0; i < n; ++i) {
    y[i] = 0.1 * rng.normal();
    for (int j = 0; j < d; ++j) y[i] += x[i * d + j] * (j - 3.5);
  }
  auto loss_grad = [&](std::vector<double>& g) {
    double loss = 0.0;
    std::fill(g.begin(), g.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      double r = -y[i];
      for (int j = 0; j < d; ++j) r += x[i * d + j] * w[j];
      loss += r * r / n;
      for (int j = 0; j < d; ++j) g[j] += 2.0 * r * x[i * d + j] / n;
    }
    return loss;
  };
  std::vector<double> g(d);
  double prev = loss_grad(g);
  const double first = prev;
  for (int t = 1; t <= 50; ++t) {
    adamw_update<double>(w, g, m, v, t, 1e-3, 0.0, AdamHyper{});
    const double loss = loss_grad(g);
    CHECK(loss <= prev);
    prev = loss;
  }
  CHECK(prev < first);
}

namespace {

struct SmallRun {
  TrajStore store;
  Dataset data;
  ModelConfig model;
  TrainConfig train;
  SampleWeights weights = {{"gridworld", 1.0}};
  PromptConfig prompt;

  SmallRun() {
    model = fixtures::small_config();
    model.dropout = 0.1;
    data = fixtures::expert_dataset(store, "gridworld", 100, 8, SuiteParams{}, 64);
    train.batch = 4;
    train.seq_len = 64;
    train.warmup_steps = 10;
    train.decay_steps = 100;
    train.lr_max = 1e-3;
    train.seed = 3;
  }
};

}  // namespace

TEST_CASE("checkpoint round trip and errors") {
  SmallRun run;
  TrainState s = init_train_state(run.model, 9);
  run.train.total_steps = 3;
  train(s, run.data, run.weights, run.prompt, run.train);
  const std::string bytes = serialize_checkpoint(s);
  const TrainState back = parse_checkpoint(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(back.step == 3);
  CHECK(back.opt.step == 3);
  CHECK(back.model == s.model);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bad), FormatError);
  try {
    parse_checkpoint(bad);
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::kBadMagic);
  }
  bad = bytes;
  bad[4] = 9;
  try {
    parse_checkpoint(bad);
    FAIL("version accepted");
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::kVersionMismatch);
  }
  try {
    parse_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 7));
    FAIL("truncation accepted");
  } catch (const FormatError& e) {
    CHECK(e.fault() == FormatFault::kTruncated);
  }
  const auto dir = fixtures::temp_dir("ckpt");
  checkpoint_save(dir / "a.fdmc", s);
  CHECK(read_file(dir / "a.fdmc") == bytes);
  CHECK(serialize_checkpoint(checkpoint_load(dir / "a.fdmc")) == bytes);
  CHECK_THROWS_AS(checkpoint_load(dir / "missing.fdmc"), IoError);
}

TEST_CASE("total_steps = 0 is a no-op") {
  SmallRun run;
  TrainState s = init_train_state(run.model, 1);
  const std::string before = serialize_checkpoint(s);
  run.train.total_steps = 0;
  const auto dir = fixtures::temp_dir("noop");
  TrainHooks hooks;
  hooks.checkpoint_path = dir / "c.fdmc";
  const auto log = train(s, run.data, run.weights, run.prompt, run.train, hooks);
  CHECK(log.empty());
  CHECK(serialize_checkpoint(s) == before);
  CHECK_FALSE(std::filesystem::exists(hooks.checkpoint_path));
}

TEST_CASE("resume from a checkpoint reproduces the uninterrupted run") {
  SmallRun run;
  run.train.checkpoint_every = 50;
  const auto dir = fixtures::temp_dir("resume");

  TrainState full = init_train_state(run.model, 4);
  run.train.total_steps = 200;
  const auto full_log = train(full, run.data, run.weights, run.prompt, run.train);
  REQUIRE(full_log.size() == 200);

  TrainState part = init_train_state(run.model, 4);
  run.train.total_steps = 100;
  TrainHooks hooks;
  hooks.checkpoint_path = dir / "c.fdmc";
  auto log = train(part, run.data, run.weights, run.prompt, run.train, hooks);
  TrainState resumed = checkpoint_load(hooks.checkpoint_path);
  run.train.total_steps = 200;
  const auto rest = train(resumed, run.data, run.weights, run.prompt, run.train);
  log.insert(log.end(), rest.begin(), rest.end());
  REQUIRE(log.size() == 200);
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(log[i].step == full_log[i].step);
    CHECK(log[i].loss == full_log[i].loss);
    CHECK(log[i].lr == full_log[i].lr);
  }
  CHECK(serialize_checkpoint(resumed) == serialize_checkpoint(full));
  CHECK(full_log.back().loss < full_log.front().loss);
}

TEST_CASE("train rejects mismatched sequence lengths") {
  SmallRun run;
  TrainState s = init_train_state(run.model, 1);
  run.train.seq_len = 32;
  run.train.total_steps = 1;
  CHECK_THROWS_AS(train(s, run.data, run.weights, run.prompt, run.train), ConfigError);
}

TEST_CASE("log rows") {
  CHECK(std::string(kTrainLogHeader) == "step,loss,lr,tokens_per_s");
  CHECK(format_log_row({3, 1.5, 2.5e-5, 1234.56}) == "3,1.5,2.5e-05,1234.6");
}

TEST_CASE("desk preset overfits 20 gridworld episodes in 2000 steps") {
  ModelConfig model = ModelConfig::preset("desk");
  TrajStore store;
  const Dataset data = fixtures::expert_dataset(store, "gridworld", 500, 20, SuiteParams{}, 256);
  TrainConfig tc = TrainConfig::preset("desk");
  tc.batch = 4;
  tc.total_steps = 2000;
  tc.seed = 1;
  PromptConfig prompt;
  TrainState s = init_train_state(model, 2);
  const auto log = train(s, data, {{"gridworld", 1.0}}, prompt, tc);
  REQUIRE(log.size() == 2000);
  double tail = 0.0;
  for (std::size_t i = log.size() - 50; i < log.size(); ++i) tail += log[i].loss;
  tail /= 50.0;
  MESSAGE("initial loss " << log.front().loss << ", final (mean of last 50) " << tail);
  CHECK(tail < 0.1 * log.front().loss);
}
