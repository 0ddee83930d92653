#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fdm/model.hpp"
#include "fdm/tasks/env.hpp"

namespace fdm {

// Acts in an environment one episode at a time.
class Agent {
 public:
  virtual ~Agent() = default;
  // The observation/action layout the agent was built for; null accepts any.
  virtual const ModalitySpec* expected_spec() const { return nullptr; }
  virtual void begin_episode(const Env& env, std::size_t episode) = 0;
  virtual ActionValue act(const Env& env) = 0;
};

// Injects the environment's oracle actions.
class ExpertAgent : public Agent {
 public:
  void begin_episode(const Env&, std::size_t) override {}
  ActionValue act(const Env& env) override { return env.expert_action(); }
};

// Uniform-random policy; episode e draws from stream (seed, e).
class RandomAgent : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : seed_(seed) {}
  void begin_episode(const Env& env, std::size_t episode) override;
  ActionValue act(const Env& env) override { return env.random_action(rng_); }

 private:
  std::uint64_t seed_;
  Rng rng_;
};

// Prompted model rollout: each episode starts from the prompt with empty
// memory; every step appends the observation tokens (eval-mode patch
// positions) and decodes the action slots within the action's token range.
class ModelAgent : public Agent {
 public:
  ModelAgent(const ModelParams<float>& params, const ModelConfig& cfg, ModalitySpec spec,
             const TextTokenizer* tokenizer, TokenSeq prompt, DecodeOptions decode,
             std::uint64_t seed);

  const ModalitySpec* expected_spec() const override { return &spec_; }
  void begin_episode(const Env& env, std::size_t episode) override;
  ActionValue act(const Env& env) override;

 private:
  const ModelParams<float>& params_;
  ModelConfig cfg_;
  ModalitySpec spec_;
  const TextTokenizer* tokenizer_;
  TokenSeq prompt_;
  DecodeOptions decode_;
  std::uint64_t seed_;
  TokenRange range_;
  DecodeState<float> state_;
  Rng rng_;
};

// One evaluation task: a suite configuration and the environment instances
// its episodes run on.
struct EvalTask {
  std::string task_id;
  std::string domain;
  std::string suite;
  SuiteParams params;
  std::vector<std::uint64_t> env_seeds;  // one episode per seed
};

EvalTask make_eval_task(const std::string& suite, const SuiteParams& params,
                        std::uint64_t first_seed, std::size_t episodes);
std::string suite_domain(const std::string& suite);

// Runs one episode per env seed and returns the returns. A spec mismatch
// between agent and environment raises SpecError before any step.
std::vector<double> rollout(Agent& agent, const EvalTask& task);

// R_min: mean return of the uniform-random policy over `episodes` episodes
// cycling through the task's instances.
double random_baseline(const EvalTask& task, std::size_t episodes = 100,
                       std::uint64_t seed = 0);
// R_E: mean expert return over the task's instances.
double expert_baseline(const EvalTask& task);

double mean_of(const std::vector<double>& v);

// (1/N) sum_i (r_i - R_min) / (R_E - R_min), evaluated as
// (mean(r) - R_min) / (R_E - R_min). Throws DataError when R_E == R_min.
double normalized_score(const std::vector<double>& returns, double r_min, double r_e);

struct EvalResult {
  std::string task_id;
  std::string domain;
  std::vector<double> returns;
  double r_min = 0.0;
  double r_e = 0.0;
  double score = 0.0;
  friend bool operator==(const EvalResult&, const EvalResult&) = default;
};

struct EvalOptions {
  std::size_t random_episodes = 100;
  std::uint64_t random_seed = 0;
};

EvalResult evaluate(Agent& agent, const EvalTask& task, const EvalOptions& opt = {});

// Result files: one JSON object per task.
std::string serialize_result(const EvalResult& r);
EvalResult parse_result(std::string_view text);

struct DomainSummary {
  std::string domain;
  std::size_t tasks = 0;
  double mean_score = 0.0;
  double fraction_above_half = 0.0;  // tasks with score >= 0.5
};

std::vector<DomainSummary> summarize_domains(const std::vector<EvalResult>& results);
std::string report_task_csv(const std::vector<EvalResult>& results);
std::string report_domain_csv(const std::vector<EvalResult>& results);
std::string report_summary(const std::vector<EvalResult>& results);

struct ReportFiles {
  std::filesystem::path tasks, domains, summary;
};
// Writes tasks.csv, domains.csv and summary.md under `out_dir`. Results are
// ordered by task id so the bytes do not depend on input order.
ReportFiles write_report(std::vector<EvalResult> results, const std::filesystem::path& out_dir);

}  // namespace fdm
