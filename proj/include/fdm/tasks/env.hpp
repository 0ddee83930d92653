#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fdm/common.hpp"
#include "fdm/modality.hpp"
#include "fdm/text_tokenizer.hpp"

namespace fdm {

struct EnvSpec {
  ModalitySpec modality;
  double reward_min = 0.0;
  double reward_max = 1.0;
  int horizon = 1;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

// One seeded environment instance. step() validates the action against the
// spec and ends the episode at the horizon.
class Env {
 public:
  virtual ~Env() = default;

  const EnvSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  int steps_taken() const { return t_; }
  bool done() const { return done_; }

  void reset();
  Observation observe() const;
  StepResult step(const ActionValue& action);

  virtual ActionValue expert_action() const = 0;
  virtual ActionValue random_action(Rng& rng) const = 0;
  virtual std::unique_ptr<Env> clone() const = 0;

 protected:
  Env(EnvSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {}

  virtual void do_reset() = 0;
  virtual Observation do_observe() const = 0;
  virtual StepResult do_step(const ActionValue& action) = 0;

 private:
  EnvSpec spec_;
  std::uint64_t seed_ = 0;
  int t_ = 0;
  bool done_ = false;
};

// Parameters of every built-in suite; one instance per seed.
struct SuiteParams {
  int grid_size = 5;
  int grid_objects = 3;
  int grid_horizon = 24;

  int sokoban_size = 6;
  int sokoban_boxes = 1;
  int sokoban_pulls = 4;
  int sokoban_horizon = 30;

  int tsp_n = 10;
  int tsp_k = 10;

  int caption_slots = 8;  // text tokens per caption under suite_tokenizer()

  void validate() const;
};

const std::vector<std::string>& suite_names();
std::unique_ptr<Env> make_env(const std::string& suite, std::uint64_t seed,
                              const SuiteParams& params);
EnvSpec suite_spec(const std::string& suite, const SuiteParams& params);

// Every instruction and caption the built-in suites can emit.
std::vector<std::string> suite_text_corpus();
// Byte-pair tokenizer trained on that corpus; every word is one token.
TextTokenizer suite_tokenizer();

using Policy = std::function<ActionValue(const Env&)>;

// Runs `policy` from a fresh reset until the episode ends. The terminal
// observation is not recorded.
Episode run_episode(Env& env, const Policy& policy, const std::string& task_id);
Episode expert_episode(Env& env, const std::string& task_id);

}  // namespace fdm
