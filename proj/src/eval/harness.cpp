#include "fdm/eval.hpp"

#include <cmath>

namespace fdm {

void RandomAgent::begin_episode(const Env&, std::size_t episode) {
  rng_ = Rng(derive_seed(seed_, episode));
}

ModelAgent::ModelAgent(const ModelParams<float>& params, const ModelConfig& cfg,
                       ModalitySpec spec, const TextTokenizer* tokenizer, TokenSeq prompt,
                       DecodeOptions decode, std::uint64_t seed)
    : params_(params),
      cfg_(cfg),
      spec_(std::move(spec)),
      tokenizer_(tokenizer),
      prompt_(std::move(prompt)),
      decode_(decode),
      seed_(seed),
      range_(action_token_range(spec_.action, tokenizer)) {
  if (spec_.action.count < 1) throw SpecError("action spec has no slots");
}

void ModelAgent::begin_episode(const Env&, std::size_t episode) {
  state_ = start_decode<float>(cfg_);
  state_.pending = prompt_;
  rng_ = Rng(derive_seed(seed_, episode));
}

ActionValue ModelAgent::act(const Env& env) {
  TokenSeq obs = assemble_observation(env.observe(), spec_, tokenizer_);
  resolve_patch_positions(obs, Mode::kEval, nullptr);
  state_.pending.append(obs);
  const auto tokens = decode_step(params_, cfg_, state_, range_,
                                  static_cast<std::size_t>(spec_.action.count), decode_, &rng_);
  return detokenize_action(tokens, spec_.action, tokenizer_);
}

std::string suite_domain(const std::string& suite) {
  if (suite == "gridworld") return "instruction-following";
  if (suite == "sokoban") return "puzzle";
  if (suite == "tsp") return "combinatorial";
  if (suite == "caption") return "vision-language";
  throw ConfigError("unknown task suite '" + suite + "'");
}

EvalTask make_eval_task(const std::string& suite, const SuiteParams& params,
                        std::uint64_t first_seed, std::size_t episodes) {
  if (episodes == 0) throw ConfigError("evaluation needs at least one episode");
  EvalTask t;
  t.task_id = suite;
  t.domain = suite_domain(suite);
  t.suite = suite;
  t.params = params;
  for (std::size_t i = 0; i < episodes; ++i) t.env_seeds.push_back(first_seed + i);
  return t;
}

namespace {

double run_one(Agent& agent, Env& env, std::size_t episode) {
  env.reset();
  agent.begin_episode(env, episode);
  double ret = 0.0;
  while (!env.done()) ret += env.step(agent.act(env)).reward;
  return ret;
}

}  // namespace

std::vector<double> rollout(Agent& agent, const EvalTask& task) {
  if (task.env_seeds.empty()) throw ConfigError("task '" + task.task_id + "' has no instances");
  if (const ModalitySpec* want = agent.expected_spec()) {
    if (!(*want == suite_spec(task.suite, task.params).modality)) {
      throw SpecError("task '" + task.task_id +
                      "': environment spec differs from the spec the model was trained on");
    }
  }
  std::vector<double> returns;
  for (std::size_t i = 0; i < task.env_seeds.size(); ++i) {
    auto env = make_env(task.suite, task.env_seeds[i], task.params);
    returns.push_back(run_one(agent, *env, i));
  }
  return returns;
}

double random_baseline(const EvalTask& task, std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0 || task.env_seeds.empty()) throw ConfigError("random baseline needs episodes");
  RandomAgent agent(derive_seed(seed, 0x726d696e));  // "rmin"
  std::vector<double> returns;
  for (std::size_t j = 0; j < episodes; ++j) {
    auto env = make_env(task.suite, task.env_seeds[j % task.env_seeds.size()], task.params);
    returns.push_back(run_one(agent, *env, j));
  }
  return mean_of(returns);
}

double expert_baseline(const EvalTask& task) {
  ExpertAgent agent;
  return mean_of(rollout(agent, task));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw DataError("mean of an empty return list");
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double normalized_score(const std::vector<double>& returns, double r_min, double r_e) {
  if (r_e == r_min) {
    throw DataError("degenerate task: expert and random returns are both " + std::to_string(r_e));
  }
  return (mean_of(returns) - r_min) / (r_e - r_min);
}

EvalResult evaluate(Agent& agent, const EvalTask& task, const EvalOptions& opt) {
  EvalResult r;
  r.task_id = task.task_id;
  r.domain = task.domain;
  r.returns = rollout(agent, task);
  r.r_min = random_baseline(task, opt.random_episodes, opt.random_seed);
  r.r_e = expert_baseline(task);
  r.score = normalized_score(r.returns, r.r_min, r.r_e);
  return r;
}

}  // namespace fdm
