#include "fdm/tasks/env.hpp"

#include "fdm/tasks/caption.hpp"
#include "fdm/tasks/gridworld.hpp"
#include "fdm/tasks/sokoban.hpp"
#include "fdm/tasks/tsp.hpp"

namespace fdm {

void Env::reset() {
  t_ = 0;
  done_ = false;
  do_reset();
}

Observation Env::observe() const { return do_observe(); }

StepResult Env::step(const ActionValue& action) {
  if (done_) throw DataError("step after the episode ended");
  validate_action(action, spec_.modality.action);
  StepResult r = do_step(action);
  ++t_;
  if (t_ >= spec_.horizon) r.done = true;
  done_ = r.done;
  return r;
}

void SuiteParams::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  need(grid_size >= 4 && grid_size <= 16, "grid size must be in [4, 16]");
  need(grid_objects >= 2 &&
           grid_objects <= std::min<int>(12, grid_size * grid_size - 1),
       "grid objects must be in [2, 12] and fit the room");
  need(grid_horizon >= 1, "grid horizon must be positive");
  need(sokoban_size >= 5 && sokoban_size <= 8, "sokoban size must be in [5, 8]");
  need(sokoban_boxes >= 1 &&
           sokoban_boxes < (sokoban_size - 2) * (sokoban_size - 2) - 1,
       "sokoban boxes must leave free floor");
  need(sokoban_pulls >= 1, "sokoban pulls must be positive");
  need(sokoban_horizon >= 1, "sokoban horizon must be positive");
  need(tsp_n >= 3, "tsp n must be at least 3");
  need(tsp_k >= 1 && tsp_k <= 300, "tsp k must be in [1, 300]");
  need(caption_slots >= 1, "caption slots must be positive");
}

std::vector<std::string> suite_text_corpus() {
  std::vector<std::string> out;
  for (const char* c : GridWorld::kColors) {
    for (const char* sh : GridWorld::kShapes) out.push_back(std::string("go to the ") + c + " " + sh);
  }
  for (auto& c : template_captions()) out.push_back(std::move(c));
  return out;
}

TextTokenizer suite_tokenizer() {
  const auto corpus = suite_text_corpus();
  return TextTokenizer::train(corpus, 512);
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"caption", "gridworld",
                                                 "sokoban", "tsp"};
  return names;
}

std::unique_ptr<Env> make_env(const std::string& suite, std::uint64_t seed,
                              const SuiteParams& p) {
  p.validate();
  if (suite == "gridworld") {
    return std::make_unique<GridWorld>(seed, p.grid_size, p.grid_objects,
                                       p.grid_horizon);
  }
  if (suite == "sokoban") {
    return std::make_unique<Sokoban>(seed, p.sokoban_size, p.sokoban_boxes,
                                     p.sokoban_pulls, p.sokoban_horizon);
  }
  if (suite == "tsp") return std::make_unique<TspEnv>(seed, p.tsp_n, p.tsp_k);
  if (suite == "caption") return std::make_unique<CaptionEnv>(seed, p.caption_slots);
  throw ConfigError("unknown task suite '" + suite + "'");
}

EnvSpec suite_spec(const std::string& suite, const SuiteParams& p) {
  p.validate();
  if (suite == "gridworld") return GridWorld::make_spec(p.grid_size, p.grid_horizon);
  if (suite == "sokoban") return Sokoban::make_spec(p.sokoban_size, p.sokoban_horizon);
  if (suite == "tsp") return TspEnv::make_spec(p.tsp_n, p.tsp_k);
  if (suite == "caption") return CaptionEnv::make_spec(p.caption_slots);
  throw ConfigError("unknown task suite '" + suite + "'");
}

Episode run_episode(Env& env, const Policy& policy, const std::string& task_id) {
  Episode ep;
  ep.task_id = task_id;
  ep.seed = env.seed();
  env.reset();
  while (!env.done()) {
    Timestep ts;
    ts.observation = env.observe();
    ActionValue a = policy(env);
    ts.reward = env.step(a).reward;
    ts.action = std::move(a);
    ep.steps.push_back(std::move(ts));
  }
  return ep;
}

Episode expert_episode(Env& env, const std::string& task_id) {
  return run_episode(env, [](const Env& e) { return e.expert_action(); }, task_id);
}

}  // namespace fdm
