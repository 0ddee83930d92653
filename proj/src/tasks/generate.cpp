#include "fdm/tasks/generate.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <thread>

#include "fdm/tasks/tsp.hpp"

namespace fdm {

bool spec_uses_text(const ModalitySpec& spec) {
  if (spec.action.kind == Modality::kText) return true;
  return std::any_of(spec.fields.begin(), spec.fields.end(),
                     [](const FieldSpec& f) { return f.kind == Modality::kText; });
}

GenManifest generate_expert_data(TrajStore& store, const std::string& suite, std::uint64_t seed,
                                 std::size_t count, const SuiteParams& params, int workers) {
  params.validate();
  if (workers < 1) throw ConfigError("workers must be positive");
  const EnvSpec spec = suite_spec(suite, params);
  if (spec_uses_text(spec.modality) && store.tokenizer() == nullptr) {
    TextTokenizer tok = suite_tokenizer();
    if (!store.root().empty()) tok.save(store.root() / "tokenizer.fdmv");
    store.set_tokenizer(std::move(tok));
  }
  if (!store.has_task(suite)) store.register_task(suite, spec.modality);

  std::vector<Episode> episodes(count);
  std::vector<TspCoverage> coverage(count);
  auto produce = [&](std::size_t first) {
    for (std::size_t i = first; i < count; i += static_cast<std::size_t>(workers)) {
      auto env = make_env(suite, seed + i, params);
      episodes[i] = expert_episode(*env, suite);
      if (const auto* tsp = dynamic_cast<const TspEnv*>(env.get())) coverage[i] = tsp_coverage(*tsp);
    }
  };
  if (workers == 1) {
    produce(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(produce, static_cast<std::size_t>(w));
    for (auto& t : pool) t.join();
  }

  GenManifest m;
  m.task = suite;
  m.seed_begin = seed;
  m.count = count;
  m.params = params;
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = episodes[i].total_return();
    m.steps += episodes[i].length();
    m.min_return = i == 0 ? r : std::min(m.min_return, r);
    m.max_return = i == 0 ? r : std::max(m.max_return, r);
    sum += r;
    m.coverage_steps += coverage[i].steps;
    m.coverage_hits += coverage[i].covered;
    store.append_episode(suite, std::move(episodes[i]));
  }
  m.mean_return = count == 0 ? 0.0 : sum / static_cast<double>(count);
  return m;
}

std::vector<std::pair<std::string, std::string>> suite_params_entries(const SuiteParams& p) {
  auto i = [](int v) { return std::to_string(v); };
  return {{"suite.grid_size", i(p.grid_size)},
          {"suite.grid_objects", i(p.grid_objects)},
          {"suite.grid_horizon", i(p.grid_horizon)},
          {"suite.sokoban_size", i(p.sokoban_size)},
          {"suite.sokoban_boxes", i(p.sokoban_boxes)},
          {"suite.sokoban_pulls", i(p.sokoban_pulls)},
          {"suite.sokoban_horizon", i(p.sokoban_horizon)},
          {"suite.tsp_n", i(p.tsp_n)},
          {"suite.tsp_k", i(p.tsp_k)},
          {"suite.caption_slots", i(p.caption_slots)}};
}

std::string format_manifest(const GenManifest& m) {
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "task = " << m.task << "\n";
  out << "seed_begin = " << m.seed_begin << "\n";
  out << "seed_end = " << m.seed_begin + m.count << "\n";
  out << "episodes = " << m.count << "\n";
  out << "steps = " << m.steps << "\n";
  out << "mean_return = " << num(m.mean_return) << "\n";
  out << "min_return = " << num(m.min_return) << "\n";
  out << "max_return = " << num(m.max_return) << "\n";
  for (const auto& [k, v] : suite_params_entries(m.params)) out << k << " = " << v << "\n";
  if (m.task == "tsp") {
    out << "coverage_steps = " << m.coverage_steps << "\n";
    out << "coverage_hits = " << m.coverage_hits << "\n";
    const double frac = m.coverage_steps == 0
                            ? 1.0
                            : static_cast<double>(m.coverage_hits) / m.coverage_steps;
    out << "coverage = " << num(frac) << "\n";
  }
  return out.str();
}

}  // namespace fdm
