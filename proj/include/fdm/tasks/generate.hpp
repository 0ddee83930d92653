#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fdm/tasks/env.hpp"
#include "fdm/traj_store.hpp"

namespace fdm {

struct GenManifest {
  std::string task;
  std::uint64_t seed_begin = 0;
  std::size_t count = 0;
  SuiteParams params;
  std::size_t steps = 0;
  double mean_return = 0.0;
  double min_return = 0.0;
  double max_return = 0.0;
  std::size_t coverage_steps = 0;  // TSP: expert choices inside the k nearest
  std::size_t coverage_hits = 0;
};

// Expert episodes for seeds [seed, seed + count), appended in seed order to
// task `suite` (registered on first use). Episodes are produced by `workers`
// threads but the result does not depend on the worker count. Suites with
// text fields install suite_tokenizer() in the store, and write it next to
// the shards for on-disk stores.
GenManifest generate_expert_data(TrajStore& store, const std::string& suite,
                                 std::uint64_t seed, std::size_t count,
                                 const SuiteParams& params, int workers = 1);

// "key = value" lines, suite parameters under "suite.".
std::vector<std::pair<std::string, std::string>> suite_params_entries(
    const SuiteParams& p);
std::string format_manifest(const GenManifest& m);

bool spec_uses_text(const ModalitySpec& spec);

}  // namespace fdm
