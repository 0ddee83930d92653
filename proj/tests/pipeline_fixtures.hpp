#pragma once

// Expert datasets built in memory for training and evaluation tests.

#include <filesystem>
#include <string>

#include "fdm/dataset.hpp"
#include "fdm/tasks/generate.hpp"

namespace fixtures {

inline fdm::Dataset expert_dataset(fdm::TrajStore& store, const std::string& suite,
                                   std::uint64_t seed, std::size_t count,
                                   const fdm::SuiteParams& params, std::size_t seq_len) {
  fdm::generate_expert_data(store, suite, seed, count, params);
  fdm::Dataset data;
  fdm::Suite s;
  s.tokens = fdm::tokenize_task(store, suite);
  s.index = fdm::build_index(s.tokens, seq_len);
  data.add(std::move(s));
  return data;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fdm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixtures
