#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fdm/dataset.hpp"
#include "fdm/model.hpp"
#include "fdm/tasks/env.hpp"
#include "fdm/train.hpp"

namespace fdm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Flat "key = value" run configuration over a fixed key set. Later sources
// override earlier ones: defaults (desk preset), --preset, --config file,
// FDM_CACHE_DIR, command-line flags.
class RunConfig {
 public:
  RunConfig();

  static bool is_known(const std::string& key);
  // Throws ConfigError naming the key and `origin` for unknown keys.
  void set(const std::string& key, const std::string& value, const std::string& origin);
  // Lines of "key = value"; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void parse_text(const std::string& text, const std::string& origin);
  void apply_preset(const std::string& name, const std::string& origin);

  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  long long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  ModelConfig model() const;
  TrainConfig train() const;
  SuiteParams suite() const;
  PromptConfig prompt() const;
  // sample.weight.<task>, defaulting to 1 for every task in `tasks`.
  SampleWeights weights(const std::vector<std::string>& tasks) const;

  // Every key, sorted, one "key = value" line each.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> origins_;
};

// Entry point behind the fdm executable. Exit codes: 0 success, 1 usage or
// configuration error, 2 data error, 3 numerical error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fdm
