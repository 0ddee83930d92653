#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fdm/tokenize.hpp"
#include "fdm/traj_store.hpp"

namespace fdm {

inline constexpr std::uint8_t kTokenCacheVersion = 1;
inline constexpr std::uint8_t kIndexVersion = 1;

// Window [start, end) of timesteps in episode `path_id`.
struct IndexEntry {
  std::uint32_t path_id = 0;
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

// Tokenized episodes of one task (mode-independent; patch positions are
// resolved when sequences are drawn).
struct TaskTokens {
  std::string task_id;
  std::vector<FlatEpisode> episodes;
  std::vector<double> returns;

  friend bool operator==(const TaskTokens&, const TaskTokens&) = default;
};

TaskTokens tokenize_task(const TrajStore& store, const std::string& task_id);

// Sliding window with a one-timestep stride: for every start the smallest
// end whose window holds at least `seq_len` tokens. Episodes shorter than
// `seq_len` tokens give a single whole-episode entry; episodes with a
// timestep longer than `seq_len` are skipped with a warning.
std::vector<IndexEntry> build_index(const TaskTokens& tokens,
                                    std::size_t seq_len);
std::vector<IndexEntry> build_index(const TrajStore& store,
                                    const std::string& task_id,
                                    std::size_t seq_len);

std::size_t window_tokens(const FlatEpisode& ep, std::uint32_t start,
                          std::uint32_t end);

// Token cache "FDMT" and index "FDMI" images.
std::string serialize_token_cache(const TaskTokens& tokens);
TaskTokens parse_token_cache(std::string_view bytes);
std::string serialize_index(std::uint32_t seq_len,
                            const std::vector<IndexEntry>& index);
struct IndexFile {
  std::uint32_t seq_len = 0;
  std::vector<IndexEntry> entries;
};
IndexFile parse_index(std::string_view bytes);

struct CachePaths {
  std::filesystem::path tokens;
  std::filesystem::path index;
};
CachePaths cache_paths(const std::filesystem::path& cache_dir,
                       const std::string& task_id);

struct CacheWriteResult {
  CachePaths paths;
  bool tokens_written = false;  // false when unchanged on disk
  bool index_written = false;
};
CacheWriteResult write_cache(const TrajStore& store, const std::string& task_id,
                             const std::filesystem::path& cache_dir,
                             std::size_t seq_len);

TaskTokens read_token_cache(const std::filesystem::path& path);
IndexFile read_index(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Sampling

struct PromptConfig {
  double prompt_fraction = 0.25;
  double goal_fraction = 0.5;  // of prompted samples
  int prompt_len = -1;         // <0: floor(L / 2)
  double eval_top_quantile = 0.10;

  std::size_t resolved_len(std::size_t seq_len) const;
  void validate(std::size_t seq_len) const;
};

using SampleWeights = std::map<std::string, double>;
SampleWeights normalize_weights(const SampleWeights& w);

struct PromptInfo {
  bool prompted = false;
  bool goal = false;
  std::uint32_t path_id = 0;
  std::uint32_t token_begin = 0;
  std::uint32_t tokens = 0;
  friend bool operator==(const PromptInfo&, const PromptInfo&) = default;
};

// Fixed-length sample: left padding, then prompt, then the window.
struct SequenceSample {
  TokenSeq seq;
  std::string task_id;
  IndexEntry source;
  PromptInfo prompt;
  std::uint32_t pad = 0;
};

struct Suite {
  TaskTokens tokens;
  std::vector<IndexEntry> index;
};

// Tokenized suites keyed by task id.
class Dataset {
 public:
  void add(Suite suite);
  const Suite& suite(const std::string& task_id) const;
  bool contains(const std::string& task_id) const {
    return suites_.count(task_id) != 0;
  }
  std::vector<std::string> task_ids() const;

  // Loads every "*.fdmt" with its "*.fdmi" from a cache directory. A non-zero
  // `seq_len` must match the length the indexes were built for.
  static Dataset load(const std::filesystem::path& cache_dir, std::size_t seq_len = 0);

 private:
  std::map<std::string, Suite> suites_;
};

SequenceSample sample_sequence(const Suite& suite, std::size_t seq_len,
                               const PromptConfig& cfg, Rng& rng);
std::vector<SequenceSample> sample_batch(const Dataset& data,
                                         const SampleWeights& weights,
                                         std::size_t batch,
                                         std::size_t seq_len,
                                         const PromptConfig& cfg, Rng& rng);

// Batch stream split across worker rng streams derived from
// (master seed, worker id, step); deterministic for a fixed worker count.
class BatchSampler {
 public:
  BatchSampler(const Dataset& data, SampleWeights weights, std::size_t batch,
               std::size_t seq_len, PromptConfig cfg, std::uint64_t seed,
               int workers = 1);

  std::vector<SequenceSample> batch(std::uint64_t step) const;

 private:
  const Dataset& data_;
  SampleWeights weights_;
  std::size_t batch_;
  std::size_t seq_len_;
  PromptConfig cfg_;
  std::uint64_t seed_;
  int workers_;
};

std::string serialize_batch(const std::vector<SequenceSample>& batch);

// Picks uniformly (by `seed`) among the top-quantile episodes (ties
// included) and returns their first whole timesteps fitting the prompt
// length. Patch positions are resolved in eval mode.
TokenSeq select_eval_prompt(const TaskTokens& tokens, std::size_t seq_len,
                            const PromptConfig& cfg, std::uint64_t seed);

}  // namespace fdm
