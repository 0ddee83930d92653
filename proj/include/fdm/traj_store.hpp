#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fdm/modality.hpp"
#include "fdm/text_tokenizer.hpp"

namespace fdm {

// Episode shard: "FDM1", version, task id, modality spec, then u32
// length-prefixed episode records. Little-endian throughout.
inline constexpr std::uint8_t kShardVersion = 1;

void write_spec(class ByteWriter& w, const ModalitySpec& spec);
ModalitySpec read_spec(class ByteReader& r);
std::string serialize_episode(const Episode& episode, const ModalitySpec& spec);
Episode deserialize_episode(std::string_view bytes, const std::string& task_id,
                            const ModalitySpec& spec);

struct TaskShard {
  std::string task_id;
  ModalitySpec spec;
  std::vector<Episode> episodes;
  std::vector<double> returns;
  std::vector<std::uint32_t> lengths;
};

// Episodes grouped per task. With a root directory every accepted episode
// is appended to "<root>/<task>.fdm1"; without one the store is in-memory.
class TrajStore {
 public:
  explicit TrajStore(std::filesystem::path root = {});

  // Loads every shard (and tokenizer.fdmv, if present) under `root`.
  static TrajStore open(const std::filesystem::path& root);

  void register_task(const std::string& task_id, ModalitySpec spec);
  // Validates against the task spec first; a rejected episode leaves the
  // store unchanged. Returns the episode's id within its task.
  std::size_t append_episode(const std::string& task_id, Episode episode);

  bool has_task(const std::string& task_id) const;
  const TaskShard& task(const std::string& task_id) const;
  std::vector<std::string> task_ids() const;
  std::size_t episode_count(const std::string& task_id) const;
  const Episode& episode(const std::string& task_id, std::size_t id) const;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path shard_path(const std::string& task_id) const;
  // Full shard image, identical to the file on disk.
  std::string shard_bytes(const std::string& task_id) const;

  void set_tokenizer(TextTokenizer tok) { tokenizer_ = std::move(tok); }
  const TextTokenizer* tokenizer() const {
    return tokenizer_ ? &*tokenizer_ : nullptr;
  }

 private:
  TaskShard& mutable_task(const std::string& task_id);

  std::filesystem::path root_;
  std::map<std::string, TaskShard> tasks_;
  std::optional<TextTokenizer> tokenizer_;
};

TaskShard read_shard(const std::filesystem::path& path);
TaskShard parse_shard(std::string_view bytes);

}  // namespace fdm
