#include "fdm/traj_store.hpp"

#include <algorithm>
#include <fstream>

#include "fdm/binio.hpp"
#include "fdm/common.hpp"

namespace fdm {

void write_spec(ByteWriter& w, const ModalitySpec& spec) {
  w.u32(static_cast<std::uint32_t>(spec.fields.size()));
  for (const auto& f : spec.fields) {
    w.str(f.name);
    w.u8(static_cast<std::uint8_t>(f.kind));
    w.u32(static_cast<std::uint32_t>(f.shape.size()));
    for (int d : f.shape) w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(f.cardinality));
    w.u8(f.supervised ? 1 : 0);
  }
  w.u8(static_cast<std::uint8_t>(spec.action.kind));
  w.u32(static_cast<std::uint32_t>(spec.action.count));
  w.u32(static_cast<std::uint32_t>(spec.action.cardinality));
}

namespace {

Modality read_modality(ByteReader& r) {
  const std::uint8_t k = r.u8();
  if (k > static_cast<std::uint8_t>(Modality::kContinuous)) {
    r.fail(FormatFault::kCorrupt, "unknown modality tag " + std::to_string(k));
  }
  return static_cast<Modality>(k);
}

void check_task_id(const std::string& id) {
  if (id.empty() ||
      !std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
               c == '-';
      })) {
    throw ConfigError("task id '" + id + "' must match [a-z0-9_-]+");
  }
}

}  // namespace

ModalitySpec read_spec(ByteReader& r) {
  ModalitySpec spec;
  const std::uint32_t n = r.u32();
  if (n > 4096) r.fail(FormatFault::kCorrupt, "field count out of range");
  for (std::uint32_t i = 0; i < n; ++i) {
    FieldSpec f;
    f.name = r.str(4096);
    f.kind = read_modality(r);
    const std::uint32_t nd = r.u32();
    if (nd > 8) r.fail(FormatFault::kCorrupt, "tensor rank out of range");
    for (std::uint32_t d = 0; d < nd; ++d) {
      f.shape.push_back(static_cast<int>(r.u32()));
    }
    f.cardinality = static_cast<int>(r.u32());
    f.supervised = r.u8() != 0;
    spec.fields.push_back(std::move(f));
  }
  spec.action.kind = read_modality(r);
  spec.action.count = static_cast<int>(r.u32());
  spec.action.cardinality = static_cast<int>(r.u32());
  try {
    spec.normalize();
  } catch (const SpecError& e) {
    r.fail(FormatFault::kCorrupt, e.what());
  }
  return spec;
}

std::string serialize_episode(const Episode& episode,
                              const ModalitySpec& spec) {
  ByteWriter w;
  w.u64(episode.seed);
  w.u32(static_cast<std::uint32_t>(episode.steps.size()));
  for (const auto& step : episode.steps) {
    w.f64(step.reward);
    for (const auto& f : spec.fields) {
      const FieldValue& v = step.observation.at(f.name);
      switch (f.kind) {
        case Modality::kText:
          w.str(std::get<std::string>(v));
          break;
        case Modality::kImage:
          w.f32s(std::get<Image>(v).pixels);
          break;
        case Modality::kDiscrete:
          for (auto x : std::get<std::vector<std::int64_t>>(v)) {
            w.u32(static_cast<std::uint32_t>(x));
          }
          break;
        case Modality::kContinuous:
          for (double x : std::get<std::vector<double>>(v)) w.f64(x);
          break;
      }
    }
    w.u8(step.action ? 1 : 0);
    if (!step.action) continue;
    switch (spec.action.kind) {
      case Modality::kDiscrete:
        for (auto x : std::get<std::vector<std::int64_t>>(*step.action)) {
          w.u32(static_cast<std::uint32_t>(x));
        }
        break;
      case Modality::kContinuous:
        for (double x : std::get<std::vector<double>>(*step.action)) w.f64(x);
        break;
      case Modality::kText:
        w.str(std::get<std::string>(*step.action));
        break;
      case Modality::kImage:
        break;
    }
  }
  return w.take();
}

namespace {

Episode read_episode(ByteReader& r, const std::string& task_id,
                     const ModalitySpec& spec) {
  Episode ep;
  ep.task_id = task_id;
  ep.seed = r.u64();
  const std::uint32_t steps = r.u32();
  if (steps == 0 || steps > r.remaining()) {
    r.fail(FormatFault::kCorrupt, "implausible timestep count");
  }
  ep.steps.resize(steps);
  for (auto& step : ep.steps) {
    step.reward = r.f64();
    for (const auto& f : spec.fields) {
      switch (f.kind) {
        case Modality::kText:
          step.observation[f.name] = r.str();
          break;
        case Modality::kImage: {
          Image img(f.shape[0], f.shape[1], f.shape[2]);
          r.f32s(img.pixels);
          step.observation[f.name] = std::move(img);
          break;
        }
        case Modality::kDiscrete: {
          std::vector<std::int64_t> v(f.element_count());
          for (auto& x : v) x = r.u32();
          step.observation[f.name] = std::move(v);
          break;
        }
        case Modality::kContinuous: {
          std::vector<double> v(f.element_count());
          for (auto& x : v) x = r.f64();
          step.observation[f.name] = std::move(v);
          break;
        }
      }
    }
    const std::uint8_t has_action = r.u8();
    if (has_action > 1) r.fail(FormatFault::kCorrupt, "bad action flag");
    if (!has_action) continue;
    switch (spec.action.kind) {
      case Modality::kDiscrete: {
        std::vector<std::int64_t> v(spec.action.count);
        for (auto& x : v) x = r.u32();
        step.action = std::move(v);
        break;
      }
      case Modality::kContinuous: {
        std::vector<double> v(spec.action.count);
        for (auto& x : v) x = r.f64();
        step.action = std::move(v);
        break;
      }
      case Modality::kText:
        step.action = r.str();
        break;
      case Modality::kImage:
        r.fail(FormatFault::kCorrupt, "image action");
    }
  }
  return ep;
}

}  // namespace

Episode deserialize_episode(std::string_view bytes, const std::string& task_id,
                            const ModalitySpec& spec) {
  ByteReader r(bytes);
  Episode ep = read_episode(r, task_id, spec);
  if (!r.at_end()) r.fail(FormatFault::kCorrupt, "trailing episode bytes");
  return ep;
}

namespace {

std::string shard_header(const std::string& task_id, const ModalitySpec& spec) {
  ByteWriter w;
  w.header("FDM1", kShardVersion);
  w.str(task_id);
  write_spec(w, spec);
  return w.take();
}

std::string episode_record(const std::string& payload) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  return w.take();
}

void append_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("append failed: " + path.string());
}

void push_episode(TaskShard& shard, Episode episode) {
  shard.returns.push_back(episode.total_return());
  shard.lengths.push_back(static_cast<std::uint32_t>(episode.length()));
  shard.episodes.push_back(std::move(episode));
}

}  // namespace

TaskShard parse_shard(std::string_view bytes) {
  ByteReader r(bytes);
  r.header("FDM1", kShardVersion);
  TaskShard shard;
  shard.task_id = r.str(256);
  shard.spec = read_spec(r);
  while (!r.at_end()) {
    const std::uint32_t len = r.u32();
    const std::size_t start = r.offset();
    if (len > r.remaining()) {
      r.fail(FormatFault::kTruncated, "episode record of " +
                                          std::to_string(len) + " bytes");
    }
    ByteReader sub(r.bytes(len));
    Episode ep;
    try {
      ep = read_episode(sub, shard.task_id, shard.spec);
      if (!sub.at_end()) sub.fail(FormatFault::kCorrupt, "trailing bytes");
    } catch (const FormatError& e) {
      throw FormatError(e.fault(), start + e.offset(), "episode record");
    }
    push_episode(shard, std::move(ep));
  }
  return shard;
}

TaskShard read_shard(const std::filesystem::path& path) {
  try {
    return parse_shard(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(e.fault(), e.offset(), path.string() + ": " + e.what());
  }
}

TrajStore::TrajStore(std::filesystem::path root) : root_(std::move(root)) {}

TrajStore TrajStore::open(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw IoError("data directory " + root.string() + " does not exist");
  }
  TrajStore store(root);
  std::vector<std::filesystem::path> shards;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.path().extension() == ".fdm1") shards.push_back(e.path());
  }
  std::sort(shards.begin(), shards.end());
  for (const auto& p : shards) {
    TaskShard shard = read_shard(p);
    const std::string id = shard.task_id;
    store.tasks_.emplace(id, std::move(shard));
  }
  const auto tok = root / "tokenizer.fdmv";
  if (std::filesystem::exists(tok)) store.tokenizer_ = TextTokenizer::load(tok);
  return store;
}

void TrajStore::register_task(const std::string& task_id, ModalitySpec spec) {
  check_task_id(task_id);
  spec.normalize();
  if (auto it = tasks_.find(task_id); it != tasks_.end()) {
    if (it->second.spec != spec) {
      throw SpecError("task '" + task_id + "' already registered with a different spec");
    }
    return;
  }
  TaskShard shard;
  shard.task_id = task_id;
  shard.spec = spec;
  if (!root_.empty()) write_file(shard_path(task_id), shard_header(task_id, spec));
  tasks_.emplace(task_id, std::move(shard));
}

std::size_t TrajStore::append_episode(const std::string& task_id,
                                      Episode episode) {
  TaskShard& shard = mutable_task(task_id);
  episode.task_id = task_id;
  validate_episode(episode, shard.spec);
  if (!root_.empty()) {
    append_bytes(shard_path(task_id),
                 episode_record(serialize_episode(episode, shard.spec)));
  }
  push_episode(shard, std::move(episode));
  return shard.episodes.size() - 1;
}

bool TrajStore::has_task(const std::string& task_id) const {
  return tasks_.count(task_id) != 0;
}

const TaskShard& TrajStore::task(const std::string& task_id) const {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw DataError("unknown task '" + task_id + "'");
  return it->second;
}

TaskShard& TrajStore::mutable_task(const std::string& task_id) {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) throw DataError("unknown task '" + task_id + "'");
  return it->second;
}

std::vector<std::string> TrajStore::task_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : tasks_) out.push_back(id);
  return out;
}

std::size_t TrajStore::episode_count(const std::string& task_id) const {
  return task(task_id).episodes.size();
}

const Episode& TrajStore::episode(const std::string& task_id,
                                  std::size_t id) const {
  const auto& t = task(task_id);
  if (id >= t.episodes.size()) {
    throw DataError("episode " + std::to_string(id) + " not in task '" +
                    task_id + "'");
  }
  return t.episodes[id];
}

std::filesystem::path TrajStore::shard_path(const std::string& task_id) const {
  return root_ / (task_id + ".fdm1");
}

std::string TrajStore::shard_bytes(const std::string& task_id) const {
  const auto& t = task(task_id);
  std::string out = shard_header(task_id, t.spec);
  for (const auto& ep : t.episodes) {
    out += episode_record(serialize_episode(ep, t.spec));
  }
  return out;
}

}  // namespace fdm
