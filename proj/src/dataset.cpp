#include "fdm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <thread>

#include "fdm/binio.hpp"
#include "fdm/common.hpp"

namespace fdm {

TaskTokens tokenize_task(const TrajStore& store, const std::string& task_id) {
  const auto& shard = store.task(task_id);
  TaskTokens out;
  out.task_id = task_id;
  for (const auto& ep : shard.episodes) {
    out.episodes.push_back(
        flatten_episode(ep, shard.spec, store.tokenizer(), Mode::kEval, nullptr));
  }
  out.returns = shard.returns;
  return out;
}

std::size_t window_tokens(const FlatEpisode& ep, std::uint32_t start,
                          std::uint32_t end) {
  return ep.step_offsets.at(end) - ep.step_offsets.at(start);
}

std::vector<IndexEntry> build_index(const TaskTokens& tokens,
                                    std::size_t seq_len) {
  if (seq_len == 0) throw ConfigError("sequence length must be positive");
  std::vector<IndexEntry> out;
  for (std::size_t p = 0; p < tokens.episodes.size(); ++p) {
    const FlatEpisode& ep = tokens.episodes[p];
    const auto steps = static_cast<std::uint32_t>(ep.steps());
    if (steps == 0) continue;
    bool oversized = false;
    for (std::uint32_t t = 0; t < steps; ++t) {
      oversized |= window_tokens(ep, t, t + 1) > seq_len;
    }
    if (oversized) {
      std::cerr << "warning: task '" << tokens.task_id << "' episode " << p
                << " has a timestep longer than seq_len " << seq_len
                << "; skipped\n";
      continue;
    }
    const auto pid = static_cast<std::uint32_t>(p);
    if (ep.size() < seq_len) {
      out.push_back({pid, 0, steps});
      continue;
    }
    std::uint32_t end = 0;
    for (std::uint32_t start = 0; start < steps; ++start) {
      end = std::max(end, start + 1);
      while (end <= steps && window_tokens(ep, start, end) < seq_len) ++end;
      if (end > steps) break;
      out.push_back({pid, start, end});
    }
  }
  return out;
}

std::vector<IndexEntry> build_index(const TrajStore& store,
                                    const std::string& task_id,
                                    std::size_t seq_len) {
  return build_index(tokenize_task(store, task_id), seq_len);
}

// --- cache files -----------------------------------------------------------

std::string serialize_token_cache(const TaskTokens& tokens) {
  ByteWriter w;
  w.header("FDMT", kTokenCacheVersion);
  w.str(tokens.task_id);
  w.u32(static_cast<std::uint32_t>(tokens.episodes.size()));
  for (std::size_t p = 0; p < tokens.episodes.size(); ++p) {
    const FlatEpisode& ep = tokens.episodes[p];
    w.f64(tokens.returns.at(p));
    w.u32(static_cast<std::uint32_t>(ep.steps()));
    for (auto off : ep.step_offsets) w.u32(off);
    w.u32(static_cast<std::uint32_t>(ep.size()));
    for (std::size_t i = 0; i < ep.size(); ++i) {
      const Entry& e = ep.entries[i];
      w.u8(static_cast<std::uint8_t>(e.kind));
      if (e.is_patch()) {
        const Patch& pt = *e.patch;
        w.u32(pt.raster_index);
        w.u32(static_cast<std::uint32_t>(pt.channels));
        w.f64(pt.rows.lo);
        w.f64(pt.rows.hi);
        w.f64(pt.cols.lo);
        w.f64(pt.cols.hi);
        w.f32s(pt.pixels);
      } else {
        w.u32(e.symbol);
      }
      w.u8(ep.loss_mask[i]);
      w.i32(ep.local_pos[i]);
    }
  }
  return w.take();
}

TaskTokens parse_token_cache(std::string_view bytes) {
  ByteReader r(bytes);
  r.header("FDMT", kTokenCacheVersion);
  TaskTokens out;
  out.task_id = r.str(256);
  const std::uint32_t n = r.u32();
  if (n > r.remaining()) r.fail(FormatFault::kTruncated, "episode count exceeds data");
  for (std::uint32_t p = 0; p < n; ++p) {
    FlatEpisode ep;
    out.returns.push_back(r.f64());
    const std::uint32_t steps = r.u32();
    if (steps > r.remaining() / 4) r.fail(FormatFault::kTruncated, "step offsets");
    for (std::uint32_t t = 0; t <= steps; ++t) ep.step_offsets.push_back(r.u32());
    const std::uint32_t count = r.u32();
    if (count > r.remaining()) r.fail(FormatFault::kTruncated, "entry records");
    if (ep.step_offsets.front() != 0 || ep.step_offsets.back() != count ||
        !std::is_sorted(ep.step_offsets.begin(), ep.step_offsets.end())) {
      r.fail(FormatFault::kCorrupt, "step offsets disagree with entry count");
    }
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint8_t tag = r.u8();
      Entry e;
      if (tag == static_cast<std::uint8_t>(EntryKind::kPatch)) {
        auto pt = std::make_shared<Patch>();
        pt->raster_index = r.u32();
        pt->channels = static_cast<int>(r.u32());
        if (pt->channels <= 0 || pt->channels > 64) {
          r.fail(FormatFault::kCorrupt, "patch channel count");
        }
        pt->rows.lo = r.f64();
        pt->rows.hi = r.f64();
        pt->cols.lo = r.f64();
        pt->cols.hi = r.f64();
        pt->pixels.resize(static_cast<std::size_t>(kPatchSize) * kPatchSize *
                          pt->channels);
        r.f32s(pt->pixels);
        e = Entry::of_patch(std::move(pt));
      } else if (tag == static_cast<std::uint8_t>(EntryKind::kSymbol)) {
        e = Entry::of_symbol(r.u32());
        if (e.symbol >= vocab::kTableSize) {
          r.fail(FormatFault::kCorrupt, "symbol id out of range");
        }
      } else {
        r.fail(FormatFault::kCorrupt, "unknown entry tag " + std::to_string(tag));
      }
      const std::uint8_t mask = r.u8();
      const std::int32_t pos = r.i32();
      ep.push(std::move(e), mask, pos);
    }
    resolve_patch_positions(ep, Mode::kEval, nullptr);
    out.episodes.push_back(std::move(ep));
  }
  if (!r.at_end()) r.fail(FormatFault::kCorrupt, "trailing bytes");
  return out;
}

std::string serialize_index(std::uint32_t seq_len,
                            const std::vector<IndexEntry>& index) {
  ByteWriter w;
  w.header("FDMI", kIndexVersion);
  w.u32(seq_len);
  w.u32(static_cast<std::uint32_t>(index.size()));
  for (const auto& e : index) {
    w.u32(e.path_id);
    w.u32(e.start);
    w.u32(e.end);
  }
  return w.take();
}

IndexFile parse_index(std::string_view bytes) {
  ByteReader r(bytes);
  r.header("FDMI", kIndexVersion);
  IndexFile out;
  out.seq_len = r.u32();
  const std::uint32_t n = r.u32();
  if (static_cast<std::uint64_t>(n) * 12 > r.remaining()) {
    r.fail(FormatFault::kTruncated,
           "index declares " + std::to_string(n) + " entries");
  }
  out.entries.resize(n);
  for (auto& e : out.entries) {
    e.path_id = r.u32();
    e.start = r.u32();
    e.end = r.u32();
    if (e.start >= e.end) r.fail(FormatFault::kCorrupt, "empty index window");
  }
  if (!r.at_end()) r.fail(FormatFault::kCorrupt, "trailing bytes");
  return out;
}

CachePaths cache_paths(const std::filesystem::path& cache_dir,
                       const std::string& task_id) {
  return {cache_dir / (task_id + ".fdmt"), cache_dir / (task_id + ".fdmi")};
}

CacheWriteResult write_cache(const TrajStore& store, const std::string& task_id,
                             const std::filesystem::path& cache_dir,
                             std::size_t seq_len) {
  const TaskTokens tokens = tokenize_task(store, task_id);
  const auto index = build_index(tokens, seq_len);
  CacheWriteResult res;
  res.paths = cache_paths(cache_dir, task_id);
  res.tokens_written =
      write_file_if_changed(res.paths.tokens, serialize_token_cache(tokens));
  res.index_written = write_file_if_changed(
      res.paths.index,
      serialize_index(static_cast<std::uint32_t>(seq_len), index));
  return res;
}

namespace {

template <typename Fn>
auto with_path(const std::filesystem::path& path, Fn fn) {
  try {
    return fn(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(e.fault(), e.offset(), path.string() + ": " + e.what());
  }
}

}  // namespace

TaskTokens read_token_cache(const std::filesystem::path& path) {
  return with_path(path, [](const std::string& b) { return parse_token_cache(b); });
}

IndexFile read_index(const std::filesystem::path& path) {
  return with_path(path, [](const std::string& b) { return parse_index(b); });
}

// --- sampling --------------------------------------------------------------

std::size_t PromptConfig::resolved_len(std::size_t seq_len) const {
  return prompt_len < 0 ? seq_len / 2 : static_cast<std::size_t>(prompt_len);
}

void PromptConfig::validate(std::size_t seq_len) const {
  auto frac = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!frac(prompt_fraction) || !frac(goal_fraction) || !frac(eval_top_quantile)) {
    throw ConfigError("prompt fractions must lie in [0, 1]");
  }
  if (resolved_len(seq_len) >= seq_len) {
    throw ConfigError("prompt length must be shorter than the sequence length");
  }
}

SampleWeights normalize_weights(const SampleWeights& w) {
  double total = 0.0;
  for (const auto& [k, v] : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("sample weight for '" + k + "' must be finite and >= 0");
    }
    total += v;
  }
  if (total <= 0.0) throw ConfigError("sample weights sum to zero");
  SampleWeights out;
  for (const auto& [k, v] : w) out[k] = v / total;
  return out;
}

void Dataset::add(Suite suite) {
  const std::string id = suite.tokens.task_id;
  suites_[id] = std::move(suite);
}

const Suite& Dataset::suite(const std::string& task_id) const {
  auto it = suites_.find(task_id);
  if (it == suites_.end()) throw DataError("index missing for task '" + task_id + "'");
  return it->second;
}

std::vector<std::string> Dataset::task_ids() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : suites_) out.push_back(k);
  return out;
}

Dataset Dataset::load(const std::filesystem::path& cache_dir, std::size_t seq_len) {
  Dataset data;
  if (!std::filesystem::is_directory(cache_dir)) {
    throw DataError("index missing: no cache directory " + cache_dir.string());
  }
  std::vector<std::filesystem::path> caches;
  for (const auto& e : std::filesystem::directory_iterator(cache_dir)) {
    if (e.path().extension() == ".fdmt") caches.push_back(e.path());
  }
  std::sort(caches.begin(), caches.end());
  for (const auto& p : caches) {
    auto idx_path = p;
    idx_path.replace_extension(".fdmi");
    if (!std::filesystem::exists(idx_path)) {
      throw DataError("index missing: " + idx_path.string());
    }
    Suite s;
    s.tokens = read_token_cache(p);
    IndexFile idx = read_index(idx_path);
    if (seq_len != 0 && idx.seq_len != seq_len) {
      throw DataError(idx_path.string() + ": index built for sequence length " +
                      std::to_string(idx.seq_len) + ", expected " + std::to_string(seq_len));
    }
    s.index = std::move(idx.entries);
    for (const auto& e : s.index) {
      if (e.path_id >= s.tokens.episodes.size() ||
          e.end > s.tokens.episodes[e.path_id].steps()) {
        throw DataError(idx_path.string() + ": index entry outside token cache");
      }
    }
    data.add(std::move(s));
  }
  if (data.suites_.empty()) {
    throw DataError("index missing: no caches in " + cache_dir.string());
  }
  return data;
}

SequenceSample sample_sequence(const Suite& suite, std::size_t seq_len,
                               const PromptConfig& cfg, Rng& rng) {
  if (suite.index.empty()) {
    throw ConfigError("task '" + suite.tokens.task_id + "' has an empty index");
  }
  SequenceSample s;
  s.task_id = suite.tokens.task_id;
  s.source = suite.index[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(suite.index.size()) - 1))];
  const FlatEpisode& ep = suite.tokens.episodes.at(s.source.path_id);

  TokenSeq body;
  if (rng.bernoulli(cfg.prompt_fraction)) {
    s.prompt.prompted = true;
    s.prompt.goal = rng.bernoulli(cfg.goal_fraction);
    s.prompt.path_id = static_cast<std::uint32_t>(rng.uniform_int(
        0, static_cast<std::int64_t>(suite.tokens.episodes.size()) - 1));
    const FlatEpisode& pe = suite.tokens.episodes[s.prompt.path_id];
    const std::size_t len = std::min(cfg.resolved_len(seq_len), pe.size());
    const std::size_t begin =
        s.prompt.goal ? pe.size() - len
                      : static_cast<std::size_t>(rng.uniform_int(
                            0, static_cast<std::int64_t>(pe.size() - len)));
    s.prompt.token_begin = static_cast<std::uint32_t>(begin);
    s.prompt.tokens = static_cast<std::uint32_t>(len);
    body.append(pe, begin, begin + len);
  }
  const std::size_t wb = ep.step_offsets[s.source.start];
  const std::size_t we = ep.step_offsets[s.source.end];
  const std::size_t room = seq_len - std::min(seq_len, body.size());
  body.append(ep, wb, std::min(we, wb + room));

  s.pad = static_cast<std::uint32_t>(seq_len - body.size());
  s.seq.entries.reserve(seq_len);
  for (std::uint32_t i = 0; i < s.pad; ++i) {
    s.seq.push(Entry::of_symbol(vocab::kPad), 0, kNoPosition);
  }
  s.seq.append(body);
  resolve_patch_positions(s.seq, Mode::kTrain, &rng);
  return s;
}

namespace {

const Suite& pick_suite(const std::vector<std::pair<const Suite*, double>>& cdf,
                        Rng& rng) {
  const double u = rng.uniform();
  for (const auto& [suite, c] : cdf) {
    if (u < c) return *suite;
  }
  return *cdf.back().first;
}

std::vector<std::pair<const Suite*, double>> mixture(const Dataset& data,
                                                     const SampleWeights& w) {
  std::vector<std::pair<const Suite*, double>> cdf;
  double acc = 0.0;
  for (const auto& [task, weight] : normalize_weights(w)) {
    if (weight <= 0.0) continue;
    const Suite& s = data.suite(task);
    if (s.index.empty()) {
      throw ConfigError("task '" + task + "' has positive weight but no index entries");
    }
    acc += weight;
    cdf.emplace_back(&s, acc);
  }
  return cdf;
}

}  // namespace

std::vector<SequenceSample> sample_batch(const Dataset& data,
                                         const SampleWeights& weights,
                                         std::size_t batch,
                                         std::size_t seq_len,
                                         const PromptConfig& cfg, Rng& rng) {
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  cfg.validate(seq_len);
  const auto cdf = mixture(data, weights);
  std::vector<SequenceSample> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out.push_back(sample_sequence(pick_suite(cdf, rng), seq_len, cfg, rng));
  }
  return out;
}

BatchSampler::BatchSampler(const Dataset& data, SampleWeights weights,
                           std::size_t batch, std::size_t seq_len,
                           PromptConfig cfg, std::uint64_t seed, int workers)
    : data_(data),
      weights_(std::move(weights)),
      batch_(batch),
      seq_len_(seq_len),
      cfg_(cfg),
      seed_(seed),
      workers_(std::max(1, workers)) {
  if (batch_ == 0) throw ConfigError("batch size must be >= 1");
  cfg_.validate(seq_len_);
  (void)mixture(data_, weights_);
}

std::vector<SequenceSample> BatchSampler::batch(std::uint64_t step) const {
  const auto cdf = mixture(data_, weights_);
  std::vector<SequenceSample> out(batch_);
  auto work = [&](int w) {
    Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(w), step));
    for (std::size_t i = static_cast<std::size_t>(w); i < batch_;
         i += static_cast<std::size_t>(workers_)) {
      out[i] = sample_sequence(pick_suite(cdf, rng), seq_len_, cfg_, rng);
    }
  };
  if (workers_ == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers_; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  return out;
}

std::string serialize_batch(const std::vector<SequenceSample>& batch) {
  ByteWriter w;
  for (const auto& s : batch) {
    w.str(s.task_id);
    w.u32(s.source.path_id);
    w.u32(s.source.start);
    w.u32(s.source.end);
    w.u8(s.prompt.prompted);
    w.u8(s.prompt.goal);
    w.u32(s.prompt.path_id);
    w.u32(s.prompt.token_begin);
    w.u32(s.prompt.tokens);
    w.u32(s.pad);
    for (std::size_t i = 0; i < s.seq.size(); ++i) {
      const Entry& e = s.seq.entries[i];
      w.u8(static_cast<std::uint8_t>(e.kind));
      if (e.is_patch()) {
        w.u32(e.patch->raster_index);
        w.i32(e.row_pos);
        w.i32(e.col_pos);
        w.f32s(e.patch->pixels);
      } else {
        w.u32(e.symbol);
      }
      w.u8(s.seq.loss_mask[i]);
      w.i32(s.seq.local_pos[i]);
    }
  }
  return w.take();
}

TokenSeq select_eval_prompt(const TaskTokens& tokens, std::size_t seq_len,
                            const PromptConfig& cfg, std::uint64_t seed) {
  if (tokens.episodes.empty()) {
    throw DataError("task '" + tokens.task_id + "' has no stored episodes");
  }
  std::vector<double> sorted = tokens.returns;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::max(
      1.0, std::ceil(cfg.eval_top_quantile * static_cast<double>(sorted.size()))));
  const double threshold = sorted[std::min(k, sorted.size()) - 1];
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < tokens.returns.size(); ++i) {
    if (tokens.returns[i] >= threshold) eligible.push_back(i);
  }
  Rng rng(seed);
  const FlatEpisode& ep = tokens.episodes[eligible[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(eligible.size()) - 1))]];
  const std::size_t cap = cfg.resolved_len(seq_len);
  std::size_t steps = 0;
  while (steps < ep.steps() && ep.step_offsets[steps + 1] <= cap) ++steps;
  TokenSeq out = ep.slice(0, ep.step_offsets[steps]);
  resolve_patch_positions(out, Mode::kEval, nullptr);
  return out;
}

}  // namespace fdm
