#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "fdm/binio.hpp"
#include "fdm/dataset.hpp"
#include "oracles.hpp"

using namespace fdm;
namespace fs = std::filesystem;

namespace {

// Each timestep: `width` discrete values + separator + 1 action token.
ModalitySpec grid_spec(int width) {
  ModalitySpec spec;
  spec.fields = {discrete_field("a", {width}, 8)};
  spec.action = {Modality::kDiscrete, 1, 4};
  spec.normalize();
  return spec;
}

Episode grid_episode(int width, int steps, Rng& rng, bool final_action = true) {
  Episode ep;
  for (int t = 0; t < steps; ++t) {
    Timestep ts;
    std::vector<std::int64_t> v(width);
    for (auto& x : v) x = rng.uniform_int(0, 7);
    ts.observation["a"] = v;
    if (final_action || t + 1 < steps) {
      ts.action = std::vector<std::int64_t>{rng.uniform_int(0, 3)};
    }
    ts.reward = static_cast<double>(rng.uniform_int(0, 2));
    ep.steps.push_back(std::move(ts));
  }
  return ep;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fdm_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("append_episode") {
  TrajStore store;
  store.register_task("grid", grid_spec(2));
  Rng rng(1);
  Episode ep = grid_episode(2, 3, rng);
  ep.steps[0].reward = 1;
  ep.steps[1].reward = 0;
  ep.steps[2].reward = 2;
  const auto id = store.append_episode("grid", ep);
  CHECK(id == 0);
  CHECK(store.episode_count("grid") == 1);
  CHECK(store.task("grid").returns[0] == 3.0);
  CHECK(store.task("grid").lengths[0] == 3);
  const auto& spec = store.task("grid").spec;
  CHECK(serialize_episode(store.episode("grid", 0), spec) ==
        serialize_episode(ep, spec));

  Episode bad = ep;
  bad.steps[1].observation["a"] = std::vector<std::int64_t>{1, 2, 3};
  CHECK_THROWS_AS(store.append_episode("grid", bad), DataError);
  CHECK(store.episode_count("grid") == 1);
  CHECK_THROWS_AS(store.append_episode("nope", ep), DataError);
}

TEST_CASE("shard files persist and reload") {
  const auto dir = temp_dir("shard");
  Rng rng(2);
  {
    TrajStore store(dir);
    store.register_task("grid", grid_spec(3));
    for (int i = 0; i < 5; ++i) store.append_episode("grid", grid_episode(3, 4, rng));
    const auto before = read_file(store.shard_path("grid"));
    Episode bad = grid_episode(3, 2, rng);
    bad.steps[0].observation["a"] = std::vector<std::int64_t>{9, 9, 9};
    CHECK_THROWS_AS(store.append_episode("grid", bad), DataError);
    CHECK(read_file(store.shard_path("grid")) == before);
    CHECK(before == store.shard_bytes("grid"));
    CHECK(before.substr(0, 4) == "FDM1");
  }
  auto reopened = TrajStore::open(dir);
  CHECK(reopened.episode_count("grid") == 5);
  CHECK(reopened.shard_bytes("grid") == read_file(reopened.shard_path("grid")));

  auto bytes = read_file(reopened.shard_path("grid"));
  write_file(dir / "grid.fdm1", bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(TrajStore::open(dir), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("build_index examples") {
  TrajStore store;
  store.register_task("grid", grid_spec(6));  // 8 tokens per step
  Rng rng(3);
  store.append_episode("grid", grid_episode(6, 10, rng));
  auto tokens = tokenize_task(store, "grid");
  REQUIRE(tokens.episodes[0].size() == 80);

  auto idx = build_index(tokens, 32);
  CHECK(idx.size() == 7);
  CHECK(idx == oracles::sliding_index(tokens, 32));
  for (std::uint32_t s = 0; s < 7; ++s) {
    CHECK(idx[s] == IndexEntry{0, s, s + 4});
  }

  auto per_step = build_index(tokens, 8);
  CHECK(per_step.size() == 10);
  for (const auto& e : per_step) CHECK(e.end == e.start + 1);

  auto whole = build_index(tokens, 100);
  REQUIRE(whole.size() == 1);
  CHECK(whole[0] == IndexEntry{0, 0, 10});

  // A timestep longer than L skips the episode.
  CHECK(build_index(tokens, 7).empty());
  CHECK_THROWS_AS(build_index(store, "other", 8), DataError);
}

TEST_CASE("index minimality, exhaustive on a 50-episode store") {
  TrajStore store;
  store.register_task("var", grid_spec(3));
  store.register_task("wide", grid_spec(9));
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    store.append_episode("var", grid_episode(3, static_cast<int>(rng.uniform_int(1, 15)), rng,
                                             rng.bernoulli(0.5)));
  }
  for (int i = 0; i < 10; ++i) {
    store.append_episode("wide", grid_episode(9, static_cast<int>(rng.uniform_int(1, 6)), rng));
  }
  for (const std::string task : {"var", "wide"}) {
    auto tokens = tokenize_task(store, task);
    for (std::size_t L : {5u, 6u, 11u, 17u, 40u}) {
      auto idx = build_index(tokens, L);
      CHECK(idx == oracles::sliding_index(tokens, L));
      for (const auto& e : idx) {
        const auto& ep = tokens.episodes[e.path_id];
        CHECK(e.start < e.end);
        CHECK(e.end <= ep.steps());
        if (ep.size() < L) continue;
        CHECK(window_tokens(ep, e.start, e.end) >= L);
        CHECK(window_tokens(ep, e.start, e.end - 1) < L);
      }
    }
  }
}

TEST_CASE("token cache and index files") {
  const auto dir = temp_dir("cache");
  TrajStore store(dir);
  ModalitySpec spec;
  spec.fields = {image_field("img", 16, 32, 3), discrete_field("a", {2}, 8)};
  spec.action = {Modality::kContinuous, 2, 0};
  store.register_task("mix", spec);
  Rng rng(5);
  for (int i = 0; i < 6; ++i) {
    Episode ep;
    for (int t = 0; t < 3; ++t) {
      Timestep ts;
      Image img(16, 32, 3);
      for (float& p : img.pixels) p = static_cast<float>(rng.uniform());
      ts.observation["img"] = img;
      ts.observation["a"] = std::vector<std::int64_t>{rng.uniform_int(0, 7), 1};
      ts.action = std::vector<double>{rng.normal(), rng.normal()};
      ts.reward = rng.uniform();
      ep.steps.push_back(ts);
    }
    store.append_episode("mix", ep);
  }
  const auto cache = dir / "cache";
  auto res = write_cache(store, "mix", cache, 12);
  CHECK(res.tokens_written);
  CHECK(res.index_written);

  const auto tokens = read_token_cache(res.paths.tokens);
  CHECK(tokens == tokenize_task(store, "mix"));
  const auto index = read_index(res.paths.index);
  CHECK(index.seq_len == 12);
  CHECK(index.entries == build_index(store, "mix", 12));

  const auto bytes = read_file(res.paths.tokens);
  auto again = write_cache(store, "mix", cache, 12);
  CHECK_FALSE(again.tokens_written);
  CHECK_FALSE(again.index_written);
  CHECK(read_file(res.paths.tokens) == bytes);

  SUBCASE("truncation is reported, not decoded") {
    write_file(res.paths.tokens, bytes.substr(0, bytes.size() - 1));
    try {
      read_token_cache(res.paths.tokens);
      FAIL("expected a FormatError");
    } catch (const FormatError& e) {
      CHECK(e.fault() == FormatFault::kTruncated);
      CHECK(e.offset() > 0);
    }
  }
  SUBCASE("bad magic and version are distinct") {
    auto b = bytes;
    b[1] = 'Z';
    try {
      parse_token_cache(b);
      FAIL("expected bad magic");
    } catch (const FormatError& e) {
      CHECK(e.fault() == FormatFault::kBadMagic);
    }
    b = bytes;
    b[4] = 9;
    try {
      parse_token_cache(b);
      FAIL("expected version mismatch");
    } catch (const FormatError& e) {
      CHECK(e.fault() == FormatFault::kVersionMismatch);
      CHECK(e.offset() == 4);
    }
    const auto ib = read_file(res.paths.index);
    CHECK_THROWS_AS(parse_index(ib.substr(0, ib.size() - 1)), FormatError);
  }
  fs::remove_all(dir);
}

TEST_CASE("cache fidelity on generated stores (property)") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    TrajStore store;
    const int width = static_cast<int>(rng.uniform_int(1, 5));
    store.register_task("t", grid_spec(width));
    const int n = static_cast<int>(rng.uniform_int(1, 8));
    for (int i = 0; i < n; ++i) {
      store.append_episode("t", grid_episode(width, static_cast<int>(rng.uniform_int(1, 9)), rng,
                                             rng.bernoulli(0.5)));
    }
    const auto tokens = tokenize_task(store, "t");
    const auto bytes = serialize_token_cache(tokens);
    CHECK(parse_token_cache(bytes) == tokens);
    CHECK(serialize_token_cache(parse_token_cache(bytes)) == bytes);
    const auto idx = build_index(tokens, 10);
    CHECK(parse_index(serialize_index(10, idx)).entries == idx);
  }
}

namespace {

Dataset two_suite_dataset(std::size_t L) {
  TrajStore store;
  store.register_task("a", grid_spec(6));
  store.register_task("b", grid_spec(2));
  Rng rng(7);
  for (int i = 0; i < 12; ++i) store.append_episode("a", grid_episode(6, 12, rng));
  for (int i = 0; i < 12; ++i) store.append_episode("b", grid_episode(2, 30, rng));
  Dataset data;
  for (const std::string t : {"a", "b"}) {
    Suite s;
    s.tokens = tokenize_task(store, t);
    s.index = build_index(s.tokens, L);
    data.add(std::move(s));
  }
  return data;
}

}  // namespace

TEST_CASE("sample_batch shape, masks and determinism") {
  const std::size_t L = 40;
  auto data = two_suite_dataset(L);
  PromptConfig cfg;
  Rng r1(9), r2(9);
  auto b1 = sample_batch(data, {{"a", 1.0}}, 64, L, cfg, r1);
  auto b2 = sample_batch(data, {{"a", 1.0}}, 64, L, cfg, r2);
  CHECK(serialize_batch(b1) == serialize_batch(b2));
  for (const auto& s : b1) {
    CHECK(s.task_id == "a");
    REQUIRE(s.seq.size() == L);
    for (std::size_t i = 0; i < s.pad; ++i) {
      CHECK(s.seq.entries[i].symbol == vocab::kPad);
      CHECK(s.seq.loss_mask[i] == 0);
    }
    for (std::size_t i = 0; i < L; ++i) {
      if (s.seq.loss_mask[i]) CHECK(s.seq.local_pos[i] == kActionPosition);
    }
    if (s.prompt.prompted) CHECK(s.prompt.tokens == L / 2);
  }

  Rng r3(9);
  CHECK_THROWS_AS(sample_batch(data, {{"a", 1.0}}, 0, L, cfg, r3), ConfigError);
  CHECK_THROWS_AS(sample_batch(data, {{"zz", 1.0}}, 4, L, cfg, r3), DataError);

  Dataset with_empty = data;
  Suite empty;
  empty.tokens.task_id = "empty";
  with_empty.add(empty);
  CHECK_THROWS_AS(sample_batch(with_empty, {{"a", 0.5}, {"empty", 0.5}}, 4, L, cfg, r3),
                  ConfigError);
  CHECK_NOTHROW(sample_batch(with_empty, {{"a", 0.5}, {"empty", 0.0}}, 4, L, cfg, r3));
}

TEST_CASE("prompt fractions within 3 sigma over 100 batches") {
  const std::size_t L = 40;
  auto data = two_suite_dataset(L);
  PromptConfig cfg;
  Rng rng(10);
  const int B = 512, batches = 100;
  int prompted = 0, goal = 0;
  for (int b = 0; b < batches; ++b) {
    for (const auto& s : sample_batch(data, {{"a", 0.5}, {"b", 0.5}}, B, L, cfg, rng)) {
      prompted += s.prompt.prompted;
      goal += s.prompt.goal;
    }
  }
  const double n = static_cast<double>(B) * batches;
  CHECK(std::abs(prompted - 0.25 * n) <= 3.0 * std::sqrt(n * 0.25 * 0.75));
  CHECK(std::abs(goal - 0.5 * prompted) <= 3.0 * std::sqrt(prompted * 0.25));
}

TEST_CASE("suite mixture passes chi-square at 0.01") {
  const std::size_t L = 40;
  auto data = two_suite_dataset(L);
  Rng rng(11);
  const int draws = 20000;
  int a = 0;
  for (const auto& s :
       sample_batch(data, {{"a", 0.3}, {"b", 0.7}}, draws, L, PromptConfig{}, rng)) {
    a += s.task_id == "a";
  }
  const double ea = 0.3 * draws, eb = 0.7 * draws;
  const double chi2 = (a - ea) * (a - ea) / ea + ((draws - a) - eb) * ((draws - a) - eb) / eb;
  CHECK(chi2 < 6.635);  // 1 dof, alpha = 0.01
}

TEST_CASE("BatchSampler worker streams are reproducible") {
  const std::size_t L = 40;
  auto data = two_suite_dataset(L);
  BatchSampler s1(data, {{"a", 1}, {"b", 1}}, 16, L, {}, 42, 1);
  BatchSampler s2(data, {{"a", 1}, {"b", 1}}, 16, L, {}, 42, 1);
  BatchSampler s3(data, {{"a", 1}, {"b", 1}}, 16, L, {}, 42, 3);
  BatchSampler s4(data, {{"a", 1}, {"b", 1}}, 16, L, {}, 42, 3);
  for (std::uint64_t step = 0; step < 5; ++step) {
    CHECK(serialize_batch(s1.batch(step)) == serialize_batch(s2.batch(step)));
    CHECK(serialize_batch(s3.batch(step)) == serialize_batch(s4.batch(step)));
  }
  CHECK(serialize_batch(s1.batch(0)) != serialize_batch(s1.batch(1)));
}

TEST_CASE("select_eval_prompt") {
  TrajStore store;
  store.register_task("g", grid_spec(6));
  Rng rng(12);
  Episode only = grid_episode(6, 20, rng);
  store.append_episode("g", only);
  auto tokens = tokenize_task(store, "g");
  const std::size_t L = 64;
  auto p = select_eval_prompt(tokens, L, {}, 1);
  CHECK(p.size() == 32);  // four whole 8-token timesteps
  CHECK(p == tokens.episodes[0].slice(0, 32));
  PromptConfig none;
  none.prompt_len = 0;
  CHECK(select_eval_prompt(tokens, L, none, 1).empty());

  TrajStore ranked;
  ranked.register_task("g", grid_spec(6));
  for (int r = 0; r < 10; ++r) {
    Episode ep = grid_episode(6, 3, rng);
    for (auto& s : ep.steps) s.reward = 0;
    ep.steps[0].reward = r;
    ep.steps[0].observation["a"] = std::vector<std::int64_t>{r % 8, 0, 0, 0, 0, 0};
    ranked.append_episode("g", ep);
  }
  auto rt = tokenize_task(ranked, "g");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto prompt = select_eval_prompt(rt, L, {}, seed);
    REQUIRE(prompt.size() == 24);
    CHECK(prompt.entries[0].symbol == 9 % 8);
    CHECK(prompt.size() <= L / 2);
  }
  CHECK_THROWS_AS(select_eval_prompt(TaskTokens{}, L, {}, 0), DataError);
}
