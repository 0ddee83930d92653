#include <doctest.h>

#include <cmath>
#include <set>

#include "fdm/tokenize.hpp"
#include "oracles.hpp"

using namespace fdm;

TEST_CASE("vocab layout partitions the table") {
  CHECK(vocab::kDiscreteEnd <= vocab::kTextEnd);
  CHECK(vocab::kContinuousBegin >= vocab::kTextEnd);
  CHECK(vocab::kContinuousEnd == 33024);
  CHECK(vocab::kSeparator == 33204);
  CHECK(vocab::kTableSize == 33205);
  CHECK_FALSE(vocab::is_emittable(vocab::kPad));
  for (Token t = 33024; t < 33204; ++t) CHECK_FALSE(vocab::is_emittable(t));
}

TEST_CASE("text tokenizer training") {
  SUBCASE("merges the repeated pair") {
    std::vector<std::string> corpus{"aaaa"};
    auto tok = TextTokenizer::train(corpus, 260);
    CHECK(tok.contains("aa"));
    CHECK(tok.size() <= 260);
  }
  SUBCASE("round trip and empty input") {
    std::vector<std::string> corpus{"hello world", "help the world"};
    auto tok = TextTokenizer::train(corpus, 300);
    CHECK(tok.detokenize(tok.tokenize("hello")) == "hello");
    CHECK(tok.tokenize("").empty());
  }
  SUBCASE("vocab below byte fallback is a configuration error") {
    std::vector<std::string> corpus{"abc"};
    CHECK_THROWS_AS(TextTokenizer::train(corpus, 255), ConfigError);
    CHECK_THROWS_AS(TextTokenizer::train(corpus, 32001), ConfigError);
  }
  SUBCASE("deterministic and in range") {
    std::vector<std::string> corpus{"go to the red ball", "go to the blue key",
                                    "a red square and a blue circle"};
    auto a = TextTokenizer::train(corpus, 400);
    auto b = TextTokenizer::train(corpus, 400);
    CHECK(a == b);
    CHECK(a.serialize() == b.serialize());
    for (Token t : a.tokenize("go to the green triangle")) CHECK(t < 32000);
  }
}

TEST_CASE("text round trip on arbitrary bytes (property)") {
  std::vector<std::string> corpus{"the quick brown fox", "jumps over the dog",
                                  "the the the fox fox"};
  auto tok = TextTokenizer::train(corpus, 320);
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s(static_cast<std::size_t>(rng.uniform_int(0, 40)), '\0');
    for (char& c : s) c = static_cast<char>(rng.uniform_int(0, 255));
    if (trial % 3 == 0) s += " the fox";
    const auto ids = tok.tokenize(s);
    CHECK(tok.detokenize(ids) == s);
  }
}

TEST_CASE("tokenizer file reproduces tokenization") {
  std::vector<std::string> corpus{"a red circle", "a green square",
                                  "a blue triangle and a red circle"};
  auto tok = TextTokenizer::train(corpus, 300);
  auto loaded = TextTokenizer::deserialize(tok.serialize());
  CHECK(loaded == tok);
  CHECK(loaded.serialize() == tok.serialize());
  CHECK(loaded.tokenize("a red triangle") == tok.tokenize("a red triangle"));

  auto bytes = tok.serialize();
  bytes[0] = 'X';
  CHECK_THROWS_AS(TextTokenizer::deserialize(bytes), FormatError);
  CHECK_THROWS_AS(TextTokenizer::deserialize(tok.serialize().substr(0, 20)),
                  FormatError);
}

TEST_CASE("discrete encoding") {
  CHECK(encode_discrete(7) == 7);
  CHECK(encode_discrete(0) == 0);
  CHECK(decode_discrete(encode_discrete(1023)) == 1023);
  CHECK_THROWS_AS(encode_discrete(1024, "grid"), RangeError);
  try {
    encode_discrete(1024, "grid");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("grid") != std::string::npos);
  }
  CHECK_THROWS_AS(encode_discrete(-1), RangeError);
}


TEST_CASE("continuous encoding") {
  CHECK(encode_continuous(0.0) == 32512);
  CHECK(oracles::mu_law_bin(1.0) == 744);
  CHECK(encode_continuous(1.0) == 32744);
  CHECK(encode_continuous(256.0) == 33023);
  CHECK(encode_continuous(1e9) == 33023);
  CHECK(encode_continuous(-1e9) == 32000);
  CHECK_THROWS_AS(encode_continuous(NAN), ValueError);
  CHECK_THROWS_AS(encode_continuous(INFINITY), ValueError);
  CHECK(decode_continuous(encode_continuous(0.0)) ==
        doctest::Approx(0.0).epsilon(0.01));
}

TEST_CASE("continuous round trip and monotonicity over 1e5 values") {
  Rng rng(3);
  std::vector<double> xs(100000);
  for (double& x : xs) x = (rng.uniform() * 2.0 - 1.0) * vocab::kMuLawMax;
  std::sort(xs.begin(), xs.end());
  Token prev = 0;
  for (double x : xs) {
    const Token t = encode_continuous(x);
    REQUIRE(t == static_cast<Token>(32000 + oracles::mu_law_bin(x)));
    const auto iv = continuous_bin_interval(t);
    REQUIRE(std::abs(x - decode_continuous(t)) <= iv.hi - iv.lo + 1e-12);
    REQUIRE(t >= prev);
    prev = t;
  }
}

TEST_CASE("patch extraction") {
  SUBCASE("single patch") {
    Image img(16, 16, 3);
    Rng rng(1);
    for (float& p : img.pixels) p = static_cast<float>(rng.uniform());
    auto patches = extract_patches(img);
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].rows == Interval{0.0, 1.0});
    CHECK(patches[0].cols == Interval{0.0, 1.0});
    double mean = 0, var = 0;
    for (float v : patches[0].pixels) mean += v;
    mean /= patches[0].pixels.size();
    for (float v : patches[0].pixels) var += (v - mean) * (v - mean);
    var /= patches[0].pixels.size();
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("raster order") {
    Image img(32, 48, 1);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 48; ++c) img.at(r, c, 0) = static_cast<float>(r * 100 + c + (c % 2));
    auto patches = extract_patches(img);
    REQUIRE(patches.size() == 6);
    for (std::uint32_t i = 0; i < 6; ++i) {
      CHECK(patches[i].raster_index == i);
      CHECK(patches[i].rows.lo == doctest::Approx((i / 3) * 0.5));
      CHECK(patches[i].cols.lo == doctest::Approx((i % 3) / 3.0));
    }
  }
  SUBCASE("constant patch normalizes to zero") {
    Image img(16, 16, 3, 0.7f);
    const auto patches = extract_patches(img);
    for (float v : patches[0].pixels) CHECK(v == 0.0f);
  }
  SUBCASE("bad shape") {
    CHECK_THROWS_AS(extract_patches(Image(20, 16, 3)), ShapeError);
  }
}

TEST_CASE("patch position index") {
  CHECK(patch_position_index({0.0, 0.5}, Mode::kEval, nullptr) == 32);
  CHECK(patch_position_index({0.0, 1.0}, Mode::kEval, nullptr) == 64);
  CHECK(patch_position_index({0.5, 1.0}, Mode::kEval, nullptr) == 96);
  CHECK(patch_position_index({1.0, 1.0}, Mode::kEval, nullptr) == 127);
  Rng rng(5);
  std::set<int> seen;
  for (int i = 0; i < 2000; ++i) {
    const int v = patch_position_index({0.0, 0.5}, Mode::kTrain, &rng);
    CHECK(v >= 0);
    CHECK(v <= 63);
    seen.insert(v);
  }
  CHECK(seen.size() == 64);
  CHECK_THROWS_AS(patch_position_index({0.6, 0.5}, Mode::kEval, nullptr),
                  ValueError);
  CHECK_THROWS_AS(patch_position_index({-0.1, 0.5}, Mode::kEval, nullptr),
                  ValueError);
}

namespace {

ModalitySpec simple_spec() {
  ModalitySpec spec;
  spec.fields = {discrete_field("a", {2}, 8)};
  spec.action = {Modality::kContinuous, 1, 0};
  spec.normalize();
  return spec;
}

std::vector<Token> symbols(const TokenSeq& seq) {
  std::vector<Token> out;
  for (const auto& e : seq.entries) out.push_back(e.is_patch() ? ~0u : e.symbol);
  return out;
}

}  // namespace

TEST_CASE("assemble_timestep worked example") {
  auto spec = simple_spec();
  Observation obs{{"a", std::vector<std::int64_t>{3, 5}}};
  auto ts = assemble_timestep(obs, ActionValue{std::vector<double>{0.0}}, spec);
  CHECK(symbols(ts) == std::vector<Token>{3, 5, 33204, 32512});
  CHECK(ts.loss_mask == std::vector<std::uint8_t>{0, 0, 0, 1});
  CHECK(ts.local_pos == std::vector<int>{0, 1, 2, kActionPosition});

  auto last = assemble_timestep(obs, std::nullopt, spec);
  CHECK(symbols(last) == std::vector<Token>{3, 5, 33204});
  CHECK(last.loss_mask == std::vector<std::uint8_t>{0, 0, 0});
}

TEST_CASE("assemble_timestep orders text, vision, tensors") {
  std::vector<std::string> corpus{"go left"};
  auto tok = TextTokenizer::train(corpus, 260);
  ModalitySpec spec;
  spec.fields = {discrete_field("a", {1}, 4), image_field("z", 32, 32, 3),
                 text_field("note"), continuous_field("b", {1})};
  spec.action = {Modality::kDiscrete, 1, 4};
  spec.normalize();
  Image img(32, 32, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i % 7);
  Observation obs{{"a", std::vector<std::int64_t>{1}},
                  {"z", img},
                  {"note", std::string("go")},
                  {"b", std::vector<double>{0.0}}};
  auto ts = assemble_timestep(obs, ActionValue{std::vector<std::int64_t>{2}},
                              spec, &tok);
  const auto text = tok.tokenize("go");
  const std::size_t nt = text.size();
  REQUIRE(ts.size() == nt + 4 + 2 + 1 + 1);
  for (std::size_t i = 0; i < nt; ++i) CHECK(ts.entries[i].symbol == text[i]);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(ts.entries[nt + i].is_patch());
    CHECK(ts.entries[nt + i].patch->raster_index == i);
    CHECK(ts.loss_mask[nt + i] == 0);
  }
  // Tensors: "a" before "b".
  CHECK(ts.entries[nt + 4].symbol == 1);
  CHECK(ts.entries[nt + 5].symbol == 32512);
  CHECK(ts.entries[nt + 6].symbol == vocab::kSeparator);
  CHECK(ts.entries[nt + 7].symbol == 2);
  CHECK(ts.local_pos[nt + 6] == static_cast<int>(nt + 6));
}

TEST_CASE("assemble_timestep errors") {
  auto spec = simple_spec();
  CHECK_THROWS_AS(assemble_timestep({{"a", std::vector<std::int64_t>{3, 5}},
                                     {"q", std::vector<std::int64_t>{1}}},
                                    std::nullopt, spec),
                  SpecError);
  CHECK_THROWS_AS(assemble_timestep({{"a", std::vector<std::int64_t>{3}}},
                                    std::nullopt, spec),
                  SpecError);
  CHECK_THROWS_AS(assemble_timestep({{"a", std::vector<std::int64_t>{3, 9}}},
                                    std::nullopt, spec),
                  RangeError);
  ModalitySpec wide;
  wide.fields = {discrete_field("a", {1}, 1024)};
  wide.normalize();
  CHECK_THROWS_AS(assemble_timestep({{"a", std::vector<std::int64_t>{1024}}},
                                    std::nullopt, wide),
                  RangeError);
  CHECK_THROWS_AS(assemble_timestep({{"a", std::string("x")}}, std::nullopt,
                                    spec),
                  SpecError);
}

namespace {

struct RandomTask {
  ModalitySpec spec;
  TextTokenizer tok;
};

RandomTask random_task() {
  std::vector<std::string> corpus{"pick up the key", "open the door"};
  RandomTask t{{}, TextTokenizer::train(corpus, 300)};
  t.spec.fields = {text_field("goal"), image_field("view", 16, 32, 3),
                   discrete_field("grid", {2, 3}, 11),
                   continuous_field("vel", {2})};
  t.spec.action = {Modality::kContinuous, 2, 0};
  t.spec.normalize();
  return t;
}

Episode random_episode(const RandomTask& task, Rng& rng, int steps) {
  Episode ep;
  ep.task_id = "rand";
  for (int s = 0; s < steps; ++s) {
    Timestep ts;
    ts.observation["goal"] = std::string(rng.bernoulli(0.5) ? "open the door" : "pick up");
    Image img(16, 32, 3);
    for (float& p : img.pixels) p = static_cast<float>(rng.uniform());
    ts.observation["view"] = img;
    std::vector<std::int64_t> grid(6);
    for (auto& g : grid) g = rng.uniform_int(0, 10);
    ts.observation["grid"] = grid;
    ts.observation["vel"] = std::vector<double>{rng.normal() * 50, rng.normal()};
    if (s + 1 < steps) {
      ts.action = std::vector<double>{rng.normal(), rng.normal() * 300};
    }
    ts.reward = rng.uniform();
    ep.steps.push_back(std::move(ts));
  }
  return ep;
}

}  // namespace

TEST_CASE("range partition, mask discipline and determinism (property)") {
  auto task = random_task();
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int steps = static_cast<int>(rng.uniform_int(1, 6));
    auto ep = random_episode(task, rng, steps);
    auto flat = flatten_episode(ep, task.spec, &task.tok, Mode::kEval, nullptr);
    std::size_t actions = 0;
    for (const auto& s : ep.steps) actions += s.action ? 2 : 0;
    std::size_t mask_sum = 0;
    std::size_t separators = 0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const auto& e = flat.entries[i];
      mask_sum += flat.loss_mask[i];
      if (e.is_patch()) {
        CHECK(flat.loss_mask[i] == 0);
        CHECK(e.row_pos >= 0);
        continue;
      }
      CHECK(vocab::is_emittable(e.symbol));
      separators += e.symbol == vocab::kSeparator;
      if (flat.loss_mask[i]) CHECK(flat.local_pos[i] == kActionPosition);
    }
    CHECK(mask_sum == actions);
    CHECK(separators == ep.steps.size());
    CHECK(flat.step_offsets.back() == flat.size());
    CHECK(flatten_episode(ep, task.spec, &task.tok, Mode::kEval, nullptr) == flat);
  }
}

TEST_CASE("flatten_episode") {
  auto spec = simple_spec();
  Episode ep;
  Timestep ts{{{"a", std::vector<std::int64_t>{3, 5}}},
              ActionValue{std::vector<double>{0.0}}, 1.0};
  ep.steps = {ts};
  auto one = flatten_episode(ep, spec, nullptr, Mode::kEval, nullptr);
  CHECK(static_cast<const TokenSeq&>(one) ==
        assemble_timestep(ts.observation, ts.action, spec));

  ep.steps.assign(7, ts);
  auto many = flatten_episode(ep, spec, nullptr, Mode::kEval, nullptr);
  CHECK(many.size() == 7 * 4);
  CHECK(many.steps() == 7);

  ep.steps[3].observation["a"] = std::vector<std::int64_t>{1};
  CHECK_THROWS_AS(flatten_episode(ep, spec, nullptr, Mode::kEval, nullptr),
                  DataError);
}

TEST_CASE("supervised text fields enter the loss mask") {
  std::vector<std::string> corpus{"a red circle"};
  auto tok = TextTokenizer::train(corpus, 270);
  ModalitySpec spec;
  spec.fields = {text_field("caption", true)};
  spec.normalize();
  auto ts = assemble_timestep({{"caption", std::string("a red circle")}},
                              std::nullopt, spec, &tok);
  const auto n = tok.tokenize("a red circle").size();
  for (std::size_t i = 0; i < n; ++i) CHECK(ts.loss_mask[i] == 1);
  CHECK(ts.loss_mask.back() == 0);
}

TEST_CASE("text actions pad with id 0 and decode back") {
  std::vector<std::string> corpus{"a red circle", "a blue square"};
  auto tok = TextTokenizer::train(corpus, 280);
  ActionSpec spec{Modality::kText, 12, 0};
  auto ids = tokenize_action(ActionValue{std::string("a red square")}, spec, &tok);
  CHECK(ids.size() == 12);
  CHECK(ids.back() == 0);
  CHECK(std::get<std::string>(detokenize_action(ids, spec, &tok)) == "a red square");
  CHECK(action_token_range(spec, &tok).end == tok.size());
  CHECK_THROWS_AS(tokenize_action(ActionValue{std::string(40, 'x')}, spec, &tok),
                  SpecError);
}
