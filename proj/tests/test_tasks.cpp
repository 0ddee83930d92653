#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>

#include "fdm/tasks/caption.hpp"
#include "fdm/tasks/gridworld.hpp"
#include "fdm/tasks/sokoban.hpp"
#include "fdm/tasks/tsp.hpp"
#include "oracles.hpp"

using namespace fdm;

namespace {

std::vector<std::int64_t> actions_of(const Episode& ep) {
  std::vector<std::int64_t> out;
  for (const auto& s : ep.steps) out.push_back(std::get<std::vector<std::int64_t>>(*s.action)[0]);
  return out;
}

// Forward BFS over (x, y, dir) with its own movement rules.
int gridworld_bfs(int size, int sx, int sy, int sdir, int tx, int ty) {
  const int dx[4] = {1, 0, -1, 0}, dy[4] = {0, 1, 0, -1};
  std::map<std::array<int, 3>, int> dist;
  std::deque<std::array<int, 3>> q;
  dist[{sx, sy, sdir}] = 0;
  q.push_back({sx, sy, sdir});
  while (!q.empty()) {
    auto s = q.front();
    q.pop_front();
    if (s[0] == tx && s[1] == ty) return dist[s];
    std::vector<std::array<int, 3>> next = {{s[0], s[1], (s[2] + 3) % 4},
                                            {s[0], s[1], (s[2] + 1) % 4}};
    const int nx = s[0] + dx[s[2]], ny = s[1] + dy[s[2]];
    if (nx >= 0 && ny >= 0 && nx < size && ny < size) next.push_back({nx, ny, s[2]});
    for (const auto& n : next) {
      if (dist.emplace(n, dist[s] + 1).second) q.push_back(n);
    }
  }
  return -1;
}

// Forward BFS over sokoban states using a plain grid model.
int sokoban_bfs(int size, std::set<int> boxes, int player, const std::set<int>& targets) {
  auto wall = [&](int c) {
    const int r = c / size, col = c % size;
    return r == 0 || col == 0 || r == size - 1 || col == size - 1;
  };
  using S = std::pair<std::set<int>, int>;
  std::map<S, int> dist;
  std::deque<S> q;
  dist[{boxes, player}] = 0;
  q.push_back({boxes, player});
  const int off[4] = {-size, size, -1, 1};
  while (!q.empty()) {
    S s = q.front();
    q.pop_front();
    if (s.first == targets) return dist[s];
    for (int o : off) {
      S n = s;
      const int p = s.second + o;
      if (wall(p)) continue;
      if (n.first.count(p)) {
        if (wall(p + o) || n.first.count(p + o)) continue;
        n.first.erase(p);
        n.first.insert(p + o);
      }
      n.second = p;
      if (dist.emplace(n, dist[s] + 1).second) q.push_back(n);
    }
  }
  return -1;
}

std::set<int> cells_of(std::uint64_t mask) {
  std::set<int> out;
  for (int c = 0; c < 64; ++c) {
    if ((mask >> c) & 1u) out.insert(c);
  }
  return out;
}

void check_replay(Env& env, const Episode& ep) {
  env.reset();
  for (std::size_t t = 0; t < ep.steps.size(); ++t) {
    CHECK(env.observe() == ep.steps[t].observation);
    const auto r = env.step(*ep.steps[t].action);
    CHECK(r.reward == ep.steps[t].reward);
    CHECK(r.done == (t + 1 == ep.steps.size()));
  }
}

}  // namespace

TEST_CASE("gridworld: straight-line expert") {
  GridWorld g(5, {{0, 0, 3, 1}, {1, 1, 0, 4}}, 0, {1, 1, 0}, 20);
  auto ep = expert_episode(g, "gridworld");
  CHECK(actions_of(ep) == std::vector<std::int64_t>{2, 2, 3});
  CHECK(ep.total_return() == 1.0);
  CHECK(g.instruction() == "go to the red ball");
}

TEST_CASE("gridworld: expert is shortest and always succeeds") {
  SuiteParams p;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    GridWorld g(seed, p.grid_size, p.grid_objects, p.grid_horizon);
    const auto start = g.pose();
    auto ep = expert_episode(g, "gridworld");
    CHECK(ep.total_return() == 1.0);
    const int bfs = gridworld_bfs(g.size(), start.x, start.y, start.dir, g.target().x,
                                  g.target().y);
    CHECK(static_cast<int>(ep.length()) == bfs + 1);
    CHECK_NOTHROW(validate_episode(ep, g.spec().modality));
    check_replay(g, ep);
  }
}

TEST_CASE("gridworld: done off target and walls") {
  GridWorld g(4, {{0, 0, 3, 3}, {1, 1, 2, 2}}, 0, {0, 0, 2}, 10);
  g.reset();
  CHECK(g.step(std::vector<std::int64_t>{GridWorld::kForward}).reward == 0.0);
  CHECK(g.pose() == GridWorld::Pose{0, 0, 2});
  auto r = g.step(std::vector<std::int64_t>{GridWorld::kDone});
  CHECK(r.done);
  CHECK(r.reward == 0.0);
  CHECK_THROWS_AS(g.step(std::vector<std::int64_t>{0}), DataError);
  g.reset();
  CHECK_THROWS_AS(g.step(std::vector<std::int64_t>{4}), RangeError);
}

TEST_CASE("sokoban: one pull gives a one-push solution") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Sokoban s(seed, 6, 1, 1, 20);
    CHECK(s.solution_length() == 1);
    auto ep = expert_episode(s, "sokoban");
    CHECK(ep.length() == 1);
    CHECK(ep.total_return() == 1.0);
  }
}

TEST_CASE("sokoban: expert replays to the solved state") {
  for (int size : {5, 6, 7}) {
    for (int boxes : {1, 2}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Sokoban s(seed, size, boxes, 5, 40);
        auto ep = expert_episode(s, "sokoban");
        CHECK(ep.total_return() == 1.0);
        CHECK(static_cast<int>(ep.length()) == s.solution_length());
        CHECK(s.solved(s.state()));
        CHECK_NOTHROW(validate_episode(ep, s.spec().modality));
        check_replay(s, ep);
      }
    }
  }
}

TEST_CASE("sokoban: 5x5 single-box expert is optimal") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Sokoban s(seed, 5, 1, 4, 40);
    const int bfs = sokoban_bfs(5, cells_of(s.start().boxes), s.start().player,
                                cells_of(s.targets()));
    CHECK(s.solution_length() == bfs);
  }
}

TEST_CASE("sokoban: hand-built puzzle") {
  // Box at (2,2), target at (2,3); player at (2,1) pushes right once.
  Sokoban s(6, std::uint64_t{1} << 15, {std::uint64_t{1} << 14, 13}, 10);
  CHECK(s.solution_length() == 1);
  s.reset();
  CHECK(s.expert_action() == ActionValue{std::vector<std::int64_t>{Sokoban::kRight}});
  auto grid = std::get<std::vector<std::int64_t>>(s.observe().at("grid"));
  CHECK(grid[13] == Sokoban::kPlayer);
  CHECK(grid[14] == Sokoban::kBox);
  CHECK(grid[15] == Sokoban::kTarget);
  CHECK(grid[0] == Sokoban::kWall);
}

TEST_CASE("tsp instances") {
  Rng a(7), b(7);
  auto c4 = gen_tsp_instance(4, a);
  REQUIRE(c4.size() == 4);
  for (const auto& p : c4) {
    CHECK(p[0] >= 0.0);
    CHECK(p[0] < 1.0);
    CHECK(p[1] >= 0.0);
    CHECK(p[1] < 1.0);
  }
  CHECK(gen_tsp_instance(4, b) == c4);
  Rng big(8);
  auto many = gen_tsp_instance(50000, big);
  double sum = 0;
  for (const auto& p : many) sum += p[0] + p[1];
  CHECK(std::abs(sum / 1e5 - 0.5) < 0.01);
  CHECK_THROWS_AS(gen_tsp_instance(2, a), RangeError);
}

TEST_CASE("tsp oracle against brute force") {
  const std::vector<Point> corners = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
  CHECK(tsp_oracle(corners).length == 4.0);
  CHECK(oracles::brute_force_tsp(corners) == 4.0);

  int equal = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const int n = 3 + static_cast<int>(seed % 6);
    auto coords = gen_tsp_instance(n, rng);
    const Tour t = tsp_oracle(coords);
    const double opt = oracles::brute_force_tsp(coords);
    std::vector<int> sorted = t.order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    CHECK(sorted == ids);
    CHECK(t.order[0] == 0);
    CHECK(t.length >= opt - 1e-9);
    CHECK(t.length <= nearest_neighbor_tour(coords).length + 1e-12);
    equal += std::abs(t.length - opt) < 1e-9;
  }
  CHECK(equal >= 90);
}

TEST_CASE("tsp features") {
  TspState s = TspState::initial({{0.5, 0.5}, {0.6, 0.5}, {0.5, 0.7}}, 2);
  const auto f = tsp_state_features(s);
  const std::vector<double> want = {0.1, 0, 0.1, 0, 0.2, 0.2};
  REQUIRE(f.size() == want.size());
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == doctest::Approx(want[i]).epsilon(1e-12));

  s.k = 4;
  const auto padded = tsp_state_features(s);
  REQUIRE(padded.size() == 12);
  CHECK(padded[6] == 0.0);
  CHECK(padded[8] == kTspSentinelDistance);
  CHECK(padded[11] == kTspSentinelDistance);

  s.visited = {true, true, true};
  CHECK_THROWS_AS(tsp_state_features(s), DataError);

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    TspState r = TspState::initial(gen_tsp_instance(12, rng), 5);
    r.current = static_cast<int>(rng.uniform_int(0, 11));
    for (int j = 0; j < 12; ++j) r.visited[j] = r.visited[j] || rng.bernoulli(0.3);
    r.visited[r.current] = true;
    if (r.unvisited() == 0) continue;
    const auto g = tsp_state_features(r);
    for (int i = 1; i < std::min(5, r.unvisited()); ++i) CHECK(g[3 * i + 2] >= g[3 * i - 1]);
  }
}

TEST_CASE("tsp expert rank") {
  // Node i sits at distance 0.1 * i to the right of node 0.
  std::vector<Point> coords;
  for (int i = 0; i < 10; ++i) coords.push_back({0.05 + 0.09 * i, 0.5});
  TspState s = TspState::initial(coords, 8);
  CHECK(tsp_expert_rank(s, 1).action == 0);
  CHECK(tsp_expert_rank(s, 3).action == 2);
  const auto far = tsp_expert_rank(s, 9);
  CHECK_FALSE(far.covered);
  CHECK_THROWS_AS(tsp_expert_rank(s, 0), DataError);
}

TEST_CASE("tsp env follows the oracle tour") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    TspEnv env(seed, 10, 10);
    auto ep = expert_episode(env, "tsp");
    CHECK(ep.length() == 9);
    CHECK(env.visit_order() == env.oracle().order);
    CHECK(ep.total_return() == doctest::Approx(-env.oracle().length).epsilon(1e-12));
    CHECK_NOTHROW(validate_episode(ep, env.spec().modality));
    check_replay(env, ep);
  }
}

TEST_CASE("tsp coverage with n=20, k=10") {
  TspCoverage total;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto c = tsp_coverage(TspEnv(seed, 20, 10));
    total.steps += c.steps;
    total.covered += c.covered;
  }
  CHECK(total.fraction() >= 0.99);
}

TEST_CASE("caption samples") {
  const auto a = gen_caption_sample(5), b = gen_caption_sample(5);
  CHECK(a.image == b.image);
  CHECK(a.caption == b.caption);

  std::set<std::string> singles;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = gen_caption_sample(seed);
    CHECK(is_template_caption(s.caption));
    if (s.items.size() == 1) singles.insert(s.caption);
    // Every pixel is white or the color of a shape covering it.
    for (int y = 0; y < kCaptionImageSize; ++y) {
      for (int x = 0; x < kCaptionImageSize; ++x) {
        const std::array<float, 3> px = {s.image.at(y, x, 0), s.image.at(y, x, 1),
                                         s.image.at(y, x, 2)};
        bool covered = false;
        for (const auto& it : s.items) {
          if (inside_shape(it, x + 0.5, y + 0.5)) {
            covered = true;
            CHECK(px == caption_rgb(it.color));
          }
        }
        if (!covered) CHECK(px == std::array<float, 3>{1, 1, 1});
      }
    }
  }
  CHECK(singles.size() == 9);
  CHECK_FALSE(is_template_caption("a red"));
  CHECK_FALSE(is_template_caption("a red circle "));
  CHECK(is_template_caption("a blue triangle and a green square"));
}

TEST_CASE("every suite: expert episodes validate and replay") {
  SuiteParams p;
  for (const auto& suite : suite_names()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto env = make_env(suite, seed, p);
      auto ep = expert_episode(*env, suite);
      CHECK(ep.seed == seed);
      CHECK_NOTHROW(validate_episode(ep, env->spec().modality));
      CHECK(ep.steps.size() <= static_cast<std::size_t>(env->spec().horizon));
      auto again = make_env(suite, seed, p);
      CHECK(expert_episode(*again, suite) == ep);
      check_replay(*env, ep);
      Rng rng(seed);
      auto rnd = run_episode(*env, [&](const Env& e) { return e.random_action(rng); }, suite);
      CHECK_NOTHROW(validate_episode(rnd, env->spec().modality));
    }
  }
  CHECK_THROWS_AS(make_env("atari", 0, p), ConfigError);
}
