#include "fdm/tasks/tsp.hpp"

#include <algorithm>
#include <cmath>

#include "fdm/vocab.hpp"

namespace fdm {

std::vector<Point> gen_tsp_instance(int n, Rng& rng) {
  if (n < 3) throw RangeError("tsp instances need at least 3 nodes");
  std::vector<Point> coords(n);
  for (auto& p : coords) {
    p[0] = rng.uniform();
    p[1] = rng.uniform();
  }
  return coords;
}

double distance(const Point& a, const Point& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

double tour_length(const std::vector<Point>& coords,
                   const std::vector<int>& order) {
  double len = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    len += distance(coords[order[i]], coords[order[(i + 1) % order.size()]]);
  }
  return len;
}

Tour nearest_neighbor_tour(const std::vector<Point>& coords) {
  const int n = static_cast<int>(coords.size());
  if (n < 3) throw RangeError("tsp instances need at least 3 nodes");
  std::vector<bool> seen(n, false);
  Tour tour;
  tour.order.push_back(0);
  seen[0] = true;
  for (int step = 1; step < n; ++step) {
    const Point& cur = coords[tour.order.back()];
    int best = -1;
    for (int j = 0; j < n; ++j) {
      if (!seen[j] && (best < 0 || distance(cur, coords[j]) < distance(cur, coords[best]))) {
        best = j;
      }
    }
    seen[best] = true;
    tour.order.push_back(best);
  }
  tour.length = tour_length(coords, tour.order);
  return tour;
}

Tour tsp_oracle(const std::vector<Point>& coords) {
  Tour tour = nearest_neighbor_tour(coords);
  auto& t = tour.order;
  const int n = static_cast<int>(t.size());
  auto d = [&](int a, int b) { return distance(coords[a], coords[b]); };
  for (bool improved = true; improved;) {
    improved = false;
    for (int i = 1; i < n - 1 && !improved; ++i) {
      for (int j = i + 1; j < n && !improved; ++j) {
        const int a = t[i - 1], b = t[i], c = t[j], e = t[(j + 1) % n];
        if (d(a, c) + d(b, e) - d(a, b) - d(c, e) < -1e-12) {
          std::reverse(t.begin() + i, t.begin() + j + 1);
          improved = true;
        }
      }
    }
  }
  tour.length = tour_length(coords, t);
  return tour;
}

TspState TspState::initial(std::vector<Point> coords, int k) {
  TspState s;
  s.visited.assign(coords.size(), false);
  s.visited[0] = true;
  s.coords = std::move(coords);
  s.k = k;
  return s;
}

int TspState::unvisited() const {
  return static_cast<int>(std::count(visited.begin(), visited.end(), false));
}

std::vector<int> nearest_unvisited(const TspState& s) {
  std::vector<std::pair<double, int>> cand;
  for (int j = 0; j < static_cast<int>(s.coords.size()); ++j) {
    if (!s.visited[j]) cand.emplace_back(distance(s.coords[s.current], s.coords[j]), j);
  }
  std::sort(cand.begin(), cand.end());
  std::vector<int> out;
  for (int i = 0; i < std::min<int>(s.k, static_cast<int>(cand.size())); ++i) {
    out.push_back(cand[i].second);
  }
  return out;
}

std::vector<double> tsp_state_features(const TspState& s) {
  const auto nbrs = nearest_unvisited(s);
  if (nbrs.empty()) throw DataError("tsp state is terminal: every node visited");
  std::vector<double> f;
  f.reserve(3 * s.k);
  const Point& c = s.coords[s.current];
  const auto clip = [](double v) {
    return std::clamp(v, -vocab::kMuLawMax, vocab::kMuLawMax);
  };
  for (int j : nbrs) {
    f.push_back(clip(s.coords[j][0] - c[0]));
    f.push_back(clip(s.coords[j][1] - c[1]));
    f.push_back(clip(distance(c, s.coords[j])));
  }
  while (f.size() < static_cast<std::size_t>(3 * s.k)) {
    f.insert(f.end(), {0.0, 0.0, kTspSentinelDistance});
  }
  return f;
}

RankChoice tsp_expert_rank(const TspState& s, int expert_next) {
  if (expert_next < 0 || expert_next >= static_cast<int>(s.coords.size()) ||
      s.visited[expert_next]) {
    throw DataError("expert's next node " + std::to_string(expert_next) +
                    " is not an unvisited node");
  }
  const auto nbrs = nearest_unvisited(s);
  auto it = std::find(nbrs.begin(), nbrs.end(), expert_next);
  if (it == nbrs.end()) return {0, false};
  return {static_cast<int>(it - nbrs.begin()), true};
}

EnvSpec TspEnv::make_spec(int n, int k) {
  EnvSpec spec;
  spec.modality.fields = {continuous_field("neighbors", {3 * k})};
  spec.modality.action = {Modality::kDiscrete, 1, k};
  spec.modality.normalize();
  spec.reward_min = -2.0 * std::sqrt(2.0);
  spec.reward_max = 0.0;
  spec.horizon = n - 1;
  return spec;
}

TspEnv::TspEnv(std::vector<Point> coords, int k, std::uint64_t seed)
    : Env(make_spec(static_cast<int>(coords.size()), k), seed),
      coords_(std::move(coords)),
      k_(k),
      oracle_(tsp_oracle(coords_)),
      tour_pos_(coords_.size()) {
  for (std::size_t i = 0; i < oracle_.order.size(); ++i) tour_pos_[oracle_.order[i]] = static_cast<int>(i);
  do_reset();
}

TspEnv::TspEnv(std::uint64_t seed, int n, int k)
    : TspEnv([&] {
        Rng rng(derive_seed(seed, 0x747370));
        return gen_tsp_instance(n, rng);
      }(), k, seed) {}

void TspEnv::do_reset() {
  state_ = TspState::initial(coords_, k_);
  order_ = {0};
}

int TspEnv::expert_next() const {
  const int n = static_cast<int>(coords_.size());
  for (int i = 1; i < n; ++i) {
    const int node = oracle_.order[(tour_pos_[state_.current] + i) % n];
    if (!state_.visited[node]) return node;
  }
  throw DataError("tsp state is terminal: every node visited");
}

Observation TspEnv::do_observe() const {
  return {{"neighbors", tsp_state_features(state_)}};
}

StepResult TspEnv::do_step(const ActionValue& action) {
  const auto nbrs = nearest_unvisited(state_);
  const auto rank = std::min<std::size_t>(
      static_cast<std::size_t>(std::get<std::vector<std::int64_t>>(action)[0]), nbrs.size() - 1);
  const int next = nbrs[rank];
  StepResult r;
  r.reward = -distance(coords_[state_.current], coords_[next]);
  state_.visited[next] = true;
  state_.current = next;
  order_.push_back(next);
  if (state_.unvisited() == 0) {
    r.reward -= distance(coords_[next], coords_[0]);
    r.done = true;
  }
  return r;
}

ActionValue TspEnv::expert_action() const {
  return std::vector<std::int64_t>{tsp_expert_rank(state_, expert_next()).action};
}

ActionValue TspEnv::random_action(Rng& rng) const {
  const int avail = std::min(k_, state_.unvisited());
  return std::vector<std::int64_t>{rng.uniform_int(0, avail - 1)};
}

std::unique_ptr<Env> TspEnv::clone() const { return std::make_unique<TspEnv>(*this); }

TspCoverage tsp_coverage(const TspEnv& env) {
  TspEnv e = env;
  e.reset();
  TspCoverage cov;
  while (!e.done()) {
    const RankChoice c = tsp_expert_rank(e.state(), e.expert_next());
    ++cov.steps;
    cov.covered += c.covered;
    e.step(std::vector<std::int64_t>{c.action});
  }
  return cov;
}

}  // namespace fdm
