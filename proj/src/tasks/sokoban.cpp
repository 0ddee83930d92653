#include "fdm/tasks/sokoban.hpp"

#include <deque>

namespace fdm {

namespace {

bool has(std::uint64_t mask, int cell) { return (mask >> cell) & 1u; }
std::uint64_t bit(int cell) { return std::uint64_t{1} << cell; }

}  // namespace

EnvSpec Sokoban::make_spec(int size, int horizon) {
  EnvSpec spec;
  spec.modality.fields = {discrete_field("grid", {size * size}, 7)};
  spec.modality.action = {Modality::kDiscrete, 1, 4};
  spec.modality.normalize();
  spec.horizon = horizon;
  return spec;
}

Sokoban::Sokoban(std::uint64_t seed, int size, int boxes, int pulls, int horizon)
    : Env(make_spec(size, horizon), seed), size_(size) {
  Rng rng(derive_seed(seed, 0x736f6b6f));
  std::vector<int> floor;
  for (int c = 0; c < size * size; ++c) {
    if (!is_wall(c)) floor.push_back(c);
  }
  const auto pick = [&] {
    return floor[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(floor.size()) - 1))];
  };
  for (int attempt = 0;; ++attempt) {
    if (attempt == 10000) throw DataError("sokoban generation did not converge");
    targets_ = 0;
    while (std::popcount(targets_) < boxes) targets_ |= bit(pick());
    State s{targets_, pick()};
    while (has(s.boxes, s.player)) s.player = pick();

    int done = 0;
    for (int it = 0; it < 200 * pulls && done < pulls; ++it) {
      const int o = step_offset(static_cast<int>(rng.uniform_int(0, 3)));
      const int next = s.player + o;
      if (is_wall(next) || has(s.boxes, next)) continue;
      const int behind = s.player - o;
      if (has(s.boxes, behind)) {
        s.boxes = (s.boxes & ~bit(behind)) | bit(s.player);
        ++done;
      }
      s.player = next;
    }
    // Small boards can run out of pullable positions; any pull will do.
    if (done == 0) continue;
    start_ = state_ = s;
    solve_reverse();
    const int d = distance(start_);
    if (d > 0 && d < horizon) break;
  }
}

Sokoban::Sokoban(int size, std::uint64_t targets, State start, int horizon,
                 std::uint64_t seed)
    : Env(make_spec(size, horizon), seed),
      size_(size),
      targets_(targets),
      start_(start),
      state_(start) {
  if (size < 3 || size > 8) throw RangeError("sokoban size must be in [3, 8]");
  if (std::popcount(targets) != std::popcount(start.boxes)) {
    throw SpecError("box and target counts differ");
  }
  solve_reverse();
}

bool Sokoban::is_wall(int cell) const {
  const int r = cell / size_, c = cell % size_;
  return r == 0 || c == 0 || r == size_ - 1 || c == size_ - 1;
}

int Sokoban::step_offset(int action) const {
  switch (action) {
    case kUp:
      return -size_;
    case kDown:
      return size_;
    case kLeft:
      return -1;
    default:
      return 1;
  }
}

Sokoban::State Sokoban::apply(State s, int action) const {
  const int o = step_offset(action);
  const int p = s.player + o;
  if (is_wall(p)) return s;
  if (has(s.boxes, p)) {
    const int q = p + o;
    if (is_wall(q) || has(s.boxes, q)) return s;
    s.boxes = (s.boxes & ~bit(p)) | bit(q);
  }
  s.player = p;
  return s;
}

void Sokoban::solve_reverse() {
  dist_.clear();
  std::deque<State> queue;
  for (int c = 0; c < size_ * size_; ++c) {
    if (is_wall(c) || has(targets_, c)) continue;
    const State s{targets_, c};
    dist_.emplace(s, 0);
    queue.push_back(s);
  }
  // Predecessors of s: the player steps back to a free neighbor, optionally
  // pulling the box on its other side.
  while (!queue.empty()) {
    const State s = queue.front();
    queue.pop_front();
    const int d = dist_.at(s);
    for (int a = 0; a < 4; ++a) {
      const int o = step_offset(a);
      const int back = s.player + o;
      if (is_wall(back) || has(s.boxes, back)) continue;
      const State walk{s.boxes, back};
      if (dist_.emplace(walk, d + 1).second) queue.push_back(walk);
      const int front = s.player - o;
      if (has(s.boxes, front)) {
        const State pull{(s.boxes & ~bit(front)) | bit(s.player), back};
        if (dist_.emplace(pull, d + 1).second) queue.push_back(pull);
      }
    }
  }
}

int Sokoban::distance(const State& s) const {
  auto it = dist_.find(s);
  return it == dist_.end() ? -1 : it->second;
}

int Sokoban::solution_length() const { return distance(start_); }

Observation Sokoban::do_observe() const {
  std::vector<std::int64_t> grid(size_ * size_);
  for (int c = 0; c < size_ * size_; ++c) {
    const bool t = has(targets_, c);
    if (is_wall(c)) {
      grid[c] = kWall;
    } else if (has(state_.boxes, c)) {
      grid[c] = t ? kBoxOnTarget : kBox;
    } else if (c == state_.player) {
      grid[c] = t ? kPlayerOnTarget : kPlayer;
    } else {
      grid[c] = t ? kTarget : kFloor;
    }
  }
  return {{"grid", std::move(grid)}};
}

StepResult Sokoban::do_step(const ActionValue& action) {
  state_ = apply(state_, static_cast<int>(std::get<std::vector<std::int64_t>>(action)[0]));
  if (solved(state_)) return {1.0, true};
  return {0.0, false};
}

ActionValue Sokoban::expert_action() const {
  const int d = distance(state_);
  if (d > 0) {
    for (int a = 0; a < 4; ++a) {
      if (distance(apply(state_, a)) == d - 1) return std::vector<std::int64_t>{a};
    }
  }
  // Dead or solved position: any action is as good as another.
  return std::vector<std::int64_t>{kUp};
}

ActionValue Sokoban::random_action(Rng& rng) const {
  return std::vector<std::int64_t>{rng.uniform_int(0, 3)};
}

std::unique_ptr<Env> Sokoban::clone() const {
  return std::make_unique<Sokoban>(*this);
}

}  // namespace fdm
