#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "fdm/tasks/env.hpp"

namespace fdm {

// Sokoban on a walled size x size board (size <= 8). Instances are made by
// up to `pulls` random reverse pulls from a solved state; the expert follows distances
// from a breadth-first search over reverse moves rooted at every solved
// state.
class Sokoban : public Env {
 public:
  enum Action : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
  enum Cell : int {
    kFloor = 0,
    kWall = 1,
    kTarget = 2,
    kBox = 3,
    kBoxOnTarget = 4,
    kPlayer = 5,
    kPlayerOnTarget = 6,
  };

  struct State {
    std::uint64_t boxes = 0;  // bit per cell
    int player = 0;
    friend bool operator==(const State&, const State&) = default;
  };
  struct StateHash {
    std::size_t operator()(const State& s) const {
      return static_cast<std::size_t>(mix64(s.boxes ^ mix64(s.player)));
    }
  };

  Sokoban(std::uint64_t seed, int size, int boxes, int pulls, int horizon);
  // Explicit puzzle for tests; `targets` is a cell mask.
  Sokoban(int size, std::uint64_t targets, State start, int horizon,
          std::uint64_t seed = 0);

  static EnvSpec make_spec(int size, int horizon);

  int size() const { return size_; }
  std::uint64_t targets() const { return targets_; }
  State state() const { return state_; }
  State start() const { return start_; }
  bool solved(const State& s) const { return s.boxes == targets_; }
  bool is_wall(int cell) const;
  // Forward dynamics; blocked moves leave the state unchanged.
  State apply(State s, int action) const;
  // Length of the expert solution from the start state.
  int solution_length() const;
  // -1 when the solved set is unreachable from `s`.
  int distance(const State& s) const;

  ActionValue expert_action() const override;
  ActionValue random_action(Rng& rng) const override;
  std::unique_ptr<Env> clone() const override;

 protected:
  void do_reset() override { state_ = start_; }
  Observation do_observe() const override;
  StepResult do_step(const ActionValue& action) override;

 private:
  void solve_reverse();
  int step_offset(int action) const;

  int size_ = 0;
  std::uint64_t targets_ = 0;
  State start_;
  State state_;
  std::unordered_map<State, int, StateHash> dist_;
};

}  // namespace fdm
