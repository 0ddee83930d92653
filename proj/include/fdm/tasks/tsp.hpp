#pragma once

#include <array>
#include <vector>

#include "fdm/tasks/env.hpp"

namespace fdm {

using Point = std::array<double, 2>;

// Closed tour starting at node 0.
struct Tour {
  std::vector<int> order;
  double length = 0.0;
};

std::vector<Point> gen_tsp_instance(int n, Rng& rng);
double distance(const Point& a, const Point& b);
double tour_length(const std::vector<Point>& coords,
                   const std::vector<int>& order);
Tour nearest_neighbor_tour(const std::vector<Point>& coords);
// Nearest-neighbor construction refined by first-improvement 2-opt until no
// move shortens the tour.
Tour tsp_oracle(const std::vector<Point>& coords);

struct TspState {
  std::vector<Point> coords;
  int current = 0;
  std::vector<bool> visited;
  int k = 10;

  static TspState initial(std::vector<Point> coords, int k);
  int unvisited() const;
};

// Padding triple for missing neighbors: (0, 0, -1). Real distances are >= 0.
inline constexpr double kTspSentinelDistance = -1.0;

// Up to k nearest unvisited nodes, by distance then index.
std::vector<int> nearest_unvisited(const TspState& state);
// (dx, dy, dist) per neighbor in ascending distance, sentinel padded to 3k.
std::vector<double> tsp_state_features(const TspState& state);

struct RankChoice {
  int action = 0;
  bool covered = true;  // false when expert_next is not among the k nearest
};
RankChoice tsp_expert_rank(const TspState& state, int expert_next);

// Visits one unvisited city per step, chosen by rank among the k nearest
// (ranks past the available count clamp to the farthest). The reward is
// minus the edge length; the closing edge back to node 0 is paid on the last
// step, so the return is minus the tour length.
class TspEnv : public Env {
 public:
  TspEnv(std::uint64_t seed, int n, int k);
  TspEnv(std::vector<Point> coords, int k, std::uint64_t seed = 0);

  static EnvSpec make_spec(int n, int k);

  const std::vector<Point>& coords() const { return coords_; }
  const TspState& state() const { return state_; }
  const Tour& oracle() const { return oracle_; }
  std::vector<int> visit_order() const { return order_; }
  // Node the oracle tour visits next from the current state.
  int expert_next() const;

  ActionValue expert_action() const override;
  ActionValue random_action(Rng& rng) const override;
  std::unique_ptr<Env> clone() const override;

 protected:
  void do_reset() override;
  Observation do_observe() const override;
  StepResult do_step(const ActionValue& action) override;

 private:
  std::vector<Point> coords_;
  int k_ = 10;
  Tour oracle_;
  std::vector<int> tour_pos_;
  TspState state_;
  std::vector<int> order_;
};

struct TspCoverage {
  std::size_t steps = 0;
  std::size_t covered = 0;
  double fraction() const {
    return steps == 0 ? 1.0 : static_cast<double>(covered) / steps;
  }
};
// Coverage of the oracle's choices by the k-nearest action space, measured
// along the expert trajectory.
TspCoverage tsp_coverage(const TspEnv& env);

}  // namespace fdm
