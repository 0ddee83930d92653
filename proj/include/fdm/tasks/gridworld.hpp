#pragma once

#include <array>
#include <string>
#include <vector>

#include "fdm/tasks/env.hpp"

namespace fdm {

// Open size x size room with distinct colored objects. The instruction names
// one of them; the episode succeeds when the agent stands on it and says
// "done". Directions: 0 east, 1 south, 2 west, 3 north.
class GridWorld : public Env {
 public:
  enum Action : int { kLeft = 0, kRight = 1, kForward = 2, kDone = 3 };

  static constexpr std::array<const char*, 4> kColors = {"red", "green", "blue",
                                                         "yellow"};
  static constexpr std::array<const char*, 3> kShapes = {"ball", "box", "key"};

  struct Object {
    int color = 0;
    int shape = 0;
    int x = 0;
    int y = 0;
  };
  struct Pose {
    int x = 0;
    int y = 0;
    int dir = 0;
    friend bool operator==(const Pose&, const Pose&) = default;
  };

  GridWorld(std::uint64_t seed, int size, int objects, int horizon);
  GridWorld(int size, std::vector<Object> objects, int target, Pose start,
            int horizon, std::uint64_t seed = 0);

  static EnvSpec make_spec(int size, int horizon);
  // Pose after a movement action; walking into the outer wall is a no-op.
  static Pose move(Pose p, int action, int size);

  int size() const { return size_; }
  const std::vector<Object>& objects() const { return objects_; }
  const Object& target() const { return objects_[target_]; }
  Pose pose() const { return pose_; }
  std::string instruction() const;

  ActionValue expert_action() const override;
  ActionValue random_action(Rng& rng) const override;
  std::unique_ptr<Env> clone() const override;

 protected:
  void do_reset() override { pose_ = start_; }
  Observation do_observe() const override;
  StepResult do_step(const ActionValue& action) override;

 private:
  void compute_distances();
  int state_id(Pose p) const { return (p.y * size_ + p.x) * 4 + p.dir; }

  int size_ = 0;
  std::vector<Object> objects_;
  int target_ = 0;
  Pose start_;
  Pose pose_;
  std::vector<int> dist_;  // movement steps to the target cell, per pose
};

}  // namespace fdm
