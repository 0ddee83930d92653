#include "fdm/tasks/gridworld.hpp"

#include <algorithm>
#include <numeric>

namespace fdm {

namespace {

constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};
constexpr int kCombos = static_cast<int>(GridWorld::kColors.size() *
                                         GridWorld::kShapes.size());

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

EnvSpec GridWorld::make_spec(int size, int horizon) {
  EnvSpec spec;
  spec.modality.fields = {
      text_field("instruction"),
      discrete_field("grid", {size * size + 3}, std::max(kCombos + 1, size))};
  spec.modality.action = {Modality::kDiscrete, 1, 4};
  spec.modality.normalize();
  spec.horizon = horizon;
  return spec;
}

GridWorld::GridWorld(std::uint64_t seed, int size, int objects, int horizon)
    : Env(make_spec(size, horizon), seed), size_(size) {
  Rng rng(derive_seed(seed, 0x67726964));
  std::vector<int> combos(kCombos);
  std::iota(combos.begin(), combos.end(), 0);
  shuffle(combos, rng);
  std::vector<int> cells(size * size);
  std::iota(cells.begin(), cells.end(), 0);
  shuffle(cells, rng);
  for (int i = 0; i < objects; ++i) {
    const int c = combos[i];
    objects_.push_back({c / static_cast<int>(kShapes.size()),
                        c % static_cast<int>(kShapes.size()), cells[i] % size,
                        cells[i] / size});
  }
  start_ = {cells[objects] % size, cells[objects] / size,
            static_cast<int>(rng.uniform_int(0, 3))};
  target_ = static_cast<int>(rng.uniform_int(0, objects - 1));
  pose_ = start_;
  compute_distances();
}

GridWorld::GridWorld(int size, std::vector<Object> objects, int target,
                     Pose start, int horizon, std::uint64_t seed)
    : Env(make_spec(size, horizon), seed),
      size_(size),
      objects_(std::move(objects)),
      target_(target),
      start_(start),
      pose_(start) {
  if (target_ < 0 || target_ >= static_cast<int>(objects_.size())) {
    throw RangeError("target object out of range");
  }
  compute_distances();
}

GridWorld::Pose GridWorld::move(Pose p, int action, int size) {
  switch (action) {
    case kLeft:
      p.dir = (p.dir + 3) % 4;
      break;
    case kRight:
      p.dir = (p.dir + 1) % 4;
      break;
    case kForward: {
      const int x = p.x + kDx[p.dir], y = p.y + kDy[p.dir];
      if (x >= 0 && y >= 0 && x < size && y < size) {
        p.x = x;
        p.y = y;
      }
      break;
    }
    default:
      break;
  }
  return p;
}

void GridWorld::compute_distances() {
  const int n = size_ * size_ * 4;
  dist_.assign(n, -1);
  const Object& t = target();
  for (int d = 0; d < 4; ++d) dist_[state_id({t.x, t.y, d})] = 0;
  // Relax until stable; the state space is tiny.
  for (bool changed = true; changed;) {
    changed = false;
    for (int y = 0; y < size_; ++y) {
      for (int x = 0; x < size_; ++x) {
        for (int d = 0; d < 4; ++d) {
          const Pose p{x, y, d};
          for (int a = kLeft; a <= kForward; ++a) {
            const int nd = dist_[state_id(move(p, a, size_))];
            int& cur = dist_[state_id(p)];
            if (nd >= 0 && (cur < 0 || nd + 1 < cur)) {
              cur = nd + 1;
              changed = true;
            }
          }
        }
      }
    }
  }
}

std::string GridWorld::instruction() const {
  const Object& t = target();
  return std::string("go to the ") + kColors[t.color] + " " + kShapes[t.shape];
}

Observation GridWorld::do_observe() const {
  std::vector<std::int64_t> grid(size_ * size_ + 3, 0);
  for (const auto& o : objects_) {
    grid[o.y * size_ + o.x] = 1 + o.color * static_cast<int>(kShapes.size()) + o.shape;
  }
  grid[size_ * size_] = pose_.x;
  grid[size_ * size_ + 1] = pose_.y;
  grid[size_ * size_ + 2] = pose_.dir;
  return {{"grid", std::move(grid)}, {"instruction", instruction()}};
}

StepResult GridWorld::do_step(const ActionValue& action) {
  const auto a = static_cast<int>(std::get<std::vector<std::int64_t>>(action)[0]);
  if (a == kDone) {
    const bool ok = pose_.x == target().x && pose_.y == target().y;
    return {ok ? 1.0 : 0.0, true};
  }
  pose_ = move(pose_, a, size_);
  return {0.0, false};
}

ActionValue GridWorld::expert_action() const {
  const int d = dist_[state_id(pose_)];
  if (d == 0) return std::vector<std::int64_t>{kDone};
  for (int a = kLeft; a <= kForward; ++a) {
    if (dist_[state_id(move(pose_, a, size_))] == d - 1) {
      return std::vector<std::int64_t>{a};
    }
  }
  throw DataError("gridworld expert found no path");
}

ActionValue GridWorld::random_action(Rng& rng) const {
  return std::vector<std::int64_t>{rng.uniform_int(0, 3)};
}

std::unique_ptr<Env> GridWorld::clone() const {
  return std::make_unique<GridWorld>(*this);
}

}  // namespace fdm
