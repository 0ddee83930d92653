#pragma once

#include <array>
#include <string>
#include <vector>

#include "fdm/tasks/env.hpp"

namespace fdm {

inline constexpr int kCaptionImageSize = 32;
inline constexpr std::array<const char*, 3> kCaptionShapes = {"circle", "square",
                                                              "triangle"};
inline constexpr std::array<const char*, 3> kCaptionColors = {"red", "green",
                                                              "blue"};

struct ShapeItem {
  int shape = 0;
  int color = 0;
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
};

struct CaptionSample {
  Image image;
  std::string caption;
  std::vector<ShapeItem> items;  // left to right
};

std::array<float, 3> caption_rgb(int color);
std::string caption_text(const std::vector<ShapeItem>& items);
bool inside_shape(const ShapeItem& item, double x, double y);
CaptionSample render_caption_sample(const std::vector<ShapeItem>& items);
// One or two shapes on a white 32x32 field, deterministic per seed.
CaptionSample gen_caption_sample(std::uint64_t seed);
// The 9 single-shape and 81 two-shape captions.
std::vector<std::string> template_captions();
// True for "a <color> <shape>" optionally followed by " and a <color> <shape>".
bool is_template_caption(const std::string& text);

// Single-step episode: observe the image, answer with a caption. Reward 1
// on an exact match.
class CaptionEnv : public Env {
 public:
  CaptionEnv(std::uint64_t seed, int slots);

  static EnvSpec make_spec(int slots);
  const CaptionSample& sample() const { return sample_; }

  ActionValue expert_action() const override;
  ActionValue random_action(Rng& rng) const override;
  std::unique_ptr<Env> clone() const override;

 protected:
  void do_reset() override {}
  Observation do_observe() const override;
  StepResult do_step(const ActionValue& action) override;

 private:
  CaptionSample sample_;
};

}  // namespace fdm
