#include "fdm/tasks/caption.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fdm {

std::array<float, 3> caption_rgb(int color) {
  std::array<float, 3> rgb = {0.0f, 0.0f, 0.0f};
  rgb.at(static_cast<std::size_t>(color)) = 1.0f;
  return rgb;
}

std::string caption_text(const std::vector<ShapeItem>& items) {
  std::string out;
  for (const auto& it : items) {
    if (!out.empty()) out += " and ";
    out += std::string("a ") + kCaptionColors[it.color] + " " + kCaptionShapes[it.shape];
  }
  return out;
}

bool inside_shape(const ShapeItem& it, double x, double y) {
  const double dx = x - it.cx, dy = y - it.cy, r = it.radius;
  switch (it.shape) {
    case 0:
      return dx * dx + dy * dy <= r * r;
    case 1:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    default:
      return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0;
  }
}

CaptionSample render_caption_sample(const std::vector<ShapeItem>& items) {
  CaptionSample s;
  s.items = items;
  s.caption = caption_text(items);
  s.image = Image(kCaptionImageSize, kCaptionImageSize, 3, 1.0f);
  for (const auto& it : items) {
    const auto rgb = caption_rgb(it.color);
    for (int y = 0; y < kCaptionImageSize; ++y) {
      for (int x = 0; x < kCaptionImageSize; ++x) {
        if (!inside_shape(it, x + 0.5, y + 0.5)) continue;
        for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = rgb[c];
      }
    }
  }
  return s;
}

CaptionSample gen_caption_sample(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x63617074));
  const int count = rng.bernoulli(0.5) ? 2 : 1;
  const double width = static_cast<double>(kCaptionImageSize) / count;
  std::vector<ShapeItem> items;
  for (int i = 0; i < count; ++i) {
    ShapeItem it;
    it.shape = static_cast<int>(rng.uniform_int(0, 2));
    it.color = static_cast<int>(rng.uniform_int(0, 2));
    it.radius = count == 1 ? 4.0 + 4.0 * rng.uniform() : 3.5 + 2.5 * rng.uniform();
    const double lo = i * width + it.radius + 0.5;
    const double hi = (i + 1) * width - it.radius - 0.5;
    it.cx = lo + (hi - lo) * rng.uniform();
    it.cy = it.radius + 1.0 + (kCaptionImageSize - 2.0 * it.radius - 2.0) * rng.uniform();
    items.push_back(it);
  }
  return render_caption_sample(items);
}

std::vector<std::string> template_captions() {
  std::vector<std::string> out;
  for (int a = 0; a < 9; ++a) {
    const ShapeItem first{a % 3, a / 3};
    out.push_back(caption_text({first}));
    for (int b = 0; b < 9; ++b) out.push_back(caption_text({first, ShapeItem{b % 3, b / 3}}));
  }
  return out;
}

bool is_template_caption(const std::string& text) {
  static const std::set<std::string> valid = [] {
    const auto all = template_captions();
    return std::set<std::string>(all.begin(), all.end());
  }();
  return valid.count(text) != 0;
}

EnvSpec CaptionEnv::make_spec(int slots) {
  EnvSpec spec;
  spec.modality.fields = {image_field("image", kCaptionImageSize, kCaptionImageSize, 3)};
  spec.modality.action = {Modality::kText, slots, 0};
  spec.modality.normalize();
  spec.horizon = 1;
  return spec;
}

CaptionEnv::CaptionEnv(std::uint64_t seed, int slots)
    : Env(make_spec(slots), seed), sample_(gen_caption_sample(seed)) {}

Observation CaptionEnv::do_observe() const { return {{"image", sample_.image}}; }

StepResult CaptionEnv::do_step(const ActionValue& action) {
  return {std::get<std::string>(action) == sample_.caption ? 1.0 : 0.0, true};
}

ActionValue CaptionEnv::expert_action() const { return sample_.caption; }

ActionValue CaptionEnv::random_action(Rng& rng) const {
  std::vector<ShapeItem> items(rng.bernoulli(0.5) ? 2 : 1);
  for (auto& it : items) {
    it.shape = static_cast<int>(rng.uniform_int(0, 2));
    it.color = static_cast<int>(rng.uniform_int(0, 2));
  }
  return caption_text(items);
}

std::unique_ptr<Env> CaptionEnv::clone() const {
  return std::make_unique<CaptionEnv>(*this);
}

}  // namespace fdm
