#include "fdm/modality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fdm/common.hpp"
#include "fdm/vocab.hpp"

namespace fdm {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kText:
      return "text";
    case Modality::kImage:
      return "image";
    case Modality::kDiscrete:
      return "discrete";
    case Modality::kContinuous:
      return "continuous";
  }
  return "?";
}

std::size_t FieldSpec::element_count() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * b; });
}

void ModalitySpec::normalize() {
  std::sort(fields.begin(), fields.end(),
            [](const FieldSpec& a, const FieldSpec& b) { return a.name < b.name; });
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto& f = fields[i];
    if (f.name.empty()) throw SpecError("field with empty name");
    if (i > 0 && fields[i - 1].name == f.name) {
      throw SpecError("duplicate field '" + f.name + "'");
    }
    switch (f.kind) {
      case Modality::kImage:
        if (f.shape.size() != 3 || f.shape[0] <= 0 || f.shape[1] <= 0 ||
            f.shape[2] <= 0 || f.shape[0] % kPatchSize != 0 ||
            f.shape[1] % kPatchSize != 0) {
          throw SpecError("image field '" + f.name +
                          "' needs h, w multiples of 16 and c > 0");
        }
        break;
      case Modality::kDiscrete:
        if (f.cardinality <= 0 ||
            f.cardinality > static_cast<int>(vocab::kDiscreteEnd)) {
          throw SpecError("discrete field '" + f.name +
                          "' cardinality must be in [1, 1024]");
        }
        [[fallthrough]];
      case Modality::kContinuous:
        if (f.shape.empty() ||
            std::any_of(f.shape.begin(), f.shape.end(),
                        [](int d) { return d <= 0; })) {
          throw SpecError("tensor field '" + f.name + "' has an empty shape");
        }
        break;
      case Modality::kText:
        break;
    }
  }
  if (action.count < 0) throw SpecError("negative action count");
  if (action.kind == Modality::kImage) {
    throw SpecError("image actions are not supported");
  }
  if (action.kind == Modality::kDiscrete && action.count > 0 &&
      (action.cardinality <= 0 ||
       action.cardinality > static_cast<int>(vocab::kDiscreteEnd))) {
    throw SpecError("discrete action cardinality must be in [1, 1024]");
  }
}

const FieldSpec* ModalitySpec::find(std::string_view name) const {
  auto it = std::lower_bound(
      fields.begin(), fields.end(), name,
      [](const FieldSpec& f, std::string_view n) { return f.name < n; });
  return it != fields.end() && it->name == name ? &*it : nullptr;
}

FieldSpec text_field(std::string name, bool supervised) {
  return {std::move(name), Modality::kText, {}, 0, supervised};
}

FieldSpec image_field(std::string name, int h, int w, int c) {
  return {std::move(name), Modality::kImage, {h, w, c}, 0, false};
}

FieldSpec discrete_field(std::string name, std::vector<int> shape,
                         int cardinality) {
  return {std::move(name), Modality::kDiscrete, std::move(shape), cardinality,
          false};
}

FieldSpec continuous_field(std::string name, std::vector<int> shape) {
  return {std::move(name), Modality::kContinuous, std::move(shape), 0, false};
}

double Episode::total_return() const {
  double r = 0.0;
  for (const auto& s : steps) r += s.reward;
  return r;
}

void validate_observation(const Observation& obs, const ModalitySpec& spec) {
  for (const auto& [name, value] : obs) {
    if (spec.find(name) == nullptr) {
      throw SpecError("unknown observation field '" + name + "'");
    }
  }
  for (const auto& f : spec.fields) {
    auto it = obs.find(f.name);
    if (it == obs.end()) {
      throw SpecError("missing observation field '" + f.name + "'");
    }
    const FieldValue& v = it->second;
    switch (f.kind) {
      case Modality::kText:
        if (!std::holds_alternative<std::string>(v)) {
          throw SpecError("field '" + f.name + "' expects text");
        }
        break;
      case Modality::kImage: {
        const auto* img = std::get_if<Image>(&v);
        if (img == nullptr || img->height != f.shape[0] ||
            img->width != f.shape[1] || img->channels != f.shape[2] ||
            img->pixels.size() != f.element_count()) {
          throw SpecError("field '" + f.name + "' expects an image of shape " +
                          std::to_string(f.shape[0]) + "x" +
                          std::to_string(f.shape[1]) + "x" +
                          std::to_string(f.shape[2]));
        }
        break;
      }
      case Modality::kDiscrete: {
        const auto* d = std::get_if<std::vector<std::int64_t>>(&v);
        if (d == nullptr || d->size() != f.element_count()) {
          throw SpecError("field '" + f.name + "' expects " +
                          std::to_string(f.element_count()) +
                          " discrete values");
        }
        for (auto x : *d) {
          if (x < 0 || x >= f.cardinality) {
            throw RangeError("discrete value " + std::to_string(x) +
                             " out of [0, " + std::to_string(f.cardinality) +
                             ") in field '" + f.name + "'");
          }
        }
        break;
      }
      case Modality::kContinuous: {
        const auto* c = std::get_if<std::vector<double>>(&v);
        if (c == nullptr || c->size() != f.element_count()) {
          throw SpecError("field '" + f.name + "' expects " +
                          std::to_string(f.element_count()) +
                          " continuous values");
        }
        for (double x : *c) {
          if (!std::isfinite(x)) {
            throw ValueError("non-finite value in field '" + f.name + "'");
          }
        }
        break;
      }
    }
  }
}

void validate_action(const ActionValue& action, const ActionSpec& spec) {
  const auto count = static_cast<std::size_t>(spec.count);
  switch (spec.kind) {
    case Modality::kDiscrete: {
      const auto* d = std::get_if<std::vector<std::int64_t>>(&action);
      if (d == nullptr || d->size() != count) {
        throw SpecError("action expects " + std::to_string(count) +
                        " discrete values");
      }
      for (auto x : *d) {
        if (x < 0 || x >= spec.cardinality) {
          throw RangeError("action value " + std::to_string(x) +
                           " out of [0, " + std::to_string(spec.cardinality) +
                           ")");
        }
      }
      break;
    }
    case Modality::kContinuous: {
      const auto* c = std::get_if<std::vector<double>>(&action);
      if (c == nullptr || c->size() != count) {
        throw SpecError("action expects " + std::to_string(count) +
                        " continuous values");
      }
      for (double x : *c) {
        if (!std::isfinite(x)) throw ValueError("non-finite action value");
      }
      break;
    }
    case Modality::kText:
      if (!std::holds_alternative<std::string>(action)) {
        throw SpecError("action expects text");
      }
      break;
    case Modality::kImage:
      throw SpecError("image actions are not supported");
  }
}

void validate_episode(const Episode& episode, const ModalitySpec& spec) {
  if (episode.steps.empty()) throw DataError("episode has no timesteps");
  for (std::size_t t = 0; t < episode.steps.size(); ++t) {
    const auto& step = episode.steps[t];
    try {
      validate_observation(step.observation, spec);
      if (step.action) {
        if (spec.action.count == 0) throw SpecError("task declares no action");
        validate_action(*step.action, spec.action);
      }
      if (!std::isfinite(step.reward)) throw ValueError("non-finite reward");
    } catch (const Error& e) {
      throw DataError("timestep " + std::to_string(t) + ": " + e.what());
    }
  }
}

}  // namespace fdm
