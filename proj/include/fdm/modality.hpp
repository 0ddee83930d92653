#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fdm/patches.hpp"

namespace fdm {

enum class Modality : std::uint8_t {
  kText = 0,
  kImage = 1,
  kDiscrete = 2,
  kContinuous = 3,
};

std::string_view to_string(Modality m);

struct FieldSpec {
  std::string name;
  Modality kind = Modality::kDiscrete;
  // image: {h, w, c}; discrete/continuous: tensor dims; text: empty.
  std::vector<int> shape;
  int cardinality = 0;      // discrete only
  bool supervised = false;  // text only: tokens enter the loss

  std::size_t element_count() const;
  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

// Every action slot shares one modality. Text actions are `count` text
// tokens padded with id 0.
struct ActionSpec {
  Modality kind = Modality::kDiscrete;
  int count = 0;
  int cardinality = 0;  // discrete only

  friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

struct ModalitySpec {
  std::vector<FieldSpec> fields;  // sorted by name
  ActionSpec action;

  // Sorts fields and checks the spec is well formed; throws SpecError.
  void normalize();
  const FieldSpec* find(std::string_view name) const;
  friend bool operator==(const ModalitySpec&, const ModalitySpec&) = default;
};

FieldSpec text_field(std::string name, bool supervised = false);
FieldSpec image_field(std::string name, int h, int w, int c);
FieldSpec discrete_field(std::string name, std::vector<int> shape,
                         int cardinality);
FieldSpec continuous_field(std::string name, std::vector<int> shape);

using FieldValue = std::variant<std::string, Image, std::vector<std::int64_t>,
                                std::vector<double>>;
// Keys are kept in lexicographic order; nested structures use dotted keys.
using Observation = std::map<std::string, FieldValue>;
using ActionValue =
    std::variant<std::vector<std::int64_t>, std::vector<double>, std::string>;

struct Timestep {
  Observation observation;
  std::optional<ActionValue> action;
  double reward = 0.0;

  friend bool operator==(const Timestep&, const Timestep&) = default;
};

struct Episode {
  std::string task_id;
  std::uint64_t seed = 0;  // environment instance that produced it
  std::vector<Timestep> steps;

  double total_return() const;
  std::size_t length() const { return steps.size(); }
  friend bool operator==(const Episode&, const Episode&) = default;
};

// Throws SpecError for unknown/missing/ill-shaped fields and RangeError for
// discrete values outside the declared cardinality.
void validate_observation(const Observation& obs, const ModalitySpec& spec);
void validate_action(const ActionValue& action, const ActionSpec& spec);
void validate_episode(const Episode& episode, const ModalitySpec& spec);

}  // namespace fdm
