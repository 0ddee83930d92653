#include "fdm/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fdm/common.hpp"

namespace fdm {

Token encode_discrete(std::int64_t value, std::string_view field) {
  if (value < 0 || value >= static_cast<std::int64_t>(vocab::kDiscreteEnd)) {
    throw RangeError("discrete value " + std::to_string(value) +
                     " out of [0, 1024) in field '" + std::string(field) + "'");
  }
  return static_cast<Token>(value);
}

std::int64_t decode_discrete(Token token) {
  if (!vocab::is_discrete(token)) {
    throw RangeError("token " + std::to_string(token) +
                     " is not a discrete token");
  }
  return static_cast<std::int64_t>(token);
}

namespace {
const double kLogDenom = std::log1p(vocab::kMuLaw * vocab::kMuLawMax);
}

double mu_law(double x) {
  const double y = std::log1p(vocab::kMuLaw * std::abs(x)) / kLogDenom;
  return std::copysign(y, x);
}

double inverse_mu_law(double y) {
  const double x = std::expm1(std::abs(y) * kLogDenom) / vocab::kMuLaw;
  return std::copysign(x, y);
}

Token encode_continuous(double x) {
  if (!std::isfinite(x)) {
    throw ValueError("continuous value is not finite");
  }
  const double c = std::clamp(mu_law(x), -1.0, 1.0);
  auto bin = static_cast<std::int64_t>(
      std::floor((c + 1.0) / 2.0 * vocab::kContinuousBins));
  bin = std::clamp<std::int64_t>(bin, 0, vocab::kContinuousBins - 1);
  return vocab::kContinuousBegin + static_cast<Token>(bin);
}

double decode_continuous(Token token) {
  if (!vocab::is_continuous(token)) {
    throw RangeError("token " + std::to_string(token) +
                     " is not a continuous token");
  }
  const double bin = token - vocab::kContinuousBegin;
  const double centre = (bin + 0.5) / vocab::kContinuousBins * 2.0 - 1.0;
  return inverse_mu_law(centre);
}

ValueInterval continuous_bin_interval(Token token) {
  if (!vocab::is_continuous(token)) {
    throw RangeError("token " + std::to_string(token) +
                     " is not a continuous token");
  }
  const double bin = token - vocab::kContinuousBegin;
  const double lo = bin / vocab::kContinuousBins * 2.0 - 1.0;
  const double hi = (bin + 1.0) / vocab::kContinuousBins * 2.0 - 1.0;
  return {inverse_mu_law(lo), inverse_mu_law(hi)};
}

}  // namespace fdm
