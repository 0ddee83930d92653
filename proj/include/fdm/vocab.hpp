#pragma once

#include <cstdint>
#include <string_view>

namespace fdm {

using Token = std::uint32_t;

// Unified token space shared by every modality.
//
//   [0, 32000)       text; discrete values reuse [0, 1024)
//   [32000, 33024)   continuous bins
//   33024            padding (never produced by an encoder)
//   (33024, 33204)   allocated in the embedding table, never emitted
//   33204            observation/action separator
namespace vocab {

inline constexpr Token kTextBegin = 0;
inline constexpr Token kTextEnd = 32000;
inline constexpr Token kDiscreteBegin = 0;
inline constexpr Token kDiscreteEnd = 1024;
inline constexpr Token kContinuousBegin = 32000;
inline constexpr Token kContinuousEnd = 33024;
inline constexpr Token kPad = 33024;
inline constexpr Token kSeparator = 33204;
inline constexpr Token kTableSize = 33205;

inline constexpr int kContinuousBins =
    static_cast<int>(kContinuousEnd - kContinuousBegin);
inline constexpr double kMuLaw = 100.0;
inline constexpr double kMuLawMax = 256.0;

constexpr bool is_text(Token t) { return t < kTextEnd; }
constexpr bool is_discrete(Token t) { return t < kDiscreteEnd; }
constexpr bool is_continuous(Token t) {
  return t >= kContinuousBegin && t < kContinuousEnd;
}
// True for any id an encoder may emit.
constexpr bool is_emittable(Token t) {
  return is_text(t) || is_continuous(t) || t == kSeparator;
}

}  // namespace vocab

// Identity into [0, 1024). Throws RangeError naming `field`.
Token encode_discrete(std::int64_t value, std::string_view field = "value");
std::int64_t decode_discrete(Token token);

// mu-law companding followed by 1024 uniform bins.
double mu_law(double x);
double inverse_mu_law(double y);
Token encode_continuous(double x);
// Bin centre in companded space, mapped back through the inverse compander.
double decode_continuous(Token token);
// Inverse image [lo, hi] of a continuous bin in the raw value domain.
struct ValueInterval {
  double lo;
  double hi;
};
ValueInterval continuous_bin_interval(Token token);

}  // namespace fdm
