#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fdm {

// Error taxonomy. The CLI maps these onto exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ValueError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

enum class FormatFault { kBadMagic, kTruncated, kVersionMismatch, kCorrupt };

// Raised by binary readers. Carries the byte offset where decoding failed.
class FormatError : public DataError {
 public:
  FormatError(FormatFault fault, std::uint64_t offset, const std::string& what);

  FormatFault fault() const { return fault_; }
  std::uint64_t offset() const { return offset_; }

 private:
  FormatFault fault_;
  std::uint64_t offset_;
};

std::string_view to_string(FormatFault fault);

// splitmix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                    std::uint64_t b = 0) {
  return mix64(mix64(seed ^ mix64(a)) + b);
}

// Small deterministic generator (xoshiro256**). Distributions are implemented
// here rather than through <random> so streams are identical across standard
// libraries; checkpoints persist the raw state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed);
  std::uint64_t next();

  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  struct State {
    std::uint64_t s[4];
  };
  State state() const;
  void set_state(const State& st);

 private:
  std::uint64_t s_[4];
};

// FNV-1a 64 over raw bytes; content hashes for cache no-op detection.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace fdm
