#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace swarm {

enum class ErrorCode {
  invalid_parameter,
  invalid_spec,
  precondition,
  unknown_agent,
  duplicate_agent,
  invalid_subtask,
  dimension_mismatch,
  empty_batch,
  missing_budget,
  stale_token,
  missing_snapshot,
  missing_data,
  config_error,
  parse_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives a child seed from a base seed and an ordered list of labels.
/// Used everywhere randomness must be replayable independent of scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

/// Stable 64-bit FNV-1a over bytes.
std::uint64_t fnv1a(std::string_view bytes);

/// Seeded generator with portable derived draws. The standard distributions
/// are implementation-defined, so draws are computed from raw engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

std::string hex64(std::uint64_t v);

}  // namespace swarm
