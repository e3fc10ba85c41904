#include "swarm/common.hpp"

#include <cstdio>
#include <sstream>

namespace swarm {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_parameter: return "invalid-parameter";
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::unknown_agent: return "unknown-agent";
    case ErrorCode::duplicate_agent: return "duplicate-agent";
    case ErrorCode::invalid_subtask: return "invalid-subtask";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::empty_batch: return "empty-batch";
    case ErrorCode::missing_budget: return "missing-budget";
    case ErrorCode::stale_token: return "stale-token";
    case ErrorCode::missing_snapshot: return "missing-snapshot";
    case ErrorCode::missing_data: return "missing-data";
    case ErrorCode::config_error: return "config-error";
    case ErrorCode::parse_error: return "parse-error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(base);
  for (auto p : parts) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::invalid_parameter, "Rng::below(0)");
  // rejection sampling keeps the draw unbiased
  const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

bool Rng::bernoulli(double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return uniform() < p;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (is.fail()) throw Error(ErrorCode::parse_error, "bad rng state");
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace swarm
