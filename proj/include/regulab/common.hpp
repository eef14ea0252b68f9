#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace regulab {

/// Base class for all regulab errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed expression or scenario text. `offset` is a byte offset into the
/// offending string (SIZE_MAX when not applicable).
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " (at byte " + std::to_string(offset) + ")"), offset(offset) {}
  std::size_t offset;
};

/// Evaluation failure: unbound variable, division by zero, non-finite result.
struct EvalError : Error {
  using Error::Error;
};

/// Inconsistent dimensions or invalid configuration values.
struct ValidationError : Error {
  using Error::Error;
};

/// A mathematical hypothesis required by a construction is violated
/// (non-resonance, stabilizability, detectability, ...). `condition` names
/// the failed hypothesis so front ends can report it.
struct HypothesisError : Error {
  HypothesisError(std::string condition, const std::string& msg)
      : Error(msg), condition(std::move(condition)) {}
  std::string condition;
};

/// Integration could not be completed up to the requested horizon.
struct SimulationError : Error {
  enum class Kind { finite_escape, nonfinite_state };
  SimulationError(Kind kind, double t_reached, const std::string& msg)
      : Error(msg), kind(kind), t_reached(t_reached) {}
  Kind kind;
  double t_reached;
};

/// SplitMix64: tiny counter-friendly PRNG. Every stochastic component in
/// regulab derives its stream from (master seed, sample index) so results
/// are independent of execution order and thread count.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Standard normal via Box-Muller (uses two uniforms per pair, caches one).
  double next_normal();

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Derives the seed of sample substream `index` from a master seed. Streams
/// for distinct indices are decorrelated by the SplitMix64 finalizer.
std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t index);

/// FNV-1a 64-bit hash of a byte string, printed as 16 hex digits. Used for
/// scenario digests.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace regulab
