#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace opposd {

using VecD = std::vector<double>;

// Bad user input: config files, CLI arguments, malformed data files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or truncated data artifacts (datasets, checkpoints).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values, degenerate normalizers, failed solves.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw NumericError(std::string("non-finite value in ") + what);
  }
}

bool all_finite(std::span<const double> xs);

// Shortest round-trip decimal form of a double. Deterministic and
// locale-independent; used for every real written to a text artifact.
std::string format_double(double x);

// Deterministic RNG used everywhere. Wraps mt19937_64 but derives all
// variates from raw 64-bit draws so results do not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Independent stream keyed by (seed, label). Mixing is splitmix64 over
  // the seed and a FNV-1a hash of the label.
  static Rng derive(std::uint64_t seed, std::string_view label);

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n);

  // Standard normal via Box-Muller (single value, no cached state).
  double normal();

  // Index sampled proportionally to probs (assumed to sum to ~1).
  int categorical(std::span<const double> probs);

  std::string save_state() const;
  void restore_state(const std::string& state);

 private:
  std::mt19937_64 eng_;
};

}  // namespace opposd
