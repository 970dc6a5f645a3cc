#pragma once

#include <cmath>
#include <cstdint>

namespace acvg {

// Deterministic splittable generator (splitmix64 core). Every random choice in
// the project flows from one root seed, split hierarchically so that
// independent consumers (sequences, batches, evaluation seeds) never share a
// stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : origin_(seed), state_(mix(seed)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // Child generator independent of how many draws this one has made.
  Rng split(std::uint64_t stream) const {
    return Rng(mix(origin_ ^ mix(stream + 0x9E3779B97F4A7C15ull)));
  }

  double uniform() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; two fresh draws per call, no cached state.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  int uniform_int(int n) {  // [0, n)
    return n <= 1 ? 0 : static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t origin_;
  std::uint64_t state_;
};

}  // namespace acvg
