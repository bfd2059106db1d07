#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pmri {

using cplx = std::complex<double>;

/// Error raised by file and stream operations.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Error raised by configuration parsing and validation.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Error raised when a numerical routine cannot proceed (divergence,
/// non-finite data, failed factorization).
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Deterministic 64-bit generator (splitmix64). All randomness in the
/// project flows through this type so that runs replay bit-identically
/// from a seed, independent of the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : state_(mix(seed + 0x9E3779B97F4A7C15ULL * (stream + 1))) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  /// Complex sample with E|z|^2 = sigma^2.
  cplx cnormal(double sigma) {
    double s = sigma * 0.7071067811865475244;  // sigma / sqrt(2)
    double re = normal();
    double im = normal();
    return {s * re, s * im};
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Round a double through float32. Generators apply this to everything
/// they emit so that the complex64 on-disk form is lossless.
inline double to_f32(double v) { return double(float(v)); }
inline cplx to_f32(cplx v) { return {to_f32(v.real()), to_f32(v.imag())}; }

}  // namespace pmri
