#pragma once
// Shared primitives: error types, angle helpers, deterministic RNG streams,
// small dense matrix containers.

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rirsf {

using cdouble = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Invalid parameters or malformed configuration; maps to CLI exit code 1
// when raised during argument handling, otherwise 2.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent data: bad files, infeasible requests, shape
// mismatches. Maps to CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Phase of a complex number in (-pi, pi]; the phase of exact zero is 0.
inline double principal_phase(cdouble z) {
  if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
  const double a = std::atan2(z.imag(), z.real());
  return a == -kPi ? kPi : a;
}

// Wrap an angle to (-pi, pi].
inline double wrap_phase(double x) {
  double y = std::fmod(x + kPi, kTwoPi);
  if (y <= 0.0) y += kTwoPi;
  return y - kPi;
}

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }
inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }

// SplitMix64 finalizer; basis of the seed-derivation scheme below.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a path of ids,
// e.g. derive_seed(master, {band, room, utterance}). Every random decision in
// the pipeline draws from a stream derived this way, so any sub-computation
// is reproducible in isolation.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (auto v : path) s = mix64(s ^ v);
  return s;
}

// Deterministic random stream. mt19937_64 output is pinned by the standard
// and the uniform/normal mappings are explicit, so sequences are bit-exact
// across platforms.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : rng_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  long uniform_int(long lo, long hi) {
    const double u = uniform();
    long v = lo + static_cast<long>(u * static_cast<double>(hi - lo + 1));
    return v > hi ? hi : v;
  }

  // Standard normal via Box-Muller.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(kTwoPi * u2);
    has_cached_ = true;
    return r * std::cos(kTwoPi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

template <typename T>
struct Matrix2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix2() = default;
  Matrix2(std::size_t r, std::size_t c, T fill = T{})
      : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::size_t size() const { return data.size(); }
};

using RealMatrix = Matrix2<double>;
using ComplexMatrix = Matrix2<cdouble>;

}  // namespace rirsf
