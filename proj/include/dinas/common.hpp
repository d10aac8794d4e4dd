#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

namespace dinas {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Error hierarchy. Everything the library throws derives from dinas::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative method ran out of iterations or reductions.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

class InnerSolverStalled : public NonConvergence {
 public:
  InnerSolverStalled(const std::string& what, double best_residual, long iterations)
      : NonConvergence(what), best_residual_(best_residual), iterations_(iterations) {}
  double best_residual() const noexcept { return best_residual_; }
  long iterations() const noexcept { return iterations_; }

 private:
  double best_residual_;
  long iterations_;
};

class RejectionLoopExceeded : public NonConvergence {
 public:
  using NonConvergence::NonConvergence;
};

inline void require_dims(bool ok, const char* what) {
  if (!ok) throw DimensionError(std::string("dimension mismatch: ") + what);
}

inline double inf_norm(const Eigen::Ref<const Vector>& v) {
  return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

// ---------------------------------------------------------------------------
// Seed streams
//
// All randomness flows from one integer seed. Sub-streams are derived by name
// (splitmix64 over the parent seed xor an FNV-1a hash of the name), so adding
// a new consumer never shifts the draws of an existing one. Uniforms and
// normals are produced from raw 64-bit words rather than <random>
// distributions, whose output is implementation-defined.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed) : state_(splitmix64(seed)) {}

  SeedStream split(std::string_view name) const {
    return SeedStream(splitmix64(state_ ^ fnv1a(name)));
  }

  std::uint64_t next_u64() {
    // xorshift64* over a splitmix-initialised nonzero state
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform double in (0, 1), never exactly zero.
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  bool coin() { return (next_u64() >> 63) != 0; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dinas
