#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace surs {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad inputs: non-finite vertices, malformed configs, shape mismatches.
struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// Unparseable file content. Carries a line number when one makes sense.
struct FormatError : Error {
  explicit FormatError(const std::string& what, long line = -1)
      : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_number(line) {}
  long line_number;
};

// Candidate pool could not satisfy a sample request.
struct SamplingError : Error {
  explicit SamplingError(const std::string& what) : Error(what) {}
};

// Non-finite loss or gradient during optimization.
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& what) : Error(what) {}
};

// Deterministic RNG. Distributions are hand-rolled on top of a fixed-width
// generator so streams replay identically everywhere; libstdc++'s
// distribution objects do not promise a stable output sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { state_ = splitmix(seed ? seed : 0x9e3779b97f4a7c15ull); }

  std::uint64_t next_u64() {
    // xorshift64* keeps the whole generator in one register.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  // Uniform in [0, 1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling avoids modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw ValidationError("uniform_index: empty range");
    std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
    std::uint64_t x;
    do { x = next_u64(); } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (has_cache_) {
      has_cache_ = false;
      return cache_;
    }
    double u1, u2;
    do { u1 = uniform(); } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cache_ = r * std::sin(a);
    has_cache_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Independent child stream; used to give each shape/image its own seed.
  Rng fork(std::uint64_t stream) {
    return Rng(splitmix(state_ ^ splitmix(stream + 0x632be59bd9b4e019ull)));
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t state_ = 0;
  double cache_ = 0.0;
  bool has_cache_ = false;
};

void set_thread_count(int n);  // clamps to >= 1 and applies to OpenMP
int thread_count();

}  // namespace surs
