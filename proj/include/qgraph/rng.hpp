#pragma once

// Deterministic random streams.
//
// Every stochastic routine in this library draws from a Stream constructed
// from (master seed, stream index).  mt19937_64 output is fully specified by
// the standard, and the uniform/normal transforms below are written out
// explicitly (std::uniform_real_distribution and friends are
// implementation-defined), so a given seed produces identical bytes on any
// conforming platform.  Distinct stream indices give statistically
// independent streams, which is what makes sample-parallel estimation
// reproducible independent of the worker count.

#include <cstdint>
#include <random>

namespace qgraph {

// splitmix64 step; used to whiten seed material before it enters mt19937_64.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Collapse (seed, stream, salt) into one well-mixed 64-bit engine seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t salt = 0) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0x9e3779b97f4a7c15ULL;
  std::uint64_t b = splitmix64(s);
  s ^= salt * 0xd1342543de82ef95ULL;
  std::uint64_t c = splitmix64(s);
  return a ^ (b << 1 | b >> 63) ^ c;
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_index, std::uint64_t salt = 0)
      : eng_(mix_seed(seed, stream_index, salt)) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one spare value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.28318530717958647692 * uniform();
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace qgraph
