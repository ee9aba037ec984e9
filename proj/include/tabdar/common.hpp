#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace tabdar {

// Row-major dense storage; one token / one sample per row throughout.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CSV / JSON input.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Value or shape inconsistent with a schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during training or sampling.
class ComputeError : public Error {
 public:
  using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream for (root seed, row, replicate).
inline Rng derive_rng(std::uint64_t seed, std::uint64_t row, std::uint64_t rep = 0) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ (row + 0x632BE59BD9B4E019ULL));
  s = splitmix64(s ^ (rep + 0x8CB92BA72F3D8DD7ULL));
  return Rng(s);
}

// Uniform on [0, 1) with 53 random bits; std::generate_canonical is allowed to return 1.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller keeps the stream consumption fixed at two words per draw,
// unlike std::normal_distribution which caches a spare value.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Uniform integer on [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

// Keeps large, short-lived matrix buffers on the heap instead of mapping and
// unmapping them on every step. Process-wide; call once from main().
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

}  // namespace tabdar
