#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xmodal {

// Error taxonomy maps onto CLI exit codes: ConfigError -> 2,
// TrendCheckError -> 4, everything else -> 3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& msg) : Error(msg) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& msg) : Error(msg) {}
};

class CacheIntegrityError : public Error {
 public:
  explicit CacheIntegrityError(const std::string& msg) : Error(msg) {}
};

class TrendCheckError : public Error {
 public:
  explicit TrendCheckError(const std::string& msg) : Error(msg) {}
};

// FNV-1a 64-bit. Stable across platforms; used for cache keys, seed
// derivation and record checksums.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(const void* data, std::size_t len);

// Combine a base seed with any number of tags/indices into a derived
// 64-bit seed. Mixing is splitmix64-style so nearby inputs decorrelate.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag);

// Deterministic PRNG used everywhere instead of std distributions, whose
// output is implementation-defined. splitmix64 stream, documented so that
// test oracles can recompute sequences independently:
//   state += 0x9e3779b97f4a7c15
//   z = state; z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//   return z ^ (z >> 31)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1): top 53 bits of next_u64.
  double next_double();

  // Uniform integer on [0, n). n > 0. Rejection-sampled, unbiased.
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via Box-Muller on two next_double draws:
  //   z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
  // One draw pair per value; the sine partner is discarded so the
  // sequence stays simple to replicate.
  double next_gaussian();

 private:
  std::uint64_t state_;
};

std::vector<double> gaussian_vector(Rng& rng, std::size_t dim);

// In-place seeded Fisher-Yates; identity for n <= 1.
template <typename T>
void seeded_shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Numerically stable softmax helpers (log-sum-exp stabilized).
std::vector<double> softmax(const std::vector<double>& z);
std::vector<double> log_softmax(const std::vector<double>& z);
double log_sum_exp(const std::vector<double>& z);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double l2_norm(const std::vector<double>& v);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

std::string to_hex(std::uint64_t v);

}  // namespace xmodal
