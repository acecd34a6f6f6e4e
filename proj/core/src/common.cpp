#include "xmodal/common.hpp"

#include <cmath>
#include <numbers>

namespace xmodal {

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<std::uint64_t>(p[i]);
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  return fnv1a64(bytes.data(), bytes.size());
}

namespace {
std::uint64_t splitmix64_step(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t state = seed ^ (0x9e3779b97f4a7c15ull + tag);
  return splitmix64_step(state);
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  return mix_seed(seed, fnv1a64(tag));
}

std::uint64_t Rng::next_u64() { return splitmix64_step(state_); }

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) throw InputError("Rng::next_below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

double Rng::next_gaussian() {
  const double u1 = next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> gaussian_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.next_gaussian();
  return v;
}

double log_sum_exp(const std::vector<double>& z) {
  if (z.empty()) throw InputError("log_sum_exp: empty vector");
  double m = z[0];
  for (double x : z)
    if (x > m) m = x;
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> log_softmax(const std::vector<double>& z) {
  const double lse = log_sum_exp(z);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

std::vector<double> softmax(const std::vector<double>& z) {
  std::vector<double> out = log_softmax(z);
  for (auto& x : out) x = std::exp(x);
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InputError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw InputError("cosine: zero vector");
  return dot(a, b) / (na * nb);
}

std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace xmodal
