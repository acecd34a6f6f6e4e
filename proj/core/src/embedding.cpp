#include "xmodal/embedding.hpp"

#include <cmath>

#include "xmodal/common.hpp"

namespace xmodal {

double EmbeddingVector::norm() const {
  double s = 0.0;
  for (float x : values) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

bool EmbeddingVector::is_finite() const {
  for (float x : values)
    if (!std::isfinite(x)) return false;
  return true;
}

EmbeddingVector normalize(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double n = std::sqrt(s);
  if (n == 0.0) throw InputError("normalize: zero vector");
  if (!std::isfinite(n)) throw InputError("normalize: non-finite input");
  EmbeddingVector out;
  out.values.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.values[i] = static_cast<float>(v[i] / n);
  return out;
}

EmbeddingVector normalize(const std::vector<float>& v) {
  std::vector<double> d(v.begin(), v.end());
  return normalize(d);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw InputError("cosine: dimension mismatch");
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    num += static_cast<double>(a.values[i]) * b.values[i];
    na += static_cast<double>(a.values[i]) * a.values[i];
    nb += static_cast<double>(b.values[i]) * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) throw InputError("cosine: zero vector");
  return num / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace xmodal
