#pragma once

#include <string>
#include <vector>

namespace xmodal {

// Unit-norm float32 vector, the common currency of text/image encoders.
// float32 (not double) so cache round trips are bit-exact; training code
// converts to double explicitly at the model boundary.
struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;
  bool is_finite() const;
};

// v / ||v||_2, computed in double then stored as float32.
// Throws InputError on the zero vector.
EmbeddingVector normalize(const std::vector<double>& v);
EmbeddingVector normalize(const std::vector<float>& v);

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace xmodal
