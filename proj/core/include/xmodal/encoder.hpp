#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "xmodal/embedding.hpp"

namespace xmodal {

// Input to encode_image. The mock backend consumes (class_id, sample_key);
// the pretrained adapter consumes a feature vector keyed by sample id.
// Class ids are 1-based throughout (catalog convention).
struct ImageInput {
  std::string sample_id;
  std::optional<int> class_id;                  // mock path, 1..C
  std::uint64_t sample_key = 0;                 // mock path, noise seed
  std::optional<std::vector<float>> feature;    // vlm path
};

// Uniform encoder abstraction. Implementations are deterministic: the same
// input yields bit-identical output within one backend identity, and stay
// read-only after construction so concurrent encode calls are safe.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  // Stable string id, used as the cache namespace.
  virtual const std::string& identity() const = 0;
  virtual int text_dim() const = 0;
  virtual int image_dim() const = 0;

  virtual EmbeddingVector encode_text(const std::string& prompt) const = 0;
  virtual EmbeddingVector encode_image(const ImageInput& input) const = 0;
};

// Affinity tier of a registered noun: how tightly its text embedding
// hugs the class anchor. Exact class-name tokens sit closest, synonyms
// next, hypernyms/siblings noticeably looser, distractors barely at all.
enum class MockKind { kClassName, kSynonym, kRelated, kDistractor };

// One registered noun of the mock's semantic neighborhood.
// class_id 0 means a free-floating distractor with no class affinity.
struct MockNoun {
  std::string noun;
  int class_id = 0;  // 1..C, or 0 for none
  MockKind kind = MockKind::kSynonym;
};

struct SemanticMockSpec {
  int num_classes = 0;
  int dim_text = 16;
  int dim_image = 16;
  std::uint64_t anchor_seed = 0;
  double synonym_noise = 0.1;     // in [0, 1)
  double distractor_noise = 0.3;  // anchor blend weight for distractors
  double image_noise = 0.0;
};

// Deterministic stand-in for a pretrained vision-language encoder.
//
// Class anchors live in the larger of the two dims and come in neighbor
// pairs: consecutive classes share a group direction, giving cos = 0.7
// between the two text anchors of a pair, cos = 0.35 between the image
// anchors, and ~0 across pairs (requires dim >= num_classes * 3/2). The
// asymmetry is deliberate: kinship between two classes reads clearly in
// language but only faintly in any one noisy image, so text carries
// relational structure the image modality merely hints at. Anchors are
// projected (truncated + re-normalized) into each modality's space;
// construction fails if the pair geometry does not survive the
// projection. Text encoding scans the prompt for the longest registered
// noun (whole-word, lowercase):
//   class name of c      -> normalize(anchor_c + 0.5 * synonym_noise * u)
//   synonym of class c   -> normalize(anchor_c + synonym_noise * u)
//   related noun of c    -> normalize(anchor_c + u)
//   distractor (class c) -> normalize(distractor_noise * anchor_c + u)
//   unregistered prompt  -> normalize(u)
// where u is the unit-normalized Gaussian drawn from
// Rng(mix_seed(anchor_seed, "text:" + prompt)). With a unit-norm
// perturbation direction, cos(output, anchor) = 1/sqrt(1 + s^2) >= 1 - s
// for synonyms, while related nouns land near 0.71: correct class
// affinity, but far too loose to act as a label token.
// Images follow the same scheme with image_noise and a per-sample seed.
class SemanticMockEncoder : public EncoderBackend {
 public:
  SemanticMockEncoder(SemanticMockSpec spec, std::vector<MockNoun> lexicon);

  const std::string& identity() const override { return identity_; }
  int text_dim() const override { return spec_.dim_text; }
  int image_dim() const override { return spec_.dim_image; }

  EmbeddingVector encode_text(const std::string& prompt) const override;
  EmbeddingVector encode_image(const ImageInput& input) const override;

  // class_id in 1..C.
  const EmbeddingVector& text_anchor(int class_id) const;
  const EmbeddingVector& image_anchor(int class_id) const;
  const SemanticMockSpec& spec() const { return spec_; }

 private:
  SemanticMockSpec spec_;
  std::unordered_map<std::string, MockNoun> registry_;
  std::vector<EmbeddingVector> text_anchors_;
  std::vector<EmbeddingVector> image_anchors_;
  std::string identity_;
};

// Adapter for embeddings produced offline by a real pretrained encoder,
// stored in the manifest + f32 record layout (namespaces "text"/"image").
// No model is bundled: a missing or unreadable store is a BackendError,
// never a silent fallback to the mock.
class PrecomputedVlmEncoder : public EncoderBackend {
 public:
  explicit PrecomputedVlmEncoder(const std::filesystem::path& store_root);

  const std::string& identity() const override { return identity_; }
  int text_dim() const override { return dim_text_; }
  int image_dim() const override { return dim_image_; }

  EmbeddingVector encode_text(const std::string& prompt) const override;
  EmbeddingVector encode_image(const ImageInput& input) const override;

 private:
  EmbeddingVector lookup(const std::string& ns, const std::string& key) const;

  std::filesystem::path root_;
  std::string identity_;
  int dim_text_ = 0;
  int dim_image_ = 0;
};

}  // namespace xmodal
