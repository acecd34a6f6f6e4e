#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmodal/encoder.hpp"
#include "xmodal/lexicon.hpp"
#include "xmodal/relaxation.hpp"

namespace xmodal {

using Vec = std::vector<double>;

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden;  // empty -> linear head
  int output_dim = 0;
};

// Feed-forward classifier head: tanh hidden activations, linear output.
// Hidden layers initialize to seeded Gaussians scaled by 1/sqrt(fan_in);
// the output layer initializes to zero, so an untrained head emits
// all-zero logits for any input. All math is double; parameters serialize
// as float32 records.
class MlpHead {
 public:
  MlpHead(MlpSpec spec, std::uint64_t init_seed);

  int input_dim() const { return spec_.input_dim; }
  int output_dim() const { return spec_.output_dim; }
  const MlpSpec& spec() const { return spec_; }

  Vec forward(const Vec& x) const;

  // Activations recorded by the tape-taking forward, consumed by
  // backward. Valid only for the head that produced it.
  struct Tape {
    Vec input;
    std::vector<Vec> hidden;  // post-tanh, one per hidden layer
  };
  Vec forward(const Vec& x, Tape& tape) const;

  struct Grads {
    std::vector<std::vector<double>> dW;  // row-major out x in, per layer
    std::vector<Vec> db;
  };
  Grads zero_grads() const;

  // Backprop from dL/dlogits. Accumulates parameter gradients into
  // grads and returns dL/dinput (the hook for bank updates and
  // attribution).
  Vec backward(const Tape& tape, const Vec& dlogits, Grads& grads) const;

  // Gradient of one logit w.r.t. the input, parameters untouched.
  Vec input_grad(const Vec& x, int target) const;

  void sgd_step(const Grads& grads, double lr);

  std::size_t param_count() const;
  std::vector<float> serialize() const;
  void deserialize(const std::vector<float>& params);
  // Hex FNV-1a of the serialized float32 bytes; freeze checks compare it
  // before and after distillation.
  std::string checksum() const;

 private:
  struct Layer {
    std::vector<double> W;  // out x in
    Vec b;
    int in = 0;
    int out = 0;
  };
  std::vector<Layer> layers_;
  MlpSpec spec_;
};

// manifest.json (architecture echo + extra fields) + params.f32.
void save_head(const MlpHead& head, const std::filesystem::path& dir,
               const nlohmann::json& manifest_extra = {});
MlpHead load_head(const std::filesystem::path& dir,
                  nlohmann::json* manifest_out = nullptr);

// Augmentation strength abstraction standing in for named image policies:
// strength scales a seeded unit perturbation, output re-normalized.
// strength 0 returns the input unchanged.
struct AugPolicy {
  std::string name = "none";
  double strength = 0.0;
};

Vec augment(const Vec& x, double strength, std::uint64_t seed);

// Image-only classifier with a fixed augmentation policy. Inference-mode
// calls skip augmentation entirely, so they are deterministic.
struct UnimodalTeacher {
  MlpHead head;
  AugPolicy aug;

  Vec forward(const Vec& image_vec) const { return head.forward(image_vec); }
};

// The student never receives text: its forward takes the image embedding
// only, and training asserts input_dim == d_img.
struct Student {
  MlpHead head;
  AugPolicy aug;

  Vec forward(const Vec& image_vec) const { return head.forward(image_vec); }
};

// Element-wise mean of member logits. Commutes with member permutation.
Vec ensemble_logits(const std::vector<Vec>& members);

// kConcat feeds [image || text]; kTextOnly feeds the text embedding
// alone (the teacher variant whose accuracy-vs-proportion curve isolates
// the text pathway).
enum class TeacherInputMode { kConcat, kTextOnly };

TeacherInputMode parse_input_mode(const std::string& name);
std::string input_mode_name(TeacherInputMode mode);

struct MultimodalTeacher {
  MlpHead head;
  TeacherInputMode mode = TeacherInputMode::kConcat;
  int d_img = 0;
  int d_txt = 0;
  // Inputs off unit norm by more than 1e-6 are re-normalized and counted
  // here; beyond 1e-3 deviation they are rejected instead.
  std::uint64_t norm_warnings = 0;

  // Head input for one sample; applies the norm policy above.
  Vec assemble(const Vec& image_vec, const Vec& text_vec);
  Vec forward(const Vec& image_vec, const Vec& text_vec);
  Vec forward(const Vec& image_vec, const Vec& text_vec, MlpHead::Tape& tape);
};

enum class TextSource { kGt, kWn, kNoise };

const char* text_source_name(TextSource s);

// Per-sample prompt source proportions. Must sum to 1 within 1e-9.
struct TextMixPolicy {
  double p_gt = 1.0;
  double p_wn = 0.0;
  double p_noise = 0.0;
};

void validate(const TextMixPolicy& policy);

// Stratified source assignment: per-source counts come from the largest-
// remainder rounding of p * N (ties favor gt, then wn, then noise), and
// the counted source labels are dealt across the id set by a seeded
// shuffle. Depends only on the set of ids (sorted internally), policy and
// seed, so a sample's source never flips across epochs or id orderings.
std::map<int, TextSource> assign_sources(const std::vector<int>& sample_ids,
                                         const TextMixPolicy& policy,
                                         std::uint64_t seed);

// Template-averaged, re-normalized text embedding of one noun.
Vec prompt_embedding(const std::string& noun,
                     const PromptTemplateSet& templates,
                     const EncoderBackend& backend);

struct ResolvedText {
  TextSource source = TextSource::kGt;
  Vec vec;  // unit-norm, d_txt
  // Set iff source == kWn: index of the bank entry the vector aliases,
  // the gradient hook for learnable-bank updates.
  std::optional<std::size_t> bank_index;
};

struct TextContext {
  const ClassCatalog* catalog = nullptr;
  const PromptTemplateSet* templates = nullptr;
  const EncoderBackend* backend = nullptr;
  const NounBank* bank = nullptr;            // required for wn sources
  const ClusterModel* clusters = nullptr;    // paired with bank
  SelectMode select_mode = SelectMode::kNearestInCluster;
  std::uint64_t select_seed = 0;
  // Shuffled class name per class index (class_id - 1); required for
  // noise sources. Swapped out per epoch by the training loop.
  const std::vector<std::string>* noise_names = nullptr;
};

// gt -> prompt_embedding(class name); wn -> the bank entry picked by
// select_relaxed_for_sample on the sample's image embedding (current_vec,
// gradient-carrying when the bank is learnable); noise -> prompt
// embedding of the shuffled class name.
ResolvedText resolve_text_input(const TextContext& ctx, TextSource source,
                                int class_id, int sample_id,
                                const Vec& image_vec);

}  // namespace xmodal
