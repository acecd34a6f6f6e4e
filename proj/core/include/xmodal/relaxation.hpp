#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "xmodal/embedding.hpp"
#include "xmodal/encoder.hpp"
#include "xmodal/lexicon.hpp"

namespace xmodal {

// One filtered noun. pretrained is the frozen snapshot taken at bank
// creation; current is the learnable vector, kept in double for gradient
// updates and re-normalized to unit length after every training step.
// cluster_id is a 0-based cluster index.
struct BankEntry {
  std::string noun;
  EmbeddingVector pretrained;
  std::vector<double> current;
  int cluster_id = 0;
};

struct NounBank {
  std::vector<BankEntry> entries;
  int M = 0;
  bool learnable = true;

  // Entry indices belonging to one cluster, in bank order.
  std::vector<std::size_t> cluster_members(int cluster_id) const;
};

// Unit norm of every pretrained and current vector within 1e-6.
void check_bank(const NounBank& bank);

struct ClusterModel {
  std::vector<std::vector<double>> centers;  // M x d
  std::vector<int> assignment;               // input index -> cluster id
  double inertia = 0.0;
  int reseeds = 0;  // empty-cluster rescues during iteration
};

// Per noun, the template-averaged embedding, re-normalized to unit
// length. Encode failures abort with the offending noun and template
// named. Output order follows the candidate order.
std::vector<std::pair<std::string, EmbeddingVector>> embed_nouns(
    const NounCandidateSet& nouns, const PromptTemplateSet& templates,
    const EncoderBackend& backend);

// Lloyd iterations over squared Euclidean distance, seeded
// k-means++-style D^2-weighted init. Terminates when the largest center
// movement drops below tol or after max_iter rounds. An empty cluster is
// re-seeded from the point farthest from its assigned center (counted in
// reseeds). Assignment ties go to the lowest cluster id.
ClusterModel kmeans(const std::vector<std::vector<double>>& vectors, int M,
                    std::uint64_t seed, int max_iter = 100, double tol = 1e-9);

int nearest_center(const ClusterModel& model, const std::vector<double>& v);

// S[k][i] = <center_k, noun_i>.
std::vector<std::vector<double>> similarity_matrix(
    const ClusterModel& model,
    const std::vector<std::pair<std::string, EmbeddingVector>>& nouns);

// Assign each noun to its argmax-similarity cluster (ties -> lowest id),
// keep the top_k nouns per cluster by raw similarity descending (softmax
// over a cluster's members is rank-equivalent, so ranking uses S
// directly; similarity ties -> lower noun index). Selections are
// concatenated cluster by cluster, re-normalized, and snapshotted as
// pretrained. A cluster with zero nouns stays in the model with an empty
// selection and a warning.
NounBank assign_and_filter(const ClusterModel& model,
                           const std::vector<std::pair<std::string,
                                                       EmbeddingVector>>& nouns,
                           int top_k = 5,
                           std::vector<std::string>* warnings = nullptr);

enum class SelectMode { kNearestInCluster, kRandomInCluster };

SelectMode parse_select_mode(const std::string& name);
std::string select_mode_name(SelectMode mode);

// Pick the bank entry paired with an image: find the image's cluster via
// nearest center, then take the member maximizing <image, current>
// (nearest-in-cluster; ties -> lowest entry index) or a seeded-uniform
// member (random-in-cluster). A memberless cluster falls back to the
// global nearest entry. Empty bank is an error.
std::size_t select_relaxed_for_sample(const NounBank& bank,
                                      const std::vector<double>& image_vec,
                                      const ClusterModel& model,
                                      SelectMode mode, std::uint64_t seed);

// Full relaxation pass: harvest candidates, embed them over the
// templates, cluster the training-image embeddings into M centers and
// filter. Image embeddings and noun embeddings must share one dimension.
struct RelaxResult {
  NounBank bank;
  ClusterModel clusters;
  std::vector<std::pair<std::string, EmbeddingVector>> noun_embeddings;
  std::vector<std::string> warnings;
};

RelaxResult build_bank(const ClassCatalog& catalog, const LexiconTable& table,
                       const PromptTemplateSet& templates,
                       const EncoderBackend& backend,
                       const std::vector<std::vector<double>>& image_vectors,
                       int M, int top_k, std::uint64_t seed,
                       int per_class_limit);

// Bank + cluster centers persisted as manifest.json + vectors/<id>.f32,
// the embedding-cache record convention. Noun strings, cluster ids and
// the learnable flag live in the manifest.
void save_bank(const NounBank& bank, const ClusterModel& model,
               const std::filesystem::path& dir);
std::pair<NounBank, ClusterModel> load_bank(const std::filesystem::path& dir);

}  // namespace xmodal
