#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmodal/encoder.hpp"

namespace xmodal {

struct SampleRecord {
  int sample_id = 0;  // unique across both splits
  int label = 0;      // 1..C
  std::uint64_t sample_key = 0;
  std::vector<double> feature;  // unit-norm image embedding, d_img
};

struct DatasetSplit {
  std::vector<SampleRecord> samples;

  std::vector<int> ids() const;
  std::vector<std::vector<double>> features() const;
};

// Generator knobs. imbalance_factor 1 keeps the train split balanced
// (per_class_train per class); factor f > 1 decays train class counts
// exponentially from per_class_train down to per_class_train / f, the
// usual long-tail construction. The val split is always balanced.
// Class separability is governed by the backend's image_noise against
// its near-orthogonal anchors.
struct GeneratorSpec {
  int per_class_train = 100;
  int per_class_val = 50;
  double imbalance_factor = 1.0;
  std::uint64_t data_seed = 0;
};

struct SyntheticDataset {
  DatasetSplit train;
  DatasetSplit val;
  int dim = 0;
  int num_classes = 0;
  nlohmann::json meta;  // backend identity + generator echo
};

// Features come from backend.encode_image with per-sample keys derived
// from data_seed, stored float32 so the in-memory values equal a later
// load exactly. Train samples are class-major with ids 1..N_train; val
// ids continue after them.
SyntheticDataset generate_dataset(const EncoderBackend& backend,
                                  int num_classes, const GeneratorSpec& spec);

// manifest.json + vectors/{train,val}.f32 (packed row-major records).
void save_dataset(const SyntheticDataset& data,
                  const std::filesystem::path& dir);
SyntheticDataset load_dataset(const std::filesystem::path& dir);

std::vector<std::size_t> class_counts(const DatasetSplit& split,
                                      int num_classes);

}  // namespace xmodal
