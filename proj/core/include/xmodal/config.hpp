#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmodal/losses.hpp"
#include "xmodal/models.hpp"
#include "xmodal/relaxation.hpp"

namespace xmodal {

struct BackendOptions {
  std::string kind = "mock";  // "mock" | "vlm"
  std::filesystem::path store;  // precomputed store root, vlm only
  int dim_text = 16;
  int dim_image = 16;
  std::uint64_t anchor_seed = 7;
  double synonym_noise = 0.1;
  double distractor_noise = 0.3;
  double image_noise = 1.0;
};

struct DatasetOptions {
  std::filesystem::path dir;  // empty -> <out>/data
  int per_class_train = 100;
  int per_class_val = 50;
  double imbalance_factor = 1.0;
};

struct BankOptions {
  int M = 6;
  int top_k = 5;
  int per_class_limit = 20;
  bool learnable = true;
  SelectMode select = SelectMode::kNearestInCluster;
};

enum class DistillTeachers { kBoth, kTextTeacherOnly };

DistillTeachers parse_distill_teachers(const std::string& name);
std::string distill_teachers_name(DistillTeachers which);

struct ModelOptions {
  std::vector<int> teacher_hidden = {24};
  std::vector<int> teacher_x_hidden = {24};
  std::vector<int> student_hidden = {16};
  TeacherInputMode teacher_x_input = TeacherInputMode::kConcat;
  double aug_strong = 0.3;
  double aug_weak = 0.1;
  DistillTeachers distill_teachers = DistillTeachers::kBoth;
};

struct OptimOptions {
  double lr = 0.3;
  double bank_lr = 0.3;
  int epochs = 30;
  int batch_size = 32;
};

// Independent named streams; every derived seed mixes one of these with
// a purpose tag, so reruns with equal seeds are bit-identical.
struct SeedOptions {
  std::uint64_t data = 1;
  std::uint64_t init = 2;
  std::uint64_t mix = 3;
  std::uint64_t noise = 4;
};

struct TrainConfig {
  BackendOptions backend;
  std::vector<std::string> catalog_names;  // resolved: inline or file
  std::string lexicon = "mock";  // "mock" or a snapshot path
  std::vector<std::string> templates = {"a photo of a {}"};
  DatasetOptions dataset;
  BankOptions bank;
  KDConfig kd;
  TextMixPolicy mix;
  ModelOptions models;
  OptimOptions optim;
  SeedOptions seeds;
  std::filesystem::path out = "runs/run";

  std::filesystem::path dataset_dir() const {
    return dataset.dir.empty() ? out / "data" : dataset.dir;
  }
};

// Strict parse: unknown keys anywhere are a ConfigError, wrong types and
// out-of-range values likewise. Absent keys take the defaults above.
TrainConfig parse_train_config(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

// Fully-resolved echo; parse_train_config(to_json(cfg)) reproduces cfg.
nlohmann::json to_json(const TrainConfig& cfg);

void validate(const TrainConfig& cfg);

// Replica seeds for multi-seed repeats: rep 0 keeps the configured
// seeds, rep r > 0 remixes each named seed with the rep index.
TrainConfig with_rep(const TrainConfig& base, int rep);

}  // namespace xmodal
