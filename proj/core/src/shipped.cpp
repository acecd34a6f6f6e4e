#include "xmodal/shipped.hpp"

namespace xmodal {

nlohmann::json shipped_leakage_json() {
  return {
      {"backend",
       {{"kind", "mock"},
        {"dim_text", 16},
        {"dim_image", 16},
        {"anchor_seed", 11},
        {"synonym_noise", 0.1},
        {"distractor_noise", 0.35},
        {"image_noise", 1.6}}},
      {"catalog",
       {"automobile", "airplane", "dog", "flower", "telephone", "chair"}},
      {"lexicon", "mock"},
      {"templates", {"a photo of a {}", "a picture of a {}"}},
      {"dataset",
       {{"per_class_train", 100},
        {"per_class_val", 50},
        {"imbalance_factor", 1.0}}},
      {"bank",
       {{"M", 6},
        {"top_k", 5},
        {"per_class_limit", 20},
        {"learnable", true},
        {"select", "random-in-cluster"}}},
      {"kd",
       {{"tau", 4.0},
        {"lambda_kd", 1.0},
        {"lambda_hier", 0.5},
        {"lambda_cosreg", 0.01}}},
      {"mix", {{"p_gt", 1.0}, {"p_wn", 0.0}, {"p_noise", 0.0}}},
      {"models",
       {{"teacher_hidden", {24}},
        {"teacher_x_hidden", {24}},
        {"student_hidden", {8}},
        {"teacher_x_input", "concat"},
        {"aug_strong", 0.25},
        {"aug_weak", 0.1},
        {"distill_teachers", "both"}}},
      {"optim",
       {{"lr", 0.3}, {"bank_lr", 0.03}, {"epochs", 30}, {"batch_size", 32}}},
      {"seeds", {{"data", 1}, {"init", 2}, {"mix", 3}, {"noise", 4}}},
      {"out", "runs/leakage"}};
}

nlohmann::json shipped_separable_json() {
  nlohmann::json j = shipped_leakage_json();
  j["backend"]["image_noise"] = 0.5;
  j["optim"]["epochs"] = 10;
  j["out"] = "runs/separable";
  return j;
}

TrainConfig shipped_leakage_config() {
  return parse_train_config(shipped_leakage_json());
}

TrainConfig shipped_separable_config() {
  return parse_train_config(shipped_separable_json());
}

}  // namespace xmodal
