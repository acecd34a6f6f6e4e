#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xmodal/config.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/encoder.hpp"
#include "xmodal/lexicon.hpp"
#include "xmodal/models.hpp"
#include "xmodal/relaxation.hpp"

namespace xmodal {

struct EpochStat {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

nlohmann::json to_json(const std::vector<EpochStat>& epochs);

// One phase's outcome. metrics is reproduced byte for byte by a rerun
// with the same config and seeds; timing is the only wall-clock-bearing
// field and is kept out of metrics for that reason.
struct RunRecord {
  std::string phase;
  nlohmann::json config;
  nlohmann::json metrics;
  nlohmann::json timing;

  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;
};

// Everything a phase needs: parsed config, constructed backend, catalog,
// lexicon table, templates and the dataset (loaded from dataset_dir(),
// generated and saved there first if absent).
struct RunContext {
  TrainConfig cfg;
  std::shared_ptr<EncoderBackend> backend;
  ClassCatalog catalog;
  LexiconTable lexicon;
  PromptTemplateSet templates;
  SyntheticDataset data;
};

RunContext make_context(const TrainConfig& cfg);

// Backend construction alone (no dataset involvement): the mock encoder
// gets its registry from the catalog and lexicon table.
std::shared_ptr<EncoderBackend> make_backend(const TrainConfig& cfg,
                                             const ClassCatalog& catalog,
                                             const LexiconTable& lexicon);

// Accuracy of an image-only head over a split, clean features, in [0, 1].
double evaluate_images(const MlpHead& head, const DatasetSplit& split);

// Accuracy of the fused teacher over a split. Text inputs follow the
// configured mix policy applied to the split's own sample ids; noise
// sources use a permutation fixed for the whole evaluation.
double evaluate_teacher(const RunContext& ctx, MultimodalTeacher& teacher,
                        const NounBank& bank, const ClusterModel& clusters,
                        const DatasetSplit& split);

struct UnimodalResult {
  UnimodalTeacher strong;
  UnimodalTeacher weak;
  RunRecord record;
};

// Two cross-entropy image classifiers differing in augmentation strength
// and init stream.
UnimodalResult train_unimodal_teachers(const RunContext& ctx);

// Candidate harvest + noun embedding + K-means over the training image
// features + top-k filtering, seeded from the init stream.
RelaxResult relax_bank(const RunContext& ctx);

struct TeacherXResult {
  MultimodalTeacher teacher;
  NounBank bank;        // post-training state
  ClusterModel clusters;
  RunRecord record;
};

// Fused-input teacher. Per sample the text side is ground-truth, relaxed
// or noise per the mix policy; noise names are re-drawn every epoch so
// they carry no learnable class signal. With a learnable bank, relaxed
// entries receive the text-slice input gradient plus the regularizer
// gradient and are re-normalized after every optimizer step.
TeacherXResult train_multimodal_teacher(const RunContext& ctx, NounBank bank,
                                        ClusterModel clusters);

struct DistillResult {
  Student student;
  RunRecord record;
};

// Image-only student against frozen teachers. The soft target is the
// member ensemble averaged with the fused teacher's logits, or the fused
// teacher alone, per cfg.models.distill_teachers. Teachers run in eval
// mode on clean features; freeze is verified by checksum. strong/weak
// may be null only in fused-teacher-only mode.
DistillResult distill_student(const RunContext& ctx,
                              const UnimodalTeacher* strong,
                              const UnimodalTeacher* weak,
                              MultimodalTeacher& teacher_x,
                              const NounBank& bank,
                              const ClusterModel& clusters);

// Cross-entropy-only reference sharing the student architecture, seeds
// and batch schedule; no teacher machinery is constructed at all.
DistillResult train_student_baseline(const RunContext& ctx);

struct PipelineResult {
  UnimodalResult members;
  TeacherXResult teacher_x;
  DistillResult student_full;  // ensemble + fused teacher
  DistillResult student_tx;    // fused teacher only
  double teacher_val = 0.0;
  double student_full_val = 0.0;
  double student_tx_val = 0.0;
};

// All phases in dependency order; both student variants are produced.
// persist writes checkpoints and records under cfg.out.
PipelineResult run_pipeline(const RunContext& ctx, bool persist);

// Checkpoint wrappers. Each directory holds manifest.json + params.f32;
// the teacher manifest carries input mode, dims and the resolved config
// so a checkpoint is self-describing.
void save_unimodal(const UnimodalTeacher& t, const std::string& role,
                   const std::filesystem::path& dir);
UnimodalTeacher load_unimodal(const std::filesystem::path& dir);
void save_teacher_x(const MultimodalTeacher& t, const TrainConfig& cfg,
                    const std::filesystem::path& dir);
MultimodalTeacher load_teacher_x(const std::filesystem::path& dir,
                                 nlohmann::json* manifest_out = nullptr);
void save_student(const Student& s, const std::filesystem::path& dir);
Student load_student(const std::filesystem::path& dir);

struct SweepCell {
  std::vector<double> per_seed;
  double mean = 0.0;
  double stdev = 0.0;
};

struct SweepRow {
  double percent = 0.0;  // varied source share, 0..100
  TextMixPolicy policy;
  SweepCell teacher;
  SweepCell student_tx;
  SweepCell student_full;
  bool failed = false;
  std::string error;
};

struct SweepResult {
  std::string axis;  // "wn" | "noise"
  int reps = 1;
  std::vector<SweepRow> rows;
};

// Varied share p on one axis (wn: gt+relaxed split; noise: gt+noise
// split), one full pipeline per point and rep, seeds shared across
// points. A failing point is recorded and the sweep continues. out_dir,
// when set, receives per-point records and the summary table.
SweepResult run_sweep(const TrainConfig& base, const std::string& axis,
                      const std::vector<double>& points_percent, int reps,
                      const std::filesystem::path& out_dir = {});

TextMixPolicy axis_policy(const std::string& axis, double percent);

// Teacher head inputs for a split, assembled exactly as evaluation does,
// with per-sample source labels; feeds attribution.
struct AssembledEval {
  std::vector<Vec> inputs;
  std::vector<int> labels;
  std::vector<TextSource> sources;
  int d_img = 0;  // 0 when the teacher is text-only
  int d_txt = 0;
};

AssembledEval assemble_eval_inputs(const RunContext& ctx,
                                   MultimodalTeacher& teacher,
                                   const NounBank& bank,
                                   const ClusterModel& clusters,
                                   const DatasetSplit& split);

}  // namespace xmodal
