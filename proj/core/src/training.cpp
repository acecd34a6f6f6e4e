#include "xmodal/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>

#include "xmodal/common.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/recordio.hpp"

namespace xmodal {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1-based argmax; equal logits resolve to the lowest class, so an
// untrained all-zero head deterministically predicts class 1.
int argmax1(const Vec& z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < z.size(); ++i)
    if (z[i] > z[best]) best = i;
  return static_cast<int>(best) + 1;
}

Vec onehot(int label, int num_classes) {
  Vec y(static_cast<std::size_t>(num_classes), 0.0);
  y[static_cast<std::size_t>(label - 1)] = 1.0;
  return y;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t data_seed,
                                     const std::string& phase, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(data_seed, "order:" + phase + ":" + std::to_string(epoch)));
  seeded_shuffle(order, rng);
  return order;
}

std::uint64_t aug_seed(std::uint64_t data_seed, const std::string& phase,
                       int epoch, int sample_id) {
  return mix_seed(data_seed, "aug:" + phase + ":" + std::to_string(epoch) +
                                 ":" + std::to_string(sample_id));
}

std::vector<std::vector<std::size_t>> chunked(
    const std::vector<std::size_t>& order, int batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size();
       i += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(order.size(),
                               i + static_cast<std::size_t>(batch_size));
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

nlohmann::json mix_counts(const std::map<int, TextSource>& sources) {
  int gt = 0, wn = 0, noise = 0;
  for (const auto& [id, src] : sources) {
    (void)id;
    if (src == TextSource::kGt) ++gt;
    else if (src == TextSource::kWn) ++wn;
    else ++noise;
  }
  return {{"gt", gt}, {"wn", wn}, {"noise", noise}};
}

std::string bank_checksum(const NounBank& bank) {
  std::vector<float> all;
  for (const auto& e : bank.entries) {
    auto cur = to_f32(e.current);
    all.insert(all.end(), cur.begin(), cur.end());
  }
  return f32_checksum(all);
}

// Image-only CE training shared by the unimodal members; returns the
// trained head plus per-epoch stats.
struct ImageLoopOut {
  MlpHead head;
  std::vector<EpochStat> epochs;
};

ImageLoopOut train_image_head(const RunContext& ctx, const MlpSpec& spec,
                              const std::string& phase, double aug_strength,
                              std::uint64_t init_seed) {
  const auto& cfg = ctx.cfg;
  const auto& train = ctx.data.train.samples;
  ImageLoopOut out{MlpHead(spec, init_seed), {}};
  int C = spec.output_dim;
  for (int epoch = 1; epoch <= cfg.optim.epochs; ++epoch) {
    auto order = epoch_order(train.size(), cfg.seeds.data, phase, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& chunk : chunked(order, cfg.optim.batch_size)) {
      auto grads = out.head.zero_grads();
      double inv_b = 1.0 / static_cast<double>(chunk.size());
      for (std::size_t idx : chunk) {
        const auto& s = train[idx];
        Vec x = augment(s.feature, aug_strength,
                        aug_seed(cfg.seeds.data, phase, epoch, s.sample_id));
        MlpHead::Tape tape;
        Vec z = out.head.forward(x, tape);
        Vec y = onehot(s.label, C);
        loss_sum += ce_loss(z, y);
        if (argmax1(z) == s.label) ++correct;
        Vec dl = ce_grad(z, y);
        for (auto& g : dl) g *= inv_b;
        out.head.backward(tape, dl, grads);
      }
      out.head.sgd_step(grads, cfg.optim.lr);
    }
    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = loss_sum / static_cast<double>(train.size());
    stat.train_acc = static_cast<double>(correct) / train.size();
    stat.val_acc = evaluate_images(out.head, ctx.data.val);
    out.epochs.push_back(stat);
  }
  return out;
}

// Soft-target provider for the shared student loop: per epoch, one
// target logit vector per train sample index, or nullopt for plain CE.
using TargetFn =
    std::function<std::vector<Vec>(int epoch)>;

struct StudentLoopOut {
  MlpHead head;
  std::vector<EpochStat> epochs;
};

// The distilled student and the CE baseline run this exact loop; with
// lambda_kd = 0 the gradient collapses to ce_grad, so the two produce
// bit-identical parameter trajectories under equal seeds.
StudentLoopOut run_student_loop(const RunContext& ctx,
                                const TargetFn& targets_for_epoch) {
  const auto& cfg = ctx.cfg;
  const auto& train = ctx.data.train.samples;
  int C = ctx.catalog.num_classes();
  MlpSpec spec{ctx.backend->image_dim(), cfg.models.student_hidden, C};
  StudentLoopOut out{MlpHead(spec, mix_seed(cfg.seeds.init, "student")), {}};
  const std::string phase = "student";
  for (int epoch = 1; epoch <= cfg.optim.epochs; ++epoch) {
    std::vector<Vec> targets;
    if (targets_for_epoch) targets = targets_for_epoch(epoch);
    auto order = epoch_order(train.size(), cfg.seeds.data, phase, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& chunk : chunked(order, cfg.optim.batch_size)) {
      auto grads = out.head.zero_grads();
      double inv_b = 1.0 / static_cast<double>(chunk.size());
      for (std::size_t idx : chunk) {
        const auto& s = train[idx];
        Vec x = augment(s.feature, cfg.models.aug_strong,
                        aug_seed(cfg.seeds.data, phase, epoch, s.sample_id));
        MlpHead::Tape tape;
        Vec z = out.head.forward(x, tape);
        Vec y = onehot(s.label, C);
        Vec dl;
        if (targets_for_epoch) {
          loss_sum += student_total(z, targets[idx], y, cfg.kd);
          dl = student_total_grad(z, targets[idx], y, cfg.kd);
        } else {
          loss_sum += ce_loss(z, y);
          dl = ce_grad(z, y);
        }
        if (argmax1(z) == s.label) ++correct;
        for (auto& g : dl) g *= inv_b;
        out.head.backward(tape, dl, grads);
      }
      out.head.sgd_step(grads, cfg.optim.lr);
    }
    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = loss_sum / static_cast<double>(train.size());
    stat.train_acc = static_cast<double>(correct) / train.size();
    stat.val_acc = evaluate_images(out.head, ctx.data.val);
    out.epochs.push_back(stat);
  }
  return out;
}

void check_dataset_matches(const SyntheticDataset& data,
                           const TrainConfig& cfg,
                           const EncoderBackend& backend,
                           const std::filesystem::path& dir) {
  const auto& meta = data.meta;
  if (meta.value("backend", "") != backend.identity())
    throw CacheIntegrityError("dataset at " + dir.string() +
                              " was generated by a different backend");
  const auto& gen = meta.at("generator");
  if (gen.at("per_class_train").get<int>() != cfg.dataset.per_class_train ||
      gen.at("per_class_val").get<int>() != cfg.dataset.per_class_val ||
      gen.at("imbalance_factor").get<double>() != cfg.dataset.imbalance_factor ||
      gen.at("data_seed").get<std::uint64_t>() != cfg.seeds.data)
    throw CacheIntegrityError("dataset at " + dir.string() +
                              " does not match the configured generator");
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stdev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

void finalize_cell(SweepCell& cell) {
  cell.mean = mean_of(cell.per_seed);
  cell.stdev = stdev_of(cell.per_seed);
}

std::string percent_label(double pct) {
  char buf[32];
  if (pct == std::floor(pct))
    std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(pct));
  else
    std::snprintf(buf, sizeof(buf), "%.1f", pct);
  return buf;
}

}  // namespace

nlohmann::json to_json(const std::vector<EpochStat>& epochs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : epochs)
    arr.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"train_acc", e.train_acc},
                   {"val_acc", e.val_acc}});
  return arr;
}

nlohmann::json RunRecord::to_json() const {
  return {{"phase", phase},
          {"config", config},
          {"metrics", metrics},
          {"timing", timing}};
}

void RunRecord::save(const std::filesystem::path& path) const {
  std::filesystem::create_directories(path.parent_path());
  write_text_file(path, to_json().dump(2) + "\n");
}

std::shared_ptr<EncoderBackend> make_backend(const TrainConfig& cfg,
                                             const ClassCatalog& catalog,
                                             const LexiconTable& lexicon) {
  if (cfg.backend.kind == "mock") {
    SemanticMockSpec spec;
    spec.num_classes = catalog.num_classes();
    spec.dim_text = cfg.backend.dim_text;
    spec.dim_image = cfg.backend.dim_image;
    spec.anchor_seed = cfg.backend.anchor_seed;
    spec.synonym_noise = cfg.backend.synonym_noise;
    spec.distractor_noise = cfg.backend.distractor_noise;
    spec.image_noise = cfg.backend.image_noise;
    return std::make_shared<SemanticMockEncoder>(
        spec, mock_registry_from(catalog, lexicon));
  }
  return std::make_shared<PrecomputedVlmEncoder>(cfg.backend.store);
}

RunContext make_context(const TrainConfig& cfg) {
  validate(cfg);
  RunContext ctx{cfg,
                 nullptr,
                 ClassCatalog::from_names(cfg.catalog_names),
                 cfg.lexicon == "mock" ? builtin_mock_lexicon()
                                       : load_snapshot(cfg.lexicon),
                 PromptTemplateSet(cfg.templates),
                 SyntheticDataset{}};
  ctx.backend = make_backend(cfg, ctx.catalog, ctx.lexicon);
  auto dir = cfg.dataset_dir();
  if (std::filesystem::exists(dir / "manifest.json")) {
    ctx.data = load_dataset(dir);
    check_dataset_matches(ctx.data, cfg, *ctx.backend, dir);
  } else {
    GeneratorSpec gen;
    gen.per_class_train = cfg.dataset.per_class_train;
    gen.per_class_val = cfg.dataset.per_class_val;
    gen.imbalance_factor = cfg.dataset.imbalance_factor;
    gen.data_seed = cfg.seeds.data;
    ctx.data = generate_dataset(*ctx.backend, ctx.catalog.num_classes(), gen);
    save_dataset(ctx.data, dir);
  }
  if (ctx.data.dim != ctx.backend->image_dim())
    throw CacheIntegrityError("dataset dim does not match backend image dim");
  return ctx;
}

double evaluate_images(const MlpHead& head, const DatasetSplit& split) {
  if (split.samples.empty()) throw InputError("evaluate_images: empty split");
  std::size_t correct = 0;
  for (const auto& s : split.samples)
    if (argmax1(head.forward(s.feature)) == s.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(split.samples.size());
}

double evaluate_teacher(const RunContext& ctx, MultimodalTeacher& teacher,
                        const NounBank& bank, const ClusterModel& clusters,
                        const DatasetSplit& split) {
  if (split.samples.empty()) throw InputError("evaluate_teacher: empty split");
  auto sources = assign_sources(split.ids(), ctx.cfg.mix, ctx.cfg.seeds.mix);
  auto perm =
      shuffle_class_names(ctx.catalog, mix_seed(ctx.cfg.seeds.noise, "val"));
  TextContext tctx;
  tctx.catalog = &ctx.catalog;
  tctx.templates = &ctx.templates;
  tctx.backend = ctx.backend.get();
  tctx.bank = &bank;
  tctx.clusters = &clusters;
  tctx.select_mode = ctx.cfg.bank.select;
  tctx.select_seed = ctx.cfg.seeds.mix;
  tctx.noise_names = &perm.name_by_class;
  std::size_t correct = 0;
  for (const auto& s : split.samples) {
    auto r = resolve_text_input(tctx, sources.at(s.sample_id), s.label,
                                s.sample_id, s.feature);
    Vec z = teacher.forward(s.feature, r.vec);
    if (argmax1(z) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.samples.size());
}

UnimodalResult train_unimodal_teachers(const RunContext& ctx) {
  auto t0 = Clock::now();
  const auto& cfg = ctx.cfg;
  int C = ctx.catalog.num_classes();
  MlpSpec spec{ctx.backend->image_dim(), cfg.models.teacher_hidden, C};
  auto strong = train_image_head(ctx, spec, "teacher-strong",
                                 cfg.models.aug_strong,
                                 mix_seed(cfg.seeds.init, "teacher-strong"));
  auto weak = train_image_head(ctx, spec, "teacher-weak",
                               cfg.models.aug_weak,
                               mix_seed(cfg.seeds.init, "teacher-weak"));
  UnimodalResult out{
      UnimodalTeacher{std::move(strong.head), {"strong", cfg.models.aug_strong}},
      UnimodalTeacher{std::move(weak.head), {"weak", cfg.models.aug_weak}},
      {}};
  double ens_val = 0.0;
  {
    std::size_t correct = 0;
    for (const auto& s : ctx.data.val.samples) {
      Vec z = ensemble_logits(
          {out.strong.forward(s.feature), out.weak.forward(s.feature)});
      if (argmax1(z) == s.label) ++correct;
    }
    ens_val = static_cast<double>(correct) / ctx.data.val.samples.size();
  }
  out.record.phase = "teachers";
  out.record.config = xmodal::to_json(cfg);
  out.record.metrics = {
      {"strong",
       {{"epochs", xmodal::to_json(strong.epochs)},
        {"final_val_acc", evaluate_images(out.strong.head, ctx.data.val)},
        {"checksum", out.strong.head.checksum()}}},
      {"weak",
       {{"epochs", xmodal::to_json(weak.epochs)},
        {"final_val_acc", evaluate_images(out.weak.head, ctx.data.val)},
        {"checksum", out.weak.head.checksum()}}},
      {"ensemble_val_acc", ens_val}};
  out.record.timing = {{"wall_seconds", seconds_since(t0)}};
  return out;
}

RelaxResult relax_bank(const RunContext& ctx) {
  auto result = build_bank(ctx.catalog, ctx.lexicon, ctx.templates,
                           *ctx.backend, ctx.data.train.features(),
                           ctx.cfg.bank.M, ctx.cfg.bank.top_k,
                           mix_seed(ctx.cfg.seeds.init, "relax"),
                           ctx.cfg.bank.per_class_limit);
  result.bank.learnable = ctx.cfg.bank.learnable;
  return result;
}

TeacherXResult train_multimodal_teacher(const RunContext& ctx, NounBank bank,
                                        ClusterModel clusters) {
  auto t0 = Clock::now();
  const auto& cfg = ctx.cfg;
  const auto& train = ctx.data.train.samples;
  int C = ctx.catalog.num_classes();
  int d_img = ctx.backend->image_dim();
  int d_txt = ctx.backend->text_dim();
  int d_in = cfg.models.teacher_x_input == TeacherInputMode::kConcat
                 ? d_img + d_txt
                 : d_txt;
  MlpSpec spec{d_in, cfg.models.teacher_x_hidden, C};
  TeacherXResult out{
      MultimodalTeacher{MlpHead(spec, mix_seed(cfg.seeds.init, "teacher-x")),
                        cfg.models.teacher_x_input, d_img, d_txt},
      std::move(bank), std::move(clusters), {}};
  auto sources = assign_sources(ctx.data.train.ids(), cfg.mix, cfg.seeds.mix);

  std::vector<Vec> gt_text(static_cast<std::size_t>(C));
  for (int c = 1; c <= C; ++c)
    gt_text[static_cast<std::size_t>(c - 1)] =
        prompt_embedding(ctx.catalog.name(c), ctx.templates, *ctx.backend);

  std::vector<EpochStat> epochs;
  const std::string phase = "teacher-x";
  std::size_t text_off =
      cfg.models.teacher_x_input == TeacherInputMode::kConcat
          ? static_cast<std::size_t>(d_img)
          : 0;
  for (int epoch = 1; epoch <= cfg.optim.epochs; ++epoch) {
    // Fresh permutation per epoch: a noise name is never a stable class
    // signal the head could invert.
    auto perm = shuffle_class_names(
        ctx.catalog, mix_seed(cfg.seeds.noise, "epoch:" + std::to_string(epoch)));
    TextContext tctx;
    tctx.catalog = &ctx.catalog;
    tctx.templates = &ctx.templates;
    tctx.backend = ctx.backend.get();
    tctx.bank = &out.bank;
    tctx.clusters = &out.clusters;
    tctx.select_mode = cfg.bank.select;
    // A sample's source never flips, but the drawn cluster member may:
    // re-seeding per epoch keeps one unlucky random draw from pinning a
    // sample to a weak noun for the whole run. Evaluation stays on the
    // epoch-free seed.
    tctx.select_seed =
        mix_seed(cfg.seeds.mix, "select-epoch:" + std::to_string(epoch));
    tctx.noise_names = &perm.name_by_class;

    auto order = epoch_order(train.size(), cfg.seeds.data, phase, epoch);
    double ce_sum = 0.0, hier_sum = 0.0, cos_sum = 0.0;
    std::size_t wn_seen = 0, correct = 0;
    for (const auto& chunk : chunked(order, cfg.optim.batch_size)) {
      auto grads = out.teacher.head.zero_grads();
      double inv_b = 1.0 / static_cast<double>(chunk.size());
      std::size_t wn_in_batch = 0;
      for (std::size_t idx : chunk)
        if (sources.at(train[idx].sample_id) == TextSource::kWn) ++wn_in_batch;
      double inv_k = wn_in_batch ? 1.0 / static_cast<double>(wn_in_batch) : 0.0;
      // Deterministic accumulation order for the shared bank entries.
      std::map<std::size_t, Vec> bank_grads;
      for (std::size_t idx : chunk) {
        const auto& s = train[idx];
        TextSource src = sources.at(s.sample_id);
        Vec img = augment(s.feature, cfg.models.aug_weak,
                          aug_seed(cfg.seeds.data, phase, epoch, s.sample_id));
        // Selection keys on the clean feature; only the head input is
        // augmented.
        auto r = resolve_text_input(tctx, src, s.label, s.sample_id, s.feature);
        MlpHead::Tape tape;
        Vec z = out.teacher.forward(img, r.vec, tape);
        Vec y = onehot(s.label, C);
        bool wn = src == TextSource::kWn;
        const Vec& n_gt = gt_text[static_cast<std::size_t>(s.label - 1)];
        Vec n_pre;
        if (wn)
          n_pre = to_f64(out.bank.entries[*r.bank_index].pretrained.values);
        auto terms = teacher_total(z, y, n_gt, r.vec, n_pre, cfg.kd, wn);
        ce_sum += terms.ce;
        if (wn) {
          hier_sum += terms.hier;
          cos_sum += terms.cosreg;
          ++wn_seen;
        }
        if (argmax1(z) == s.label) ++correct;
        Vec dl = ce_grad(z, y);
        for (auto& g : dl) g *= inv_b;
        Vec dinput = out.teacher.head.backward(tape, dl, grads);
        if (wn && out.bank.learnable) {
          Vec g(static_cast<std::size_t>(d_txt));
          for (int t = 0; t < d_txt; ++t)
            g[static_cast<std::size_t>(t)] =
                dinput[text_off + static_cast<std::size_t>(t)];
          Vec reg = teacher_grad_relaxed(n_gt, r.vec, n_pre, cfg.kd);
          for (int t = 0; t < d_txt; ++t)
            g[static_cast<std::size_t>(t)] +=
                reg[static_cast<std::size_t>(t)] * inv_k;
          auto [it, fresh] =
              bank_grads.try_emplace(*r.bank_index, Vec(g.size(), 0.0));
          for (std::size_t t = 0; t < g.size(); ++t) it->second[t] += g[t];
          (void)fresh;
        }
      }
      out.teacher.head.sgd_step(grads, cfg.optim.lr);
      for (const auto& [bi, g] : bank_grads) {
        auto& cur = out.bank.entries[bi].current;
        for (std::size_t t = 0; t < cur.size(); ++t)
          cur[t] -= cfg.optim.bank_lr * g[t];
        double nrm = l2_norm(cur);
        if (nrm <= 0.0)
          throw Error("bank update drove an entry to the zero vector");
        for (auto& v : cur) v /= nrm;
      }
    }
    EpochStat stat;
    stat.epoch = epoch;
    double n = static_cast<double>(train.size());
    stat.train_loss =
        ce_sum / n +
        (wn_seen ? cfg.kd.lambda_hier * hier_sum / static_cast<double>(wn_seen) +
                       cfg.kd.lambda_cosreg * cos_sum /
                           static_cast<double>(wn_seen)
                 : 0.0);
    stat.train_acc = static_cast<double>(correct) / n;
    stat.val_acc =
        evaluate_teacher(ctx, out.teacher, out.bank, out.clusters, ctx.data.val);
    epochs.push_back(stat);
  }

  double drift = 0.0;
  for (const auto& e : out.bank.entries)
    drift += cosine(to_f64(e.pretrained.values), e.current);
  if (!out.bank.entries.empty())
    drift /= static_cast<double>(out.bank.entries.size());

  out.record.phase = "teacher-x";
  out.record.config = xmodal::to_json(cfg);
  out.record.metrics = {
      {"epochs", xmodal::to_json(epochs)},
      {"final_val_acc",
       evaluate_teacher(ctx, out.teacher, out.bank, out.clusters, ctx.data.val)},
      {"mix_realized", mix_counts(sources)},
      {"bank",
       {{"entries", out.bank.entries.size()},
        {"learnable", out.bank.learnable},
        {"drift_mean_cos", drift},
        {"checksum", bank_checksum(out.bank)}}},
      {"checksum", out.teacher.head.checksum()},
      {"norm_warnings", out.teacher.norm_warnings}};
  out.record.timing = {{"wall_seconds", seconds_since(t0)}};
  return out;
}

DistillResult distill_student(const RunContext& ctx,
                              const UnimodalTeacher* strong,
                              const UnimodalTeacher* weak,
                              MultimodalTeacher& teacher_x,
                              const NounBank& bank,
                              const ClusterModel& clusters) {
  auto t0 = Clock::now();
  const auto& cfg = ctx.cfg;
  bool use_members = cfg.models.distill_teachers == DistillTeachers::kBoth;
  if (use_members && (!strong || !weak))
    throw ConfigError("distill: both unimodal members required in mode \"both\"");
  const auto& train = ctx.data.train.samples;
  auto sources = assign_sources(ctx.data.train.ids(), cfg.mix, cfg.seeds.mix);

  std::string tx_sum_before = teacher_x.head.checksum();
  std::string bank_sum_before = bank_checksum(bank);

  TargetFn targets = [&](int epoch) {
    auto perm = shuffle_class_names(
        ctx.catalog,
        mix_seed(cfg.seeds.noise, "distill:" + std::to_string(epoch)));
    TextContext tctx;
    tctx.catalog = &ctx.catalog;
    tctx.templates = &ctx.templates;
    tctx.backend = ctx.backend.get();
    tctx.bank = &bank;
    tctx.clusters = &clusters;
    tctx.select_mode = cfg.bank.select;
    tctx.select_seed =
        mix_seed(cfg.seeds.mix, "select-epoch:" + std::to_string(epoch));
    tctx.noise_names = &perm.name_by_class;
    std::vector<Vec> z_bar(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto& s = train[i];
      auto r = resolve_text_input(tctx, sources.at(s.sample_id), s.label,
                                  s.sample_id, s.feature);
      Vec z_tx = teacher_x.forward(s.feature, r.vec);
      if (use_members) {
        Vec z_tm = ensemble_logits(
            {strong->forward(s.feature), weak->forward(s.feature)});
        z_bar[i] = average_logits(z_tm, z_tx);
      } else {
        z_bar[i] = std::move(z_tx);
      }
    }
    return z_bar;
  };

  auto loop = run_student_loop(ctx, targets);

  if (teacher_x.head.checksum() != tx_sum_before ||
      bank_checksum(bank) != bank_sum_before)
    throw Error("distill: teacher state changed during distillation");

  DistillResult out{Student{std::move(loop.head), {"strong", cfg.models.aug_strong}},
                    {}};
  out.record.phase = "distill";
  out.record.config = xmodal::to_json(cfg);
  out.record.metrics = {
      {"epochs", xmodal::to_json(loop.epochs)},
      {"final_val_acc", evaluate_images(out.student.head, ctx.data.val)},
      {"mix_realized", mix_counts(sources)},
      {"teachers",
       {{"mode", distill_teachers_name(cfg.models.distill_teachers)},
        {"teacher_x_checksum", tx_sum_before},
        {"bank_checksum", bank_sum_before},
        {"freeze_check", "ok"}}},
      {"checksum", out.student.head.checksum()}};
  if (use_members) {
    out.record.metrics["teachers"]["strong_checksum"] = strong->head.checksum();
    out.record.metrics["teachers"]["weak_checksum"] = weak->head.checksum();
  }
  out.record.timing = {{"wall_seconds", seconds_since(t0)}};
  return out;
}

DistillResult train_student_baseline(const RunContext& ctx) {
  auto t0 = Clock::now();
  auto loop = run_student_loop(ctx, nullptr);
  DistillResult out{
      Student{std::move(loop.head), {"strong", ctx.cfg.models.aug_strong}}, {}};
  out.record.phase = "baseline";
  out.record.config = xmodal::to_json(ctx.cfg);
  out.record.metrics = {
      {"epochs", xmodal::to_json(loop.epochs)},
      {"final_val_acc", evaluate_images(out.student.head, ctx.data.val)},
      {"checksum", out.student.head.checksum()}};
  out.record.timing = {{"wall_seconds", seconds_since(t0)}};
  return out;
}

PipelineResult run_pipeline(const RunContext& ctx, bool persist) {
  auto members = train_unimodal_teachers(ctx);
  auto relax = relax_bank(ctx);
  auto teacher_x = train_multimodal_teacher(ctx, std::move(relax.bank),
                                            std::move(relax.clusters));
  RunContext full = ctx;
  full.cfg.models.distill_teachers = DistillTeachers::kBoth;
  auto student_full =
      distill_student(full, &members.strong, &members.weak, teacher_x.teacher,
                      teacher_x.bank, teacher_x.clusters);
  RunContext tx_only = ctx;
  tx_only.cfg.models.distill_teachers = DistillTeachers::kTextTeacherOnly;
  auto student_tx =
      distill_student(tx_only, nullptr, nullptr, teacher_x.teacher,
                      teacher_x.bank, teacher_x.clusters);
  PipelineResult out{std::move(members), std::move(teacher_x),
                     std::move(student_full), std::move(student_tx), 0, 0, 0};
  out.teacher_val =
      out.teacher_x.record.metrics.at("final_val_acc").get<double>();
  out.student_full_val =
      out.student_full.record.metrics.at("final_val_acc").get<double>();
  out.student_tx_val =
      out.student_tx.record.metrics.at("final_val_acc").get<double>();
  if (persist) {
    const auto& base = ctx.cfg.out;
    save_unimodal(out.members.strong, "strong", base / "teachers" / "strong");
    save_unimodal(out.members.weak, "weak", base / "teachers" / "weak");
    save_bank(out.teacher_x.bank, out.teacher_x.clusters, base / "bank");
    save_teacher_x(out.teacher_x.teacher, ctx.cfg, base / "teacher_x");
    save_student(out.student_full.student, base / "student");
    save_student(out.student_tx.student, base / "student_tx");
    out.members.record.save(base / "records" / "teachers.json");
    out.teacher_x.record.save(base / "records" / "teacher_x.json");
    out.student_full.record.save(base / "records" / "student.json");
    out.student_tx.record.save(base / "records" / "student_tx.json");
    nlohmann::json summary = {{"teacher_val_acc", out.teacher_val},
                              {"student_val_acc", out.student_full_val},
                              {"student_tx_val_acc", out.student_tx_val}};
    write_text_file(base / "summary.json", summary.dump(2) + "\n");
  }
  return out;
}

void save_unimodal(const UnimodalTeacher& t, const std::string& role,
                   const std::filesystem::path& dir) {
  save_head(t.head, dir,
            {{"kind", "unimodal"},
             {"role", role},
             {"aug_strength", t.aug.strength}});
}

UnimodalTeacher load_unimodal(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  MlpHead head = load_head(dir, &manifest);
  UnimodalTeacher t{std::move(head), {}};
  t.aug.name = manifest.value("role", "none");
  t.aug.strength = manifest.value("aug_strength", 0.0);
  return t;
}

void save_teacher_x(const MultimodalTeacher& t, const TrainConfig& cfg,
                    const std::filesystem::path& dir) {
  save_head(t.head, dir,
            {{"kind", "teacher-x"},
             {"input_mode", input_mode_name(t.mode)},
             {"d_img", t.d_img},
             {"d_txt", t.d_txt},
             {"config", xmodal::to_json(cfg)}});
}

MultimodalTeacher load_teacher_x(const std::filesystem::path& dir,
                                 nlohmann::json* manifest_out) {
  nlohmann::json manifest;
  MlpHead head = load_head(dir, &manifest);
  if (manifest.value("kind", "") != "teacher-x")
    throw ConfigError("load_teacher_x: " + dir.string() +
                      " is not a fused-teacher checkpoint");
  MultimodalTeacher t{std::move(head),
                      parse_input_mode(manifest.at("input_mode").get<std::string>()),
                      manifest.at("d_img").get<int>(),
                      manifest.at("d_txt").get<int>()};
  if (manifest_out) *manifest_out = manifest;
  return t;
}

void save_student(const Student& s, const std::filesystem::path& dir) {
  save_head(s.head, dir,
            {{"kind", "student"}, {"aug_strength", s.aug.strength}});
}

Student load_student(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  MlpHead head = load_head(dir, &manifest);
  Student s{std::move(head), {}};
  s.aug.strength = manifest.value("aug_strength", 0.0);
  return s;
}

TextMixPolicy axis_policy(const std::string& axis, double percent) {
  if (percent < 0.0 || percent > 100.0)
    throw ConfigError("sweep: points must lie in [0, 100]");
  double f = percent / 100.0;
  TextMixPolicy m;
  if (axis == "wn") {
    m.p_gt = 1.0 - f;
    m.p_wn = f;
    m.p_noise = 0.0;
  } else if (axis == "noise") {
    m.p_gt = 1.0 - f;
    m.p_wn = 0.0;
    m.p_noise = f;
  } else {
    throw ConfigError("sweep: axis must be \"wn\" or \"noise\"");
  }
  return m;
}

SweepResult run_sweep(const TrainConfig& base, const std::string& axis,
                      const std::vector<double>& points_percent, int reps,
                      const std::filesystem::path& out_dir) {
  if (points_percent.empty()) throw ConfigError("sweep: no points given");
  if (reps < 1) throw ConfigError("sweep: reps must be >= 1");
  SweepResult res{axis, reps, {}};
  std::filesystem::path work =
      out_dir.empty() ? base.out / ("sweep-" + axis) : out_dir;
  for (double pct : points_percent) {
    SweepRow row;
    row.percent = pct;
    row.policy = axis_policy(axis, pct);
    for (int rep = 0; rep < reps && !row.failed; ++rep) {
      TrainConfig cfg = with_rep(base, rep);
      cfg.mix = row.policy;
      cfg.out = work / ("point-" + percent_label(pct)) /
                ("rep-" + std::to_string(rep));
      // Points of one rep share the data seed, so they share one dataset.
      cfg.dataset.dir = work / ("data-rep" + std::to_string(rep));
      try {
        RunContext ctx = make_context(cfg);
        auto pr = run_pipeline(ctx, !out_dir.empty());
        row.teacher.per_seed.push_back(pr.teacher_val);
        row.student_tx.per_seed.push_back(pr.student_tx_val);
        row.student_full.per_seed.push_back(pr.student_full_val);
      } catch (const Error& e) {
        row.failed = true;
        row.error = e.what();
      }
    }
    finalize_cell(row.teacher);
    finalize_cell(row.student_tx);
    finalize_cell(row.student_full);
    res.rows.push_back(std::move(row));
  }
  if (!out_dir.empty()) {
    std::string csv =
        "percent,p_gt,p_wn,p_noise,teacher_mean,teacher_std,"
        "student_tx_mean,student_tx_std,student_full_mean,student_full_std,"
        "failed,error\n";
    for (const auto& row : res.rows) {
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "%g,%g,%g,%g,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d,",
                    row.percent, row.policy.p_gt, row.policy.p_wn,
                    row.policy.p_noise, row.teacher.mean, row.teacher.stdev,
                    row.student_tx.mean, row.student_tx.stdev,
                    row.student_full.mean, row.student_full.stdev,
                    row.failed ? 1 : 0);
      csv += buf;
      csv += row.error + "\n";
    }
    write_text_file(work / "table.csv", csv);
  }
  return res;
}

AssembledEval assemble_eval_inputs(const RunContext& ctx,
                                   MultimodalTeacher& teacher,
                                   const NounBank& bank,
                                   const ClusterModel& clusters,
                                   const DatasetSplit& split) {
  auto sources = assign_sources(split.ids(), ctx.cfg.mix, ctx.cfg.seeds.mix);
  auto perm =
      shuffle_class_names(ctx.catalog, mix_seed(ctx.cfg.seeds.noise, "val"));
  TextContext tctx;
  tctx.catalog = &ctx.catalog;
  tctx.templates = &ctx.templates;
  tctx.backend = ctx.backend.get();
  tctx.bank = &bank;
  tctx.clusters = &clusters;
  tctx.select_mode = ctx.cfg.bank.select;
  tctx.select_seed = ctx.cfg.seeds.mix;
  tctx.noise_names = &perm.name_by_class;
  AssembledEval out;
  out.d_img = teacher.mode == TeacherInputMode::kConcat ? teacher.d_img : 0;
  out.d_txt = teacher.d_txt;
  for (const auto& s : split.samples) {
    TextSource src = sources.at(s.sample_id);
    auto r = resolve_text_input(tctx, src, s.label, s.sample_id, s.feature);
    out.inputs.push_back(teacher.assemble(s.feature, r.vec));
    out.labels.push_back(s.label);
    out.sources.push_back(src);
  }
  return out;
}

}  // namespace xmodal
