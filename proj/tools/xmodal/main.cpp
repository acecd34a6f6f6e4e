#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "reproduce.hpp"
#include "xmodal/attribution.hpp"
#include "xmodal/common.hpp"
#include "xmodal/embedding_cache.hpp"
#include "xmodal/recordio.hpp"
#include "xmodal/reports.hpp"
#include "xmodal/shipped.hpp"
#include "xmodal/training.hpp"

namespace {

using namespace xmodal;

TrainConfig load_or_shipped(const std::string& path) {
  if (path.empty()) return shipped_leakage_config();
  return load_train_config(path);
}

ClassCatalog catalog_from(const TrainConfig& cfg, const std::string& override_path) {
  if (!override_path.empty()) return ClassCatalog::load(override_path);
  return ClassCatalog::from_names(cfg.catalog_names);
}

LexiconTable lexicon_from(const std::string& spec) {
  if (spec.empty() || spec == "mock") return builtin_mock_lexicon();
  return load_snapshot(spec);
}

void cmd_embed(const std::string& config_path, const std::string& backend_kind,
               const std::string& cache_dir,
               const std::vector<std::string>& texts, int image_class,
               const std::string& image_id) {
  TrainConfig cfg = load_or_shipped(config_path);
  if (!backend_kind.empty()) cfg.backend.kind = backend_kind;
  if (texts.empty() && image_class == 0)
    throw ConfigError("embed: pass --text and/or --image-class/--image-id");
  auto catalog = ClassCatalog::from_names(cfg.catalog_names);
  auto lexicon = lexicon_from(cfg.lexicon);
  auto backend = make_backend(cfg, catalog, lexicon);
  EmbeddingCache cache(cache_dir);
  for (const auto& prompt : texts) {
    std::string key = EmbeddingCache::text_key(prompt);
    bool hit = cache.get(backend->identity(), key).has_value();
    auto vec = cache.get_or_encode(*backend, key,
                                   [&] { return backend->encode_text(prompt); });
    nlohmann::json line = {{"kind", "text"},
                           {"prompt", prompt},
                           {"key", key},
                           {"dim", vec.dim()},
                           {"norm", vec.norm()},
                           {"cache_hit", hit}};
    std::cout << line.dump() << "\n";
  }
  if (image_class != 0) {
    ImageInput input;
    input.sample_id = image_id.empty() ? "0" : image_id;
    input.class_id = image_class;
    input.sample_key = mix_seed(cfg.seeds.data, "cli:" + input.sample_id);
    std::string key = EmbeddingCache::image_key(input);
    bool hit = cache.get(backend->identity(), key).has_value();
    auto vec = cache.get_or_encode(
        *backend, key, [&] { return backend->encode_image(input); });
    nlohmann::json line = {{"kind", "image"},
                           {"sample_id", input.sample_id},
                           {"class_id", image_class},
                           {"key", key},
                           {"dim", vec.dim()},
                           {"norm", vec.norm()},
                           {"cache_hit", hit}};
    std::cout << line.dump() << "\n";
  }
}

void cmd_lexicon(const std::string& snapshot, const std::string& catalog_path,
                 int per_class_limit) {
  TrainConfig cfg = shipped_leakage_config();
  auto catalog = catalog_from(cfg, catalog_path);
  auto table = lexicon_from(snapshot);
  HarvestReport report;
  auto candidates = harvest_candidates(catalog, table, per_class_limit, &report);
  std::vector<std::vector<std::string>> rows;
  for (const auto& [name, count] : report.per_class_counts)
    rows.push_back({name, std::to_string(count)});
  rows.push_back({"<global pool>", std::to_string(report.global_pool_count)});
  std::cout << format_table({"class", "candidates"}, rows);
  std::cout << "total unique candidates: " << candidates.nouns.size() << "\n";
  for (const auto& noun : candidates.nouns)
    if (catalog.contains_name(noun))
      throw Error("lexicon: catalog name leaked into candidates: " + noun);
  std::cout << "class-name exclusion: ok\n";
  for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
}

void cmd_relax(const std::string& config_path, const std::string& catalog_path,
               const std::string& snapshot, const std::string& backend_kind,
               int M, int top_k, std::uint64_t seed, bool seed_set,
               const std::string& out) {
  TrainConfig cfg = load_or_shipped(config_path);
  if (!catalog_path.empty())
    cfg.catalog_names = ClassCatalog::load(catalog_path).names();
  if (!snapshot.empty()) cfg.lexicon = snapshot;
  if (!backend_kind.empty()) cfg.backend.kind = backend_kind;
  if (M > 0) cfg.bank.M = M;
  if (top_k > 0) cfg.bank.top_k = top_k;
  if (seed_set) cfg.seeds.init = seed;
  RunContext ctx = make_context(cfg);
  auto result = relax_bank(ctx);
  std::filesystem::path bank_dir =
      out.empty() ? cfg.out / "bank" : std::filesystem::path(out);
  save_bank(result.bank, result.clusters, bank_dir);

  std::vector<std::vector<std::string>> rows;
  for (const auto& e : result.bank.entries) {
    double sim = dot(result.clusters.centers[static_cast<std::size_t>(e.cluster_id)],
                     to_f64(e.pretrained.values));
    rows.push_back({std::to_string(e.cluster_id), e.noun,
                    format_double(sim, 4)});
  }
  std::string report = format_table({"cluster", "noun", "similarity"}, rows);
  std::cout << report;
  std::cout << "bank entries: " << result.bank.entries.size() << ", clusters: "
            << result.clusters.centers.size() << ", inertia: "
            << format_double(result.clusters.inertia, 4) << "\n";
  for (const auto& w : result.warnings) std::cout << "warning: " << w << "\n";
  write_text_file(bank_dir / "report.txt", report);
  std::cout << "bank written to " << bank_dir.string() << "\n";
}

void cmd_gen_data(const std::string& config_path, const std::string& out) {
  TrainConfig cfg = load_or_shipped(config_path);
  if (!out.empty()) cfg.dataset.dir = out;
  RunContext ctx = make_context(cfg);
  auto train_counts = class_counts(ctx.data.train, ctx.data.num_classes);
  auto val_counts = class_counts(ctx.data.val, ctx.data.num_classes);
  std::vector<std::vector<std::string>> rows;
  for (int c = 1; c <= ctx.data.num_classes; ++c)
    rows.push_back({ctx.catalog.name(c),
                    std::to_string(train_counts[static_cast<std::size_t>(c - 1)]),
                    std::to_string(val_counts[static_cast<std::size_t>(c - 1)])});
  std::cout << format_table({"class", "train", "val"}, rows);
  std::cout << "dim: " << ctx.data.dim << "\n";
  std::cout << "dataset at " << cfg.dataset_dir().string() << "\n";
}

void cmd_train_teachers(const std::string& config_path) {
  TrainConfig cfg = load_train_config(config_path);
  RunContext ctx = make_context(cfg);
  auto res = train_unimodal_teachers(ctx);
  save_unimodal(res.strong, "strong", cfg.out / "teachers" / "strong");
  save_unimodal(res.weak, "weak", cfg.out / "teachers" / "weak");
  res.record.save(cfg.out / "records" / "teachers.json");
  std::cout << "strong val: "
            << format_accuracy(
                   res.record.metrics["strong"]["final_val_acc"].get<double>())
            << ", weak val: "
            << format_accuracy(
                   res.record.metrics["weak"]["final_val_acc"].get<double>())
            << ", ensemble val: "
            << format_accuracy(
                   res.record.metrics["ensemble_val_acc"].get<double>())
            << "\n";
}

void cmd_train_teacher_x(const std::string& config_path) {
  TrainConfig cfg = load_train_config(config_path);
  RunContext ctx = make_context(cfg);
  auto relax = relax_bank(ctx);
  auto res = train_multimodal_teacher(ctx, std::move(relax.bank),
                                      std::move(relax.clusters));
  save_bank(res.bank, res.clusters, cfg.out / "bank");
  save_teacher_x(res.teacher, cfg, cfg.out / "teacher_x");
  res.record.save(cfg.out / "records" / "teacher_x.json");
  std::cout << "teacher val: "
            << format_accuracy(res.record.metrics["final_val_acc"].get<double>())
            << ", bank drift mean cos: "
            << format_double(
                   res.record.metrics["bank"]["drift_mean_cos"].get<double>(), 4)
            << "\n";
}

void cmd_distill(const std::string& config_path) {
  TrainConfig cfg = load_train_config(config_path);
  RunContext ctx = make_context(cfg);
  auto tx_dir = cfg.out / "teacher_x";
  if (!std::filesystem::exists(tx_dir / "manifest.json"))
    throw Error("distill: no fused-teacher checkpoint at " + tx_dir.string() +
                "; run train-teacher-x first");
  auto teacher_x = load_teacher_x(tx_dir);
  auto [bank, clusters] = load_bank(cfg.out / "bank");
  DistillResult res = [&] {
    if (cfg.models.distill_teachers == DistillTeachers::kBoth) {
      auto strong_dir = cfg.out / "teachers" / "strong";
      if (!std::filesystem::exists(strong_dir / "manifest.json"))
        throw Error("distill: no unimodal checkpoints under " +
                    (cfg.out / "teachers").string() +
                    "; run train-teachers first");
      auto strong = load_unimodal(strong_dir);
      auto weak = load_unimodal(cfg.out / "teachers" / "weak");
      return distill_student(ctx, &strong, &weak, teacher_x, bank, clusters);
    }
    return distill_student(ctx, nullptr, nullptr, teacher_x, bank, clusters);
  }();
  save_student(res.student, cfg.out / "student");
  res.record.save(cfg.out / "records" / "student.json");
  std::cout << "student val: "
            << format_accuracy(res.record.metrics["final_val_acc"].get<double>())
            << "\n";
}

void cmd_sweep(const std::string& config_path, const std::string& axis,
               const std::vector<double>& points, int seeds,
               const std::string& out) {
  TrainConfig cfg = load_train_config(config_path);
  std::filesystem::path out_dir =
      out.empty() ? cfg.out / ("sweep-" + axis) : std::filesystem::path(out);
  auto res = run_sweep(cfg, axis, points, seeds, out_dir);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<double, double>> t_series, stx_series, sfull_series;
  bool any_failed = false;
  for (const auto& row : res.rows) {
    rows.push_back({format_double(row.percent, 0),
                    format_accuracy(row.teacher.mean),
                    format_accuracy(row.student_tx.mean),
                    format_accuracy(row.student_full.mean),
                    row.failed ? row.error : "ok"});
    t_series.push_back({row.percent, row.teacher.mean});
    stx_series.push_back({row.percent, row.student_tx.mean});
    sfull_series.push_back({row.percent, row.student_full.mean});
    any_failed = any_failed || row.failed;
  }
  std::cout << format_table(
      {axis + " %", "teacher", "student_tx", "student_full", "status"}, rows);
  write_series(out_dir / "teacher.dat", t_series);
  write_series(out_dir / "student_tx.dat", stx_series);
  write_series(out_dir / "student_full.dat", sfull_series);
  std::cout << "sweep artifacts in " << out_dir.string() << "\n";
  if (any_failed) throw Error("sweep: at least one point failed");
}

void cmd_attribute(const std::string& checkpoint, const std::string& eval_dir,
                   const std::string& bank_dir_opt, int n_steps,
                   const std::string& out_file) {
  nlohmann::json manifest;
  auto teacher = load_teacher_x(checkpoint, &manifest);
  if (!manifest.contains("config"))
    throw ConfigError("attribute: checkpoint manifest carries no config");
  TrainConfig cfg = parse_train_config(manifest["config"]);
  cfg.dataset.dir = eval_dir;
  RunContext ctx = make_context(cfg);
  std::filesystem::path bank_dir =
      bank_dir_opt.empty()
          ? std::filesystem::path(checkpoint).parent_path() / "bank"
          : std::filesystem::path(bank_dir_opt);
  auto [bank, clusters] = load_bank(bank_dir);
  auto eval = assemble_eval_inputs(ctx, teacher, bank, clusters, ctx.data.val);
  auto overall =
      mean_shares(teacher.head, eval.inputs, eval.d_img, eval.d_txt, n_steps);

  nlohmann::json by_source = nlohmann::json::object();
  std::vector<std::vector<std::string>> csv_rows;
  std::vector<std::pair<double, double>> series;
  csv_rows.push_back({"all", format_double(overall.image_share, 6),
                      format_double(overall.text_share, 6),
                      std::to_string(overall.count)});
  series.push_back({0.0, overall.image_share});
  double source_idx = 1.0;
  for (TextSource src :
       {TextSource::kGt, TextSource::kWn, TextSource::kNoise}) {
    std::vector<Vec> group;
    for (std::size_t i = 0; i < eval.inputs.size(); ++i)
      if (eval.sources[i] == src) group.push_back(eval.inputs[i]);
    if (group.empty()) continue;
    auto stats =
        mean_shares(teacher.head, group, eval.d_img, eval.d_txt, n_steps);
    by_source[text_source_name(src)] = {{"image_share", stats.image_share},
                                        {"text_share", stats.text_share},
                                        {"count", stats.count}};
    csv_rows.push_back({text_source_name(src),
                        format_double(stats.image_share, 6),
                        format_double(stats.text_share, 6),
                        std::to_string(stats.count)});
    series.push_back({source_idx, stats.image_share});
    source_idx += 1.0;
  }
  nlohmann::json report = {
      {"n_steps", n_steps},
      {"checkpoint", checkpoint},
      {"overall",
       {{"image_share", overall.image_share},
        {"text_share", overall.text_share},
        {"max_rel_residual", overall.max_rel_residual},
        {"count", overall.count}}},
      {"by_source", by_source}};
  std::filesystem::path out_path =
      out_file.empty() ? std::filesystem::path("report.json")
                       : std::filesystem::path(out_file);
  if (out_path.has_parent_path())
    std::filesystem::create_directories(out_path.parent_path());
  write_text_file(out_path, report.dump(2) + "\n");
  auto stem = out_path.parent_path() / out_path.stem();
  write_csv(stem.string() + "_shares.csv",
            {"group", "image_share", "text_share", "count"}, csv_rows);
  write_series(stem.string() + "_shares.dat", series);
  std::cout << "image share: " << format_double(overall.image_share, 4)
            << ", text share: " << format_double(overall.text_share, 4)
            << " over " << overall.count << " samples\n";
  std::cout << "report written to " << out_path.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossmodal distillation workbench"};
  app.require_subcommand(1);

  std::string config_path, backend_kind, cache_dir, snapshot, catalog_path,
      out, axis = "wn", checkpoint, eval_dir, bank_dir, what, image_id;
  std::vector<std::string> texts;
  std::vector<double> points{0, 20, 50, 80, 100};
  int per_class_limit = 20, M = 0, top_k = 0, seeds = 1, n_steps = 64,
      image_class = 0;
  std::uint64_t seed = 0;

  auto* embed = app.add_subcommand("embed", "encode prompts/images via cache");
  embed->add_option("--config", config_path, "config file (default: builtin)");
  embed->add_option("--backend", backend_kind, "mock|vlm override");
  embed->add_option("--cache-dir", cache_dir, "embedding cache root")
      ->required();
  embed->add_option("--text", texts, "prompt to encode (repeatable)");
  embed->add_option("--image-class", image_class, "class id for a mock image");
  embed->add_option("--image-id", image_id, "sample id for a mock image");

  auto* lex = app.add_subcommand("lexicon", "harvest relaxation candidates");
  lex->add_option("--snapshot", snapshot, "snapshot TSV (default: mock table)");
  lex->add_option("--catalog", catalog_path, "class list file");
  lex->add_option("--per-class-limit", per_class_limit, "cap per class");

  auto* relax = app.add_subcommand("relax", "build the relaxed noun bank");
  relax->add_option("--config", config_path, "config file (default: builtin)");
  relax->add_option("--catalog", catalog_path, "class list file override");
  relax->add_option("--snapshot", snapshot, "lexicon snapshot override");
  relax->add_option("--backend", backend_kind, "mock|vlm override");
  relax->add_option("--M", M, "cluster count override");
  relax->add_option("--top-k", top_k, "per-cluster keep count override");
  auto* seed_opt =
      relax->add_option("--seed", seed, "clustering seed stream override");
  relax->add_option("--out", out, "bank directory (default: <out>/bank)");

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  gen->add_option("--config", config_path, "config file (default: builtin)");
  gen->add_option("--out", out, "dataset directory override");

  auto* tt = app.add_subcommand("train-teachers", "train unimodal members");
  tt->add_option("config", config_path, "config file")->required();

  auto* ttx = app.add_subcommand("train-teacher-x", "train the fused teacher");
  ttx->add_option("config", config_path, "config file")->required();

  auto* dis = app.add_subcommand("distill", "distill the image-only student");
  dis->add_option("config", config_path, "config file")->required();

  auto* sweep = app.add_subcommand("sweep", "mix-proportion sweep");
  sweep->add_option("config", config_path, "config file")->required();
  sweep->add_option("--axis", axis, "wn|noise")->required();
  sweep->add_option("--points", points, "percent points")
      ->delimiter(',');
  sweep->add_option("--seeds", seeds, "repeats per point (default 1)");
  sweep->add_option("--out", out, "output directory");

  auto* attr = app.add_subcommand("attribute", "modality attribution report");
  attr->add_option("--checkpoint", checkpoint, "fused-teacher checkpoint dir")
      ->required();
  attr->add_option("--eval", eval_dir, "dataset directory")->required();
  attr->add_option("--bank", bank_dir, "bank directory (default: sibling)");
  attr->add_option("--n-steps", n_steps, "integration steps");
  attr->add_option("--out", out, "report path (default report.json)");

  auto* rep = app.add_subcommand("reproduce", "pre-wired experiment chains");
  rep->add_option("what", what, "table2|fig2|table3|fig3")->required();
  rep->add_option("--config", config_path, "config file (default: builtin)");
  rep->add_option("--seeds", seeds, "repeats per point (default 5)")
      ->default_val(5);
  rep->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
    if (embed->parsed())
      cmd_embed(config_path, backend_kind, cache_dir, texts, image_class,
                image_id);
    else if (lex->parsed())
      cmd_lexicon(snapshot, catalog_path, per_class_limit);
    else if (relax->parsed())
      cmd_relax(config_path, catalog_path, snapshot, backend_kind, M, top_k,
                seed, seed_opt->count() > 0, out);
    else if (gen->parsed())
      cmd_gen_data(config_path, out);
    else if (tt->parsed())
      cmd_train_teachers(config_path);
    else if (ttx->parsed())
      cmd_train_teacher_x(config_path);
    else if (dis->parsed())
      cmd_distill(config_path);
    else if (sweep->parsed())
      cmd_sweep(config_path, axis, points, seeds, out);
    else if (attr->parsed())
      cmd_attribute(checkpoint, eval_dir, bank_dir, n_steps, out);
    else if (rep->parsed()) {
      xmodal::TrainConfig base = load_or_shipped(config_path);
      std::filesystem::path out_dir =
          out.empty() ? base.out / ("reproduce-" + what)
                      : std::filesystem::path(out);
      xmodal::cli::reproduce(what, base, seeds, out_dir);
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const xmodal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const xmodal::TrendCheckError& e) {
    std::cerr << "trend check failed: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
