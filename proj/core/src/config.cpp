#include "xmodal/config.hpp"

#include <algorithm>
#include <set>

#include "xmodal/common.hpp"
#include "xmodal/recordio.hpp"

namespace xmodal {
namespace {

using nlohmann::json;

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object())
    throw ConfigError("config: \"" + where + "\" must be an object");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw ConfigError("config: unknown key \"" + it.key() + "\" in " + where);
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback,
         const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for \"" + key + "\" in " + where);
  }
}

std::vector<int> get_int_list(const json& j, const std::string& key,
                              std::vector<int> fallback,
                              const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array())
    throw ConfigError("config: \"" + key + "\" in " + where +
                      " must be an array of ints");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<int>() < 1)
      throw ConfigError("config: \"" + key + "\" in " + where +
                        " must hold positive ints");
    out.push_back(e.get<int>());
  }
  return out;
}

BackendOptions parse_backend(const json& j) {
  BackendOptions b;
  if (j.is_null()) return b;
  expect_object(j, "backend");
  reject_unknown(j,
                 {"kind", "store", "dim_text", "dim_image", "anchor_seed",
                  "synonym_noise", "distractor_noise", "image_noise"},
                 "backend");
  b.kind = get_or<std::string>(j, "kind", b.kind, "backend");
  if (b.kind != "mock" && b.kind != "vlm")
    throw ConfigError("config: backend.kind must be \"mock\" or \"vlm\"");
  b.store = get_or<std::string>(j, "store", b.store.string(), "backend");
  b.dim_text = get_or<int>(j, "dim_text", b.dim_text, "backend");
  b.dim_image = get_or<int>(j, "dim_image", b.dim_image, "backend");
  b.anchor_seed = get_or<std::uint64_t>(j, "anchor_seed", b.anchor_seed, "backend");
  b.synonym_noise = get_or<double>(j, "synonym_noise", b.synonym_noise, "backend");
  b.distractor_noise =
      get_or<double>(j, "distractor_noise", b.distractor_noise, "backend");
  b.image_noise = get_or<double>(j, "image_noise", b.image_noise, "backend");
  if (b.dim_text < 2 || b.dim_image < 2)
    throw ConfigError("config: backend dims must be >= 2");
  if (b.synonym_noise < 0 || b.distractor_noise < 0 || b.image_noise < 0)
    throw ConfigError("config: backend noise levels must be >= 0");
  if (b.kind == "vlm" && b.store.empty())
    throw ConfigError("config: backend.store required for kind \"vlm\"");
  return b;
}

std::vector<std::string> parse_catalog(const json& j) {
  static const std::vector<std::string> kDefault = {
      "telephone", "automobile", "dog", "chair", "airplane", "flower"};
  if (j.is_null()) return kDefault;
  if (j.is_string()) {
    ClassCatalog cat = ClassCatalog::load(j.get<std::string>());
    return cat.names();
  }
  if (j.is_array()) {
    std::vector<std::string> names;
    for (const auto& e : j) {
      if (!e.is_string())
        throw ConfigError("config: catalog entries must be strings");
      names.push_back(e.get<std::string>());
    }
    // Validate uniqueness and case handling up front.
    return ClassCatalog::from_names(names).names();
  }
  throw ConfigError("config: catalog must be a path or an array of names");
}

DatasetOptions parse_dataset(const json& j) {
  DatasetOptions d;
  if (j.is_null()) return d;
  expect_object(j, "dataset");
  reject_unknown(
      j, {"dir", "per_class_train", "per_class_val", "imbalance_factor"},
      "dataset");
  d.dir = get_or<std::string>(j, "dir", d.dir.string(), "dataset");
  d.per_class_train =
      get_or<int>(j, "per_class_train", d.per_class_train, "dataset");
  d.per_class_val = get_or<int>(j, "per_class_val", d.per_class_val, "dataset");
  d.imbalance_factor =
      get_or<double>(j, "imbalance_factor", d.imbalance_factor, "dataset");
  if (d.per_class_train < 1 || d.per_class_val < 1)
    throw ConfigError("config: dataset per-class counts must be positive");
  if (d.imbalance_factor < 1.0)
    throw ConfigError("config: dataset.imbalance_factor must be >= 1");
  return d;
}

BankOptions parse_bank(const json& j) {
  BankOptions b;
  if (j.is_null()) return b;
  expect_object(j, "bank");
  reject_unknown(j, {"M", "top_k", "per_class_limit", "learnable", "select"},
                 "bank");
  b.M = get_or<int>(j, "M", b.M, "bank");
  b.top_k = get_or<int>(j, "top_k", b.top_k, "bank");
  b.per_class_limit = get_or<int>(j, "per_class_limit", b.per_class_limit, "bank");
  b.learnable = get_or<bool>(j, "learnable", b.learnable, "bank");
  if (j.contains("select"))
    b.select = parse_select_mode(j.at("select").get<std::string>());
  if (b.M < 1 || b.top_k < 1 || b.per_class_limit < 1)
    throw ConfigError("config: bank M, top_k, per_class_limit must be positive");
  return b;
}

KDConfig parse_kd(const json& j) {
  KDConfig k;
  if (j.is_null()) return k;
  expect_object(j, "kd");
  reject_unknown(j, {"tau", "lambda_kd", "lambda_hier", "lambda_cosreg"}, "kd");
  k.tau = get_or<double>(j, "tau", k.tau, "kd");
  k.lambda_kd = get_or<double>(j, "lambda_kd", k.lambda_kd, "kd");
  k.lambda_hier = get_or<double>(j, "lambda_hier", k.lambda_hier, "kd");
  k.lambda_cosreg = get_or<double>(j, "lambda_cosreg", k.lambda_cosreg, "kd");
  validate(k);
  return k;
}

TextMixPolicy parse_mix(const json& j) {
  TextMixPolicy m;
  if (j.is_null()) return m;
  expect_object(j, "mix");
  reject_unknown(j, {"p_gt", "p_wn", "p_noise"}, "mix");
  m.p_gt = get_or<double>(j, "p_gt", m.p_gt, "mix");
  m.p_wn = get_or<double>(j, "p_wn", m.p_wn, "mix");
  m.p_noise = get_or<double>(j, "p_noise", m.p_noise, "mix");
  validate(m);
  return m;
}

ModelOptions parse_models(const json& j) {
  ModelOptions m;
  if (j.is_null()) return m;
  expect_object(j, "models");
  reject_unknown(j,
                 {"teacher_hidden", "teacher_x_hidden", "student_hidden",
                  "teacher_x_input", "aug_strong", "aug_weak",
                  "distill_teachers"},
                 "models");
  m.teacher_hidden = get_int_list(j, "teacher_hidden", m.teacher_hidden, "models");
  m.teacher_x_hidden =
      get_int_list(j, "teacher_x_hidden", m.teacher_x_hidden, "models");
  m.student_hidden = get_int_list(j, "student_hidden", m.student_hidden, "models");
  if (j.contains("teacher_x_input"))
    m.teacher_x_input =
        parse_input_mode(j.at("teacher_x_input").get<std::string>());
  m.aug_strong = get_or<double>(j, "aug_strong", m.aug_strong, "models");
  m.aug_weak = get_or<double>(j, "aug_weak", m.aug_weak, "models");
  if (j.contains("distill_teachers"))
    m.distill_teachers =
        parse_distill_teachers(j.at("distill_teachers").get<std::string>());
  if (m.aug_strong < 0 || m.aug_weak < 0)
    throw ConfigError("config: augmentation strengths must be >= 0");
  return m;
}

OptimOptions parse_optim(const json& j) {
  OptimOptions o;
  if (j.is_null()) return o;
  expect_object(j, "optim");
  reject_unknown(j, {"lr", "bank_lr", "epochs", "batch_size"}, "optim");
  o.lr = get_or<double>(j, "lr", o.lr, "optim");
  o.bank_lr = get_or<double>(j, "bank_lr", o.bank_lr, "optim");
  o.epochs = get_or<int>(j, "epochs", o.epochs, "optim");
  o.batch_size = get_or<int>(j, "batch_size", o.batch_size, "optim");
  if (o.lr <= 0 || o.bank_lr < 0)
    throw ConfigError("config: optim.lr must be > 0 and bank_lr >= 0");
  if (o.epochs < 0 || o.batch_size < 1)
    throw ConfigError("config: optim.epochs must be >= 0, batch_size >= 1");
  return o;
}

SeedOptions parse_seeds(const json& j) {
  SeedOptions s;
  if (j.is_null()) return s;
  expect_object(j, "seeds");
  reject_unknown(j, {"data", "init", "mix", "noise"}, "seeds");
  s.data = get_or<std::uint64_t>(j, "data", s.data, "seeds");
  s.init = get_or<std::uint64_t>(j, "init", s.init, "seeds");
  s.mix = get_or<std::uint64_t>(j, "mix", s.mix, "seeds");
  s.noise = get_or<std::uint64_t>(j, "noise", s.noise, "seeds");
  return s;
}

json null_if_missing(const json& j, const std::string& key) {
  return j.contains(key) ? j.at(key) : json();
}

}  // namespace

DistillTeachers parse_distill_teachers(const std::string& name) {
  if (name == "both") return DistillTeachers::kBoth;
  if (name == "tx-only") return DistillTeachers::kTextTeacherOnly;
  throw ConfigError("config: distill_teachers must be \"both\" or \"tx-only\"");
}

std::string distill_teachers_name(DistillTeachers which) {
  return which == DistillTeachers::kBoth ? "both" : "tx-only";
}

TrainConfig parse_train_config(const json& j) {
  expect_object(j, "<root>");
  reject_unknown(j,
                 {"backend", "catalog", "lexicon", "templates", "dataset",
                  "bank", "kd", "mix", "models", "optim", "seeds", "out"},
                 "<root>");
  TrainConfig cfg;
  cfg.backend = parse_backend(null_if_missing(j, "backend"));
  cfg.catalog_names = parse_catalog(null_if_missing(j, "catalog"));
  cfg.lexicon = get_or<std::string>(j, "lexicon", cfg.lexicon, "<root>");
  if (j.contains("templates")) {
    const auto& t = j.at("templates");
    if (!t.is_array() || t.empty())
      throw ConfigError("config: templates must be a non-empty array");
    cfg.templates.clear();
    for (const auto& e : t) {
      if (!e.is_string())
        throw ConfigError("config: templates entries must be strings");
      cfg.templates.push_back(e.get<std::string>());
    }
  }
  cfg.dataset = parse_dataset(null_if_missing(j, "dataset"));
  cfg.bank = parse_bank(null_if_missing(j, "bank"));
  cfg.kd = parse_kd(null_if_missing(j, "kd"));
  cfg.mix = parse_mix(null_if_missing(j, "mix"));
  cfg.models = parse_models(null_if_missing(j, "models"));
  cfg.optim = parse_optim(null_if_missing(j, "optim"));
  cfg.seeds = parse_seeds(null_if_missing(j, "seeds"));
  cfg.out = get_or<std::string>(j, "out", cfg.out.string(), "<root>");
  validate(cfg);
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ConfigError("config: no such file " + path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return parse_train_config(j);
}

json to_json(const TrainConfig& cfg) {
  json j;
  j["backend"] = {{"kind", cfg.backend.kind},
                  {"dim_text", cfg.backend.dim_text},
                  {"dim_image", cfg.backend.dim_image},
                  {"anchor_seed", cfg.backend.anchor_seed},
                  {"synonym_noise", cfg.backend.synonym_noise},
                  {"distractor_noise", cfg.backend.distractor_noise},
                  {"image_noise", cfg.backend.image_noise}};
  if (!cfg.backend.store.empty())
    j["backend"]["store"] = cfg.backend.store.string();
  j["catalog"] = cfg.catalog_names;
  j["lexicon"] = cfg.lexicon;
  j["templates"] = cfg.templates;
  j["dataset"] = {{"dir", cfg.dataset.dir.string()},
                  {"per_class_train", cfg.dataset.per_class_train},
                  {"per_class_val", cfg.dataset.per_class_val},
                  {"imbalance_factor", cfg.dataset.imbalance_factor}};
  j["bank"] = {{"M", cfg.bank.M},
               {"top_k", cfg.bank.top_k},
               {"per_class_limit", cfg.bank.per_class_limit},
               {"learnable", cfg.bank.learnable},
               {"select", select_mode_name(cfg.bank.select)}};
  j["kd"] = {{"tau", cfg.kd.tau},
             {"lambda_kd", cfg.kd.lambda_kd},
             {"lambda_hier", cfg.kd.lambda_hier},
             {"lambda_cosreg", cfg.kd.lambda_cosreg}};
  j["mix"] = {{"p_gt", cfg.mix.p_gt},
              {"p_wn", cfg.mix.p_wn},
              {"p_noise", cfg.mix.p_noise}};
  j["models"] = {{"teacher_hidden", cfg.models.teacher_hidden},
                 {"teacher_x_hidden", cfg.models.teacher_x_hidden},
                 {"student_hidden", cfg.models.student_hidden},
                 {"teacher_x_input", input_mode_name(cfg.models.teacher_x_input)},
                 {"aug_strong", cfg.models.aug_strong},
                 {"aug_weak", cfg.models.aug_weak},
                 {"distill_teachers",
                  distill_teachers_name(cfg.models.distill_teachers)}};
  j["optim"] = {{"lr", cfg.optim.lr},
                {"bank_lr", cfg.optim.bank_lr},
                {"epochs", cfg.optim.epochs},
                {"batch_size", cfg.optim.batch_size}};
  j["seeds"] = {{"data", cfg.seeds.data},
                {"init", cfg.seeds.init},
                {"mix", cfg.seeds.mix},
                {"noise", cfg.seeds.noise}};
  j["out"] = cfg.out.string();
  return j;
}

void validate(const TrainConfig& cfg) {
  if (cfg.catalog_names.size() < 2)
    throw ConfigError("config: catalog needs at least 2 classes");
  if (cfg.lexicon.empty()) throw ConfigError("config: lexicon must be set");
  if (cfg.out.empty()) throw ConfigError("config: out must be set");
  // Template syntax is checked eagerly so a bad config fails at load.
  PromptTemplateSet check(cfg.templates);
  (void)check;
  if (cfg.backend.kind == "mock" &&
      cfg.backend.dim_text != cfg.backend.dim_image)
    throw ConfigError(
        "config: mock backend requires dim_text == dim_image (shared space)");
}

TrainConfig with_rep(const TrainConfig& base, int rep) {
  if (rep < 0) throw ConfigError("with_rep: rep must be >= 0");
  if (rep == 0) return base;
  TrainConfig cfg = base;
  std::string tag = "rep:" + std::to_string(rep);
  cfg.seeds.data = mix_seed(base.seeds.data, tag + ":data");
  cfg.seeds.init = mix_seed(base.seeds.init, tag + ":init");
  cfg.seeds.mix = mix_seed(base.seeds.mix, tag + ":mix");
  cfg.seeds.noise = mix_seed(base.seeds.noise, tag + ":noise");
  return cfg;
}

}  // namespace xmodal
