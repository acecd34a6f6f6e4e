#include "xmodal/dataset.hpp"

#include <cmath>
#include <cstdio>

#include "xmodal/common.hpp"
#include "xmodal/recordio.hpp"

namespace xmodal {
namespace {

std::vector<int> train_counts(int num_classes, const GeneratorSpec& spec) {
  if (num_classes < 2) throw ConfigError("generate_dataset: needs >= 2 classes");
  if (spec.per_class_train < 1 || spec.per_class_val < 1)
    throw ConfigError("generate_dataset: per-class counts must be positive");
  if (spec.imbalance_factor < 1.0)
    throw ConfigError("generate_dataset: imbalance_factor must be >= 1");
  std::vector<int> counts(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    // Head class keeps the full count, tail class gets head / factor.
    double expo = num_classes > 1
                      ? static_cast<double>(c) / (num_classes - 1)
                      : 0.0;
    double scaled = spec.per_class_train * std::pow(spec.imbalance_factor, -expo);
    counts[static_cast<std::size_t>(c)] =
        std::max(1, static_cast<int>(std::llround(scaled)));
  }
  return counts;
}

SampleRecord make_sample(const EncoderBackend& backend, int sample_id,
                         int label, std::uint64_t data_seed,
                         const std::string& split) {
  SampleRecord rec;
  rec.sample_id = sample_id;
  rec.label = label;
  rec.sample_key =
      mix_seed(data_seed, "sample:" + split + ":" + std::to_string(sample_id));
  ImageInput input;
  input.sample_id = std::to_string(sample_id);
  input.class_id = label;
  input.sample_key = rec.sample_key;
  // Round through float32 so a freshly generated dataset matches a
  // reloaded one bit for bit.
  rec.feature = to_f64(backend.encode_image(input).values);
  return rec;
}

nlohmann::json split_manifest(const DatasetSplit& split, int dim,
                              const std::string& record,
                              const std::filesystem::path& dir) {
  std::vector<float> packed;
  packed.reserve(split.samples.size() * static_cast<std::size_t>(dim));
  nlohmann::json labels = nlohmann::json::array();
  nlohmann::json ids = nlohmann::json::array();
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& s : split.samples) {
    if (s.feature.size() != static_cast<std::size_t>(dim))
      throw Error("save_dataset: inconsistent feature dim");
    auto f32 = to_f32(s.feature);
    packed.insert(packed.end(), f32.begin(), f32.end());
    labels.push_back(s.label);
    ids.push_back(s.sample_id);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(s.sample_key));
    keys.push_back(std::string(buf));
  }
  write_f32_file(dir / "vectors" / (record + ".f32"), packed);
  nlohmann::json j;
  j["count"] = split.samples.size();
  j["labels"] = std::move(labels);
  j["ids"] = std::move(ids);
  j["keys"] = std::move(keys);
  j["features"] = {{"record", record},
                   {"len", packed.size()},
                   {"checksum", f32_checksum(packed)}};
  return j;
}

DatasetSplit load_split(const nlohmann::json& j, int dim,
                        const std::filesystem::path& dir,
                        const std::string& what) {
  DatasetSplit split;
  const auto& feat = j.at("features");
  std::string record = feat.at("record").get<std::string>();
  auto packed = read_f32_file(dir / "vectors" / (record + ".f32"),
                              feat.at("len").get<std::size_t>(),
                              feat.at("checksum").get<std::string>(),
                              "dataset " + what);
  std::size_t count = j.at("count").get<std::size_t>();
  if (packed.size() != count * static_cast<std::size_t>(dim))
    throw CacheIntegrityError("dataset " + what + ": record length mismatch");
  const auto& labels = j.at("labels");
  const auto& ids = j.at("ids");
  const auto& keys = j.at("keys");
  if (labels.size() != count || ids.size() != count || keys.size() != count)
    throw CacheIntegrityError("dataset " + what + ": metadata length mismatch");
  split.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& s = split.samples[i];
    s.sample_id = ids[i].get<int>();
    s.label = labels[i].get<int>();
    s.sample_key = std::stoull(keys[i].get<std::string>(), nullptr, 16);
    std::vector<float> row(packed.begin() + static_cast<std::ptrdiff_t>(i * dim),
                           packed.begin() +
                               static_cast<std::ptrdiff_t>((i + 1) * dim));
    s.feature = to_f64(row);
  }
  return split;
}

}  // namespace

std::vector<int> DatasetSplit::ids() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.sample_id);
  return out;
}

std::vector<std::vector<double>> DatasetSplit::features() const {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.feature);
  return out;
}

SyntheticDataset generate_dataset(const EncoderBackend& backend,
                                  int num_classes, const GeneratorSpec& spec) {
  auto counts = train_counts(num_classes, spec);
  SyntheticDataset data;
  data.num_classes = num_classes;
  int next_id = 1;
  for (int c = 1; c <= num_classes; ++c) {
    for (int i = 0; i < counts[static_cast<std::size_t>(c - 1)]; ++i) {
      data.train.samples.push_back(
          make_sample(backend, next_id++, c, spec.data_seed, "train"));
    }
  }
  for (int c = 1; c <= num_classes; ++c) {
    for (int i = 0; i < spec.per_class_val; ++i) {
      data.val.samples.push_back(
          make_sample(backend, next_id++, c, spec.data_seed, "val"));
    }
  }
  if (data.train.samples.empty()) throw Error("generate_dataset: empty train split");
  data.dim = static_cast<int>(data.train.samples.front().feature.size());
  data.meta = {{"backend", backend.identity()},
               {"generator",
                {{"per_class_train", spec.per_class_train},
                 {"per_class_val", spec.per_class_val},
                 {"imbalance_factor", spec.imbalance_factor},
                 {"data_seed", spec.data_seed}}}};
  return data;
}

void save_dataset(const SyntheticDataset& data,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "vectors");
  nlohmann::json manifest;
  manifest["format"] = "xmodal-dataset-v1";
  manifest["dim"] = data.dim;
  manifest["num_classes"] = data.num_classes;
  manifest["meta"] = data.meta;
  manifest["train"] = split_manifest(data.train, data.dim, "train", dir);
  manifest["val"] = split_manifest(data.val, data.dim, "val", dir);
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

SyntheticDataset load_dataset(const std::filesystem::path& dir) {
  auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    throw ConfigError("load_dataset: missing " + manifest_path.string());
  nlohmann::json manifest = nlohmann::json::parse(read_text_file(manifest_path));
  if (manifest.value("format", "") != "xmodal-dataset-v1")
    throw CacheIntegrityError("load_dataset: unknown manifest format");
  SyntheticDataset data;
  data.dim = manifest.at("dim").get<int>();
  data.num_classes = manifest.at("num_classes").get<int>();
  data.meta = manifest.at("meta");
  data.train = load_split(manifest.at("train"), data.dim, dir, "train");
  data.val = load_split(manifest.at("val"), data.dim, dir, "val");
  return data;
}

std::vector<std::size_t> class_counts(const DatasetSplit& split,
                                      int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (const auto& s : split.samples) {
    if (s.label < 1 || s.label > num_classes)
      throw InputError("class_counts: label out of range");
    ++counts[static_cast<std::size_t>(s.label - 1)];
  }
  return counts;
}

}  // namespace xmodal
