#include "xmodal/embedding_cache.hpp"

#include <nlohmann/json.hpp>

#include "xmodal/common.hpp"
#include "xmodal/recordio.hpp"

namespace xmodal {

EmbeddingCache::EmbeddingCache(std::filesystem::path root)
    : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path EmbeddingCache::dir_for(
    const std::string& backend_id) const {
  return root_ / backend_id;
}

EmbeddingCache::Namespace& EmbeddingCache::load_namespace(
    const std::string& backend_id) const {
  auto& ns = namespaces_[backend_id];
  if (ns.loaded) return ns;
  ns.loaded = true;
  const auto manifest_path = dir_for(backend_id) / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) return ns;
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text_file(manifest_path));
    for (const auto& [key, rec] : m.at("records").items()) {
      Record r;
      r.file = rec.at("file").get<std::string>();
      r.len = rec.at("len").get<std::size_t>();
      r.checksum = rec.at("checksum").get<std::string>();
      ns.records[key] = std::move(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CacheIntegrityError("cache manifest unreadable at " +
                              manifest_path.string() + ": " + e.what());
  }
  return ns;
}

std::optional<EmbeddingVector> EmbeddingCache::get(
    const std::string& backend_id, const std::string& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& ns = load_namespace(backend_id);
  auto it = ns.records.find(key);
  if (it == ns.records.end()) return std::nullopt;
  EmbeddingVector out;
  out.values = read_f32_file(dir_for(backend_id) / it->second.file,
                             it->second.len, it->second.checksum,
                             "cache key '" + key + "'");
  return out;
}

void EmbeddingCache::put(const std::string& backend_id, const std::string& key,
                         const EmbeddingVector& vec) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& ns = load_namespace(backend_id);
  std::string record_id = to_hex(fnv1a64(key));
  // Hash collision between distinct keys: disambiguate by suffix.
  int suffix = 0;
  auto taken = [&](const std::string& id) {
    for (const auto& [k, r] : ns.records)
      if (k != key && r.file == "vectors/" + id + ".f32") return true;
    return false;
  };
  while (taken(record_id))
    record_id = to_hex(fnv1a64(key)) + "-" + std::to_string(++suffix);

  Record r;
  r.file = "vectors/" + record_id + ".f32";
  r.len = vec.values.size();
  r.checksum = f32_checksum(vec.values);
  write_f32_file(dir_for(backend_id) / r.file, vec.values);
  ns.records[key] = r;
  flush_manifest(backend_id, ns);
}

void EmbeddingCache::flush_manifest(const std::string& backend_id,
                                    const Namespace& ns) {
  nlohmann::json m;
  m["backend"] = backend_id;
  nlohmann::json records = nlohmann::json::object();
  for (const auto& [key, r] : ns.records) {
    records[key] = {{"file", r.file}, {"len", r.len}, {"checksum", r.checksum}};
  }
  m["records"] = std::move(records);
  write_text_file(dir_for(backend_id) / "manifest.json", m.dump(2) + "\n");
}

EmbeddingVector EmbeddingCache::get_or_encode(
    const EncoderBackend& backend, const std::string& key,
    const std::function<EmbeddingVector()>& encode) {
  if (auto hit = get(backend.identity(), key)) return *hit;
  EmbeddingVector vec = encode();
  put(backend.identity(), key, vec);
  return vec;
}

std::string EmbeddingCache::text_key(const std::string& prompt) {
  return "text\x1f" + prompt;
}

std::string EmbeddingCache::image_key(const ImageInput& input) {
  return "image\x1f" + input.sample_id + "\x1f" +
         std::to_string(input.class_id.value_or(-1)) + "\x1f" +
         std::to_string(input.sample_key);
}

}  // namespace xmodal
