#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "xmodal/embedding.hpp"
#include "xmodal/encoder.hpp"

namespace xmodal {

// Persistent encode cache. Layout per backend identity:
//   <root>/<backend-id>/manifest.json
//   <root>/<backend-id>/vectors/<record-id>.f32
// Records are raw little-endian float32; the manifest carries length and
// checksum per key, so a cache hit is bit-identical to the original encode
// output and tampering surfaces as CacheIntegrityError.
//
// Writes are serialized behind a mutex (single-writer contract); reads may
// run concurrently with each other.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path root);

  std::optional<EmbeddingVector> get(const std::string& backend_id,
                                     const std::string& key) const;

  void put(const std::string& backend_id, const std::string& key,
           const EmbeddingVector& vec);

  EmbeddingVector get_or_encode(const EncoderBackend& backend,
                                const std::string& key,
                                const std::function<EmbeddingVector()>& encode);

  // Conventional keys for the two encode surfaces.
  static std::string text_key(const std::string& prompt);
  static std::string image_key(const ImageInput& input);

  const std::filesystem::path& root() const { return root_; }

 private:
  struct Record {
    std::string file;
    std::size_t len = 0;
    std::string checksum;
  };
  struct Namespace {
    std::map<std::string, Record> records;
    bool loaded = false;
  };

  std::filesystem::path dir_for(const std::string& backend_id) const;
  Namespace& load_namespace(const std::string& backend_id) const;
  void flush_manifest(const std::string& backend_id, const Namespace& ns);

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, Namespace> namespaces_;
};

}  // namespace xmodal
