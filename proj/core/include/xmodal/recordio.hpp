#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xmodal {

// Shared on-disk convention for every persisted vector payload (embedding
// cache, noun banks, datasets, model checkpoints): a JSON manifest next to
// raw little-endian float32 record files, each record carrying its length
// and an FNV-1a checksum of the raw bytes in the manifest.

std::string f32_checksum(const std::vector<float>& values);

void write_f32_file(const std::filesystem::path& path,
                    const std::vector<float>& values);

// Reads exactly `expected_len` floats and verifies the checksum when
// `expected_checksum` is non-empty. Throws CacheIntegrityError on any
// mismatch, naming `context`.
std::vector<float> read_f32_file(const std::filesystem::path& path,
                                 std::size_t expected_len,
                                 const std::string& expected_checksum,
                                 const std::string& context);

std::vector<float> to_f32(const std::vector<double>& v);
std::vector<double> to_f64(const std::vector<float>& v);

void write_text_file(const std::filesystem::path& path,
                     const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace xmodal
