#include "xmodal/recordio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xmodal/common.hpp"

namespace xmodal {

namespace {
std::vector<unsigned char> to_le_bytes(const std::vector<float>& values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(values[i]);
    bytes[4 * i + 0] = static_cast<unsigned char>(u & 0xff);
    bytes[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
    bytes[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
    bytes[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
  }
  return bytes;
}
}  // namespace

std::string f32_checksum(const std::vector<float>& values) {
  const auto bytes = to_le_bytes(values);
  return to_hex(fnv1a64(bytes.data(), bytes.size()));
}

void write_f32_file(const std::filesystem::path& path,
                    const std::vector<float>& values) {
  std::filesystem::create_directories(path.parent_path());
  const auto bytes = to_le_bytes(values);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for write: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<float> read_f32_file(const std::filesystem::path& path,
                                 std::size_t expected_len,
                                 const std::string& expected_checksum,
                                 const std::string& context) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CacheIntegrityError(context + ": missing record file " +
                              path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() != expected_len * 4)
    throw CacheIntegrityError(context + ": record length mismatch in " +
                              path.string() + " (got " +
                              std::to_string(bytes.size() / 4) + ", want " +
                              std::to_string(expected_len) + ")");
  if (!expected_checksum.empty()) {
    const std::string got = to_hex(fnv1a64(bytes.data(), bytes.size()));
    if (got != expected_checksum)
      throw CacheIntegrityError(context + ": checksum mismatch in " +
                                path.string());
  }
  std::vector<float> values(expected_len);
  for (std::size_t i = 0; i < expected_len; ++i) {
    std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i + 0]) |
                      (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    values[i] = std::bit_cast<float>(u);
  }
  return values;
}

std::vector<float> to_f32(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

std::vector<double> to_f64(const std::vector<float>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]);
  return out;
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for write: " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for read: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace xmodal
