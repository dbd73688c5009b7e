#pragma once

// Checkpoint container.
//
// Binary layout, all integers and doubles little-endian:
//   magic    8 bytes  "BNSCKPT1"
//   count    u32      number of arrays
//   per array:
//     name_len u32, name bytes (UTF-8)
//     rank     u32, dims u64 x rank
//     data     f64 x product(dims)
//
// Hyperparameters travel in a sibling text manifest of "key = value" lines.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bns/error.hpp"
#include "bns/tensor.hpp"

namespace bns {

struct NamedTensor {
  std::string name;
  Tensor value;
};

inline constexpr char kCheckpointMagic[8] = {'B', 'N', 'S', 'C', 'K', 'P', 'T', '1'};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ParseError("checkpoint truncated at byte " + std::to_string(pos_), 0);
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary sibling and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace detail

inline std::string encode_checkpoint(const std::vector<NamedTensor>& arrays) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    detail::put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    detail::put_u32(out, static_cast<std::uint32_t>(a.value.rank()));
    for (std::size_t d : a.value.shape()) detail::put_u64(out, d);
    for (double v : a.value.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
  detail::ByteReader in(bytes);
  if (in.str(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw ParseError("not a checkpoint (bad magic)", 0);
  }
  const std::uint32_t count = in.u32();
  std::vector<NamedTensor> arrays;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor a;
    a.name = in.str(in.u32());
    const std::uint32_t rank = in.u32();
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(in.u64());
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = in.f64();
    a.value = Tensor(std::move(shape), std::move(data));
    arrays.push_back(std::move(a));
  }
  if (!in.done()) throw ParseError("trailing bytes after checkpoint arrays", 0);
  return arrays;
}

inline void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& arrays) {
  detail::write_file_atomic(path, encode_checkpoint(arrays));
}

inline std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

// ---- text manifest -------------------------------------------------------

using Manifest = std::map<std::string, std::string>;

inline std::string encode_manifest(const Manifest& m) {
  std::string out;
  for (const auto& [k, v] : m) out += k + " = " + v + "\n";
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Parses "key = value" lines; blank lines and lines starting with '#' are
/// skipped.
inline Manifest decode_manifest(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", lineno);
    m[key] = trim(t.substr(eq + 1));
  }
  return m;
}

inline void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  detail::write_file_atomic(path, encode_manifest(m));
}

inline Manifest load_manifest(const std::filesystem::path& path) { return decode_manifest(detail::read_file(path)); }

}  // namespace bns
