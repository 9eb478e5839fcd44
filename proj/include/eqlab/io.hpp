#pragma once

// Binary container shared by dataset and model files:
//
//   bytes 0..7   magic (8 ASCII bytes, e.g. "EQLABDS\n")
//   bytes 8..15  header length L, unsigned 64-bit little-endian
//   next L bytes UTF-8 JSON header (contains "format" and "version")
//   remainder    payload, layout described by the header
//
// Every JSON header carries "version": "<major>.<minor>"; readers reject an
// unknown major version.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace eqlab::io {

using Json = nlohmann::json;

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

// Hash of the canonical (key-sorted, compact) JSON serialization.
inline std::string json_hash(const Json& j) { return hex64(fnv1a64(j.dump())); }

inline int major_version(const std::string& version) {
  const auto dot = version.find('.');
  try {
    return std::stoi(version.substr(0, dot));
  } catch (const std::exception&) {
    throw FormatError("malformed version string '" + version + "'");
  }
}

inline void check_header(const Json& header, std::string_view format, int supported_major) {
  if (!header.contains("format") || header["format"] != format)
    throw FormatError("expected a '" + std::string(format) + "' file");
  if (!header.contains("version") || !header["version"].is_string())
    throw FormatError("file header has no version");
  const int major = major_version(header["version"].get<std::string>());
  if (major != supported_major)
    throw FormatError("unsupported " + std::string(format) + " major version " +
                      std::to_string(major) + " (reader supports " +
                      std::to_string(supported_major) + ")");
}

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("unexpected end of file");
  }

  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("short write to '" + path.string() + "'");
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

// Starts a container: magic + header. The caller appends the payload.
inline ByteWriter begin_container(std::string_view magic, const Json& header) {
  ByteWriter w;
  w.raw(magic);
  const std::string text = header.dump();
  w.u64(text.size());
  w.raw(text);
  return w;
}

struct Container {
  Json header;
  ByteReader payload;
};

inline Container open_container(std::vector<std::uint8_t> bytes, std::string_view magic) {
  ByteReader r(std::move(bytes));
  if (r.remaining() < magic.size() || r.raw(magic.size()) != magic)
    throw FormatError("bad magic bytes");
  const std::uint64_t len = r.u64();
  if (len > r.remaining()) throw FormatError("header length exceeds file size");
  Json header;
  try {
    header = Json::parse(r.raw(len));
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("corrupt header: ") + e.what());
  }
  return {std::move(header), std::move(r)};
}

}  // namespace eqlab::io
