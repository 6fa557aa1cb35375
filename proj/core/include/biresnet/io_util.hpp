#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "biresnet/errors.hpp"

namespace biresnet::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts unsupported");

struct BinWriter {
  std::ofstream out;

  explicit BinWriter(const std::filesystem::path& path)
      : out(path, std::ios::binary) {
    if (!out) throw DataError("cannot open for write: " + path.string());
  }

  template <typename T>
  void raw(const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void u8(std::uint8_t v) { raw(v); }
  void u16(std::uint16_t v) { raw(v); }
  void u32(std::uint32_t v) { raw(v); }
  void u64(std::uint64_t v) { raw(v); }
  void f32(float v) { raw(v); }
  void bytes(const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void f32s(const std::vector<float>& v) {
    bytes(v.data(), v.size() * sizeof(float));
  }
  void str(const std::string& s) { bytes(s.data(), s.size()); }
};

struct BinReader {
  std::ifstream in;
  std::string context;

  explicit BinReader(const std::filesystem::path& path)
      : in(path, std::ios::binary), context(path.string()) {
    if (!in) throw DataError("cannot open for read: " + context);
  }

  template <typename T>
  T raw() {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated file: " + context);
    return v;
  }
  std::uint8_t u8() { return raw<std::uint8_t>(); }
  std::uint16_t u16() { return raw<std::uint16_t>(); }
  std::uint32_t u32() { return raw<std::uint32_t>(); }
  std::uint64_t u64() { return raw<std::uint64_t>(); }
  float f32() { return raw<float>(); }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw DataError("truncated file: " + context);
    return s;
  }
  std::vector<float> f32s(std::size_t n) {
    std::vector<float> v(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw DataError("truncated file: " + context);
    return v;
  }
};

// Write to <path>.tmp then rename, so readers never observe partial files.
template <typename WriteFn>
void atomic_write(const std::filesystem::path& path, WriteFn&& fn) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    BinWriter w(tmp);
    fn(w);
    w.out.flush();
    if (!w.out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace biresnet::detail
