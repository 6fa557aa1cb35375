#include "biresnet/provenance.hpp"

#include <fstream>

#include "biresnet/errors.hpp"
#include "biresnet/io_util.hpp"

namespace biresnet {

std::uint64_t fnv1a64_bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string file_content_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash missing file: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const auto got = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return "fnv1a64:" + hex64(h);
}

std::string config_hash(const nlohmann::json& config) {
  const std::string canon = config.dump();  // nlohmann keeps keys sorted
  return "fnv1a64:" + hex64(fnv1a64_bytes(canon.data(), canon.size()));
}

void write_provenance(const std::filesystem::path& out_path,
                      const std::string& command,
                      const nlohmann::json& config, std::uint64_t seed,
                      const std::vector<std::filesystem::path>& inputs) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  nlohmann::json files = nlohmann::json::object();
  for (const auto& p : inputs) {
    files[p.filename().string()] = file_content_hash(p);
  }
  j["inputs"] = files;
  detail::atomic_write(out_path, [&](detail::BinWriter& w) {
    const std::string text = j.dump(2) + "\n";
    w.bytes(text.data(), text.size());
  });
}

}  // namespace biresnet
