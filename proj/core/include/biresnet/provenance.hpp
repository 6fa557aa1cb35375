#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace biresnet {

// FNV-1a over raw bytes; the same function keys RNG streams and content
// hashes, so every hash in the project is reproducible from first principles.
std::uint64_t fnv1a64_bytes(const void* data, std::size_t n);
std::string hex64(std::uint64_t v);

// "fnv1a64:<16 hex digits>" over the file contents.
std::string file_content_hash(const std::filesystem::path& path);

// Hash of a canonical (sorted-key) JSON dump; used as the per-cell config
// fingerprint in experiment grids.
std::string config_hash(const nlohmann::json& config);

// Side-car written by every CLI run: the effective config, the seeds, and a
// content hash per input file. Deliberately excludes timestamps so reruns
// produce identical bytes.
void write_provenance(const std::filesystem::path& out_path,
                      const std::string& command,
                      const nlohmann::json& config, std::uint64_t seed,
                      const std::vector<std::filesystem::path>& inputs);

}  // namespace biresnet
