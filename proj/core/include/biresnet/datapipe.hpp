#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "biresnet/motorsim.hpp"

namespace biresnet {

// ---------------------------------------------------------------------------
// Post-processing: exact subsampling, per-channel SNR noise, z-score
// normalization with training-split statistics, stratified splitting, and the
// bit-exact "BRND" on-disk format.
// ---------------------------------------------------------------------------

inline constexpr std::array<int, 5> kSupportedDownsampleFactors = {1, 2, 5, 10,
                                                                   20};

// Keeps samples at indices 0, k, 2k, ... bit-exactly; t_f metadata unchanged.
ExperimentRecord downsample(const ExperimentRecord& rec, int factor);

// Gaussian noise per channel, scaled so the realized noise power hits the
// target exactly: var = signal_power / 10^(snr_db/10).
ExperimentRecord add_noise(const ExperimentRecord& rec, double snr_db,
                           std::uint64_t seed);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std_dev;
};

// Population statistics over every sample of the given (training) records.
NormStats compute_stats(const std::vector<ExperimentRecord>& records);

// In-place per-channel z-score: (x - mean) / max(std, 1e-8).
void normalize(std::vector<ExperimentRecord>& records, const NormStats& stats);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Stratified by class, shuffle seeded; per-class counts within +-1 of the
// exact ratio. Throws if any class has fewer than 10 records.
SplitIndices split(const std::vector<ExperimentRecord>& records,
                   std::uint64_t seed, double train_ratio = 0.8,
                   double val_ratio = 0.1);

std::vector<ExperimentRecord> select(
    const std::vector<ExperimentRecord>& records,
    const std::vector<std::size_t>& indices);

// "BRND" dataset file. sample_period lives in the manifest, not the file.
void write_dataset(const std::filesystem::path& path,
                   const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_dataset(const std::filesystem::path& path,
                                           double sample_period = 1e-3);

}  // namespace biresnet
