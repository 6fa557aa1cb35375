#include "biresnet/datapipe.hpp"

#include <algorithm>
#include <cmath>

#include "biresnet/io_util.hpp"
#include "biresnet/rng.hpp"

namespace biresnet {

ExperimentRecord downsample(const ExperimentRecord& rec, int factor) {
  if (std::find(kSupportedDownsampleFactors.begin(),
                kSupportedDownsampleFactors.end(),
                factor) == kSupportedDownsampleFactors.end()) {
    throw UsageError("unsupported downsample factor " + std::to_string(factor));
  }
  if (factor == 1) return rec;
  ExperimentRecord out;
  out.channels = rec.channels;
  out.samples = (rec.samples + static_cast<std::size_t>(factor) - 1) /
                static_cast<std::size_t>(factor);
  out.sample_period = rec.sample_period * factor;
  out.label = rec.label;
  out.t_f = rec.t_f;
  out.data.resize(out.channels * out.samples);
  for (std::size_t c = 0; c < rec.channels; ++c) {
    for (std::size_t t = 0; t < out.samples; ++t) {
      out.at(c, t) = rec.at(c, t * static_cast<std::size_t>(factor));
    }
  }
  return out;
}

ExperimentRecord add_noise(const ExperimentRecord& rec, double snr_db,
                           std::uint64_t seed) {
  ExperimentRecord out = rec;
  const double power_ratio = std::pow(10.0, snr_db / 10.0);
  for (std::size_t c = 0; c < rec.channels; ++c) {
    double signal_power = 0.0;
    for (std::size_t t = 0; t < rec.samples; ++t) {
      const double v = rec.at(c, t);
      if (!std::isfinite(v)) {
        throw NumericalError("add_noise: non-finite input in channel " +
                             std::string(kChannelNames[c]));
      }
      signal_power += v * v;
    }
    signal_power /= static_cast<double>(rec.samples);
    const double target_var = signal_power / power_ratio;
    if (target_var <= 0.0) continue;

    SeededRng rng(seed, std::string("noise/") + kChannelNames[c]);
    std::vector<double> noise(rec.samples);
    double realized = 0.0;
    for (auto& n : noise) {
      n = rng.normal();
      realized += n * n;
    }
    realized /= static_cast<double>(rec.samples);
    // scale the realization so the measured noise power is exact
    const double scale = realized > 0.0 ? std::sqrt(target_var / realized) : 0.0;
    for (std::size_t t = 0; t < rec.samples; ++t) {
      out.at(c, t) += scale * noise[t];
    }
  }
  return out;
}

NormStats compute_stats(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw DataError("compute_stats on empty split");
  const std::size_t channels = records[0].channels;
  NormStats stats;
  stats.mean.assign(channels, 0.0);
  stats.std_dev.assign(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0, sumsq = 0.0;
    std::size_t n = 0;
    for (const auto& rec : records) {
      for (std::size_t t = 0; t < rec.samples; ++t) {
        const double v = rec.at(c, t);
        sum += v;
        sumsq += v * v;
        ++n;
      }
    }
    const double mean = sum / static_cast<double>(n);
    const double var =
        std::max(sumsq / static_cast<double>(n) - mean * mean, 0.0);
    stats.mean[c] = mean;
    stats.std_dev[c] = std::sqrt(var);
  }
  return stats;
}

void normalize(std::vector<ExperimentRecord>& records,
               const NormStats& stats) {
  if (records.empty()) throw DataError("normalize on empty split");
  for (auto& rec : records) {
    for (std::size_t c = 0; c < rec.channels; ++c) {
      const double mean = stats.mean[c];
      const double denom = std::max(stats.std_dev[c], 1e-8);
      for (std::size_t t = 0; t < rec.samples; ++t) {
        rec.at(c, t) = (rec.at(c, t) - mean) / denom;
      }
    }
  }
}

SplitIndices split(const std::vector<ExperimentRecord>& records,
                   std::uint64_t seed, double train_ratio, double val_ratio) {
  std::array<std::vector<std::size_t>, kNumFaultClasses> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_class[static_cast<std::size_t>(records[i].label)].push_back(i);
  }
  SplitIndices out;
  for (std::size_t c = 0; c < kNumFaultClasses; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < 10) {
      throw DataError(std::string("class ") +
                      fault_name(static_cast<FaultClass>(c)) + " has only " +
                      std::to_string(idx.size()) + " records; need >= 10");
    }
    SeededRng rng(seed, std::string("split/") +
                            fault_name(static_cast<FaultClass>(c)));
    rng.shuffle(idx);
    const auto n = idx.size();
    const auto n_val = static_cast<std::size_t>(
        std::llround(val_ratio * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(
        (1.0 - train_ratio - val_ratio) * static_cast<double>(n)));
    const auto n_train = n - n_val - n_test;
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + n_train);
    out.val.insert(out.val.end(), idx.begin() + n_train,
                   idx.begin() + n_train + n_val);
    out.test.insert(out.test.end(), idx.begin() + n_train + n_val, idx.end());
  }
  return out;
}

std::vector<ExperimentRecord> select(
    const std::vector<ExperimentRecord>& records,
    const std::vector<std::size_t>& indices) {
  std::vector<ExperimentRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(records.at(i));
  return out;
}

namespace {
constexpr char kMagic[4] = {'B', 'R', 'N', 'D'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_dataset(const std::filesystem::path& path,
                   const std::vector<ExperimentRecord>& records) {
  detail::atomic_write(path, [&](detail::BinWriter& w) {
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(records.size()));
    for (const auto& rec : records) {
      w.u8(static_cast<std::uint8_t>(rec.label));
      w.f32(rec.t_f);
      w.u32(static_cast<std::uint32_t>(rec.channels));
      w.u32(static_cast<std::uint32_t>(rec.samples));
      for (double v : rec.data) w.f32(static_cast<float>(v));
    }
  });
}

std::vector<ExperimentRecord> read_dataset(const std::filesystem::path& path,
                                           double sample_period) {
  detail::BinReader r(path);
  if (r.str(4) != std::string(kMagic, 4)) {
    throw DataError("bad dataset magic in " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw DataError("unsupported dataset version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<ExperimentRecord> records(count);
  for (auto& rec : records) {
    const std::uint8_t label = r.u8();
    if (label >= kNumFaultClasses) {
      throw DataError("invalid class id " + std::to_string(label) + " in " +
                      path.string());
    }
    rec.label = static_cast<FaultClass>(label);
    rec.t_f = r.f32();
    rec.channels = r.u32();
    rec.samples = r.u32();
    rec.sample_period = sample_period;
    const auto values = r.f32s(rec.channels * rec.samples);
    rec.data.assign(values.begin(), values.end());
  }
  return records;
}

}  // namespace biresnet
