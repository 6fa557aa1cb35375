#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "biresnet/datapipe.hpp"
#include "biresnet/model.hpp"
#include "biresnet/motorsim.hpp"
#include "biresnet/trainer.hpp"

namespace biresnet {

// ---------------------------------------------------------------------------
// Occlusion sensitivity: zero one (channel, window) patch at a time and
// measure the drop in the true-class score.
// ---------------------------------------------------------------------------

struct OcclusionOptions {
  std::size_t window = 50;
  std::size_t stride = 25;
  bool logit_drop = false;    // default scores the softmax probability drop
  bool all_channels = false;  // occlude the window across every channel at once
};

struct OcclusionMap {
  std::size_t window = 0;
  std::size_t stride = 0;
  std::vector<std::size_t> starts;  // window start sample indices
  std::size_t rows = 0;             // channels, or 1 in all-channel mode
  int true_class = 0;
  double base_score = 0.0;          // p_true (or logit) of the intact record
  std::vector<double> importance;   // [rows][starts.size()]

  double at(std::size_t row, std::size_t w) const {
    return importance[row * starts.size() + w];
  }
  // (row, start-of-window) of the largest importance; first win on ties.
  std::pair<std::size_t, std::size_t> argmax() const;
};

// Start offsets 0, stride, 2*stride, ... covering [0, samples); the final
// window is clamped to the record end.
std::vector<std::size_t> occlusion_window_starts(std::size_t samples,
                                                 std::size_t window,
                                                 std::size_t stride);

namespace detail {

template <typename T>
std::vector<double> class_scores(BiResNet<T>& model, const Tensor<T>& x,
                                 int cls, bool logit) {
  Tensor<T> logits = model.forward(x, Mode::eval);
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  std::vector<double> scores(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (logit) {
      scores[b] = static_cast<double>(logits(b, static_cast<std::size_t>(cls)));
      continue;
    }
    double mx = logits(b, std::size_t(0));
    for (std::size_t j = 1; j < k; ++j) {
      mx = std::max(mx, static_cast<double>(logits(b, j)));
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      denom += std::exp(static_cast<double>(logits(b, j)) - mx);
    }
    scores[b] =
        std::exp(static_cast<double>(logits(b, static_cast<std::size_t>(cls))) -
                 mx) /
        denom;
  }
  return scores;
}

}  // namespace detail

template <typename T>
OcclusionMap occlusion_map(BiResNet<T>& model, const ExperimentRecord& rec,
                           const OcclusionOptions& opt = {}) {
  if (opt.window == 0 || opt.stride == 0) {
    throw UsageError("occlusion window and stride must be positive");
  }
  if (opt.window > rec.samples) {
    throw DataError("occlusion window " + std::to_string(opt.window) +
                    " exceeds record length " + std::to_string(rec.samples));
  }
  OcclusionMap map;
  map.window = opt.window;
  map.stride = opt.stride;
  map.starts = occlusion_window_starts(rec.samples, opt.window, opt.stride);
  map.rows = opt.all_channels ? 1 : rec.channels;
  map.true_class = static_cast<int>(rec.label);
  map.importance.assign(map.rows * map.starts.size(), 0.0);

  Tensor<T> x0({1, rec.channels, rec.samples});
  for (std::size_t i = 0; i < rec.data.size(); ++i) {
    x0[i] = static_cast<T>(rec.data[i]);
  }
  map.base_score =
      detail::class_scores(model, x0, map.true_class, opt.logit_drop)[0];

  const std::size_t total = map.rows * map.starts.size();
  constexpr std::size_t kChunk = 64;
  for (std::size_t first = 0; first < total; first += kChunk) {
    const std::size_t count = std::min(kChunk, total - first);
    Tensor<T> batch({count, rec.channels, rec.samples});
    for (std::size_t b = 0; b < count; ++b) {
      const std::size_t idx = first + b;
      const std::size_t row = idx / map.starts.size();
      const std::size_t start = map.starts[idx % map.starts.size()];
      const std::size_t end = std::min(start + opt.window, rec.samples);
      for (std::size_t i = 0; i < rec.data.size(); ++i) {
        batch[b * rec.data.size() + i] = static_cast<T>(rec.data[i]);
      }
      const std::size_t c_lo = opt.all_channels ? 0 : row;
      const std::size_t c_hi = opt.all_channels ? rec.channels : row + 1;
      for (std::size_t c = c_lo; c < c_hi; ++c) {
        for (std::size_t t = start; t < end; ++t) {
          batch(b, c, t) = T(0);
        }
      }
    }
    const auto scores =
        detail::class_scores(model, batch, map.true_class, opt.logit_drop);
    for (std::size_t b = 0; b < count; ++b) {
      map.importance[first + b] = map.base_score - scores[b];
    }
  }
  return map;
}

// Channels-by-windows heatmap; linear color scale, static SVG.
void write_occlusion_svg(const OcclusionMap& map,
                         const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset preparation pipeline shared by the CLI and the experiment grids:
// downsample -> (optional) noise -> stratified split -> normalize with
// training-split statistics.
// ---------------------------------------------------------------------------

struct PrepareOptions {
  int downsample_factor = 1;
  std::optional<double> snr_db;  // nullopt = clean
  std::uint64_t seed = 0;        // drives both noise and the split
};

struct PreparedData {
  std::vector<ExperimentRecord> train, val, test;
  NormStats stats;
};

PreparedData prepare(const std::vector<ExperimentRecord>& raw,
                     const PrepareOptions& opts);

// One full train/eval pass; returns test accuracy.
double train_eval(const PreparedData& data, const BiResNetConfig& model_cfg,
                  const TrainConfig& train_cfg,
                  const std::optional<std::filesystem::path>& history_csv = {});

// ---------------------------------------------------------------------------
// Experiment grids: sweep one axis, >=3 seeds per cell, mean +- std accuracy.
// ---------------------------------------------------------------------------

enum class GridAxis { resolution, snr, intralink_n, st_block };

struct ExperimentGrid {
  GridAxis axis = GridAxis::resolution;
  // Axis values as text: resolution "1|2|5|10|20" (ms), snr "clean|-5|...|5",
  // intralink_n "0".."4", st_block "st|plain".
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int per_class = 60;
  MachineParams machine;
  BiResNetConfig model;
  TrainConfig train;
  SimOptions sim;  // base resolution; cells downsample from here
  // Fixed settings for the axes not being swept.
  int resolution_ms = 10;
  std::optional<double> snr_db = -1.0;
  std::filesystem::path out_dir;  // per-cell history files; empty = skip
};

struct GridCellResult {
  std::string axis_value;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::string config_hash;
  bool failed = false;
  std::string error;
};

std::vector<GridCellResult> run_grid(const ExperimentGrid& grid);
void write_grid_csv(const std::vector<GridCellResult>& cells,
                    const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Single-feature importance: retrain on one channel group at a time.
// ---------------------------------------------------------------------------

struct FeatureGroup {
  std::string name;
  std::vector<std::size_t> channels;
};

// stator_voltage {v_a,v_b,v_c}, stator_current {i_a,i_b,i_c},
// rotor_current {i_f}, speed {w}.
const std::vector<FeatureGroup>& feature_groups();

std::vector<ExperimentRecord> mask_channels(
    const std::vector<ExperimentRecord>& records,
    const std::vector<std::size_t>& channels);

struct FeatureImportanceRow {
  std::string group;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::string config_hash;
};

std::vector<FeatureImportanceRow> feature_importance(
    const ExperimentGrid& base);  // axis/values ignored; one row per group
void write_feature_csv(const std::vector<FeatureImportanceRow>& rows,
                       const std::filesystem::path& path);

}  // namespace biresnet
