#include "biresnet/harness.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"

#include "biresnet/json_io.hpp"
#include "biresnet/provenance.hpp"

namespace biresnet {

std::pair<std::size_t, std::size_t> OcclusionMap::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < importance.size(); ++i) {
    if (importance[i] > importance[best]) best = i;
  }
  return {best / starts.size(), starts[best % starts.size()]};
}

std::vector<std::size_t> occlusion_window_starts(std::size_t samples,
                                                 std::size_t window,
                                                 std::size_t stride) {
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < samples; s += stride) starts.push_back(s);
  (void)window;
  return starts;
}

void write_occlusion_svg(const OcclusionMap& map,
                         const std::filesystem::path& path) {
  const std::size_t cols = map.starts.size();
  const int cell_w = 14, cell_h = 22, label_w = 64, margin = 4;
  const int width = label_w + static_cast<int>(cols) * cell_w + 2 * margin;
  const int height = static_cast<int>(map.rows) * cell_h + 2 * margin + 18;

  double max_abs = 1e-12;
  for (double v : map.importance) max_abs = std::max(max_abs, std::fabs(v));

  std::ofstream out(path);
  if (!out) throw DataError("cannot write SVG: " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t r = 0; r < map.rows; ++r) {
    const char* label =
        map.rows == kChannelNames.size() ? kChannelNames[r] : "all";
    out << "<text x=\"" << margin << "\" y=\""
        << margin + static_cast<int>(r) * cell_h + cell_h - 7
        << "\" font-family=\"monospace\" font-size=\"11\">" << label
        << "</text>\n";
    for (std::size_t w = 0; w < cols; ++w) {
      const double v = map.at(r, w) / max_abs;  // linear scale in [-1, 1]
      // positive importance -> red, negative -> blue
      const int other = static_cast<int>(255.0 * (1.0 - std::fabs(v)));
      const int red = v >= 0 ? 255 : other;
      const int blue = v >= 0 ? other : 255;
      out << "<rect x=\"" << label_w + margin + static_cast<int>(w) * cell_w
          << "\" y=\"" << margin + static_cast<int>(r) * cell_h << "\" width=\""
          << cell_w << "\" height=\"" << cell_h << "\" fill=\"rgb(" << red
          << "," << other << "," << blue << ")\"/>\n";
    }
  }
  out << "<text x=\"" << label_w + margin << "\" y=\"" << height - margin
      << "\" font-family=\"monospace\" font-size=\"11\">windows: " << cols
      << " (w=" << map.window << ", s=" << map.stride
      << "), max |importance| = " << std::setprecision(4) << max_abs
      << "</text>\n";
  out << "</svg>\n";
}

PreparedData prepare(const std::vector<ExperimentRecord>& raw,
                     const PrepareOptions& opts) {
  if (raw.empty()) throw DataError("prepare: no records");
  std::vector<ExperimentRecord> processed;
  processed.reserve(raw.size());
  SeededRng noise_seeds(opts.seed, "prepare/noise");
  for (const auto& rec : raw) {
    ExperimentRecord r = downsample(rec, opts.downsample_factor);
    const std::uint64_t rec_seed = noise_seeds.next_u64();
    if (opts.snr_db) r = add_noise(r, *opts.snr_db, rec_seed);
    processed.push_back(std::move(r));
  }
  const SplitIndices idx = split(processed, opts.seed);
  PreparedData data;
  data.train = select(processed, idx.train);
  data.val = select(processed, idx.val);
  data.test = select(processed, idx.test);
  data.stats = compute_stats(data.train);
  normalize(data.train, data.stats);
  normalize(data.val, data.stats);
  normalize(data.test, data.stats);
  return data;
}

double train_eval(const PreparedData& data, const BiResNetConfig& model_cfg,
                  const TrainConfig& train_cfg,
                  const std::optional<std::filesystem::path>& history_csv) {
  BiResNetConfig cfg = model_cfg;
  cfg.input_channels = data.train.at(0).channels;
  BiResNet<float> model(cfg, train_cfg.seed);
  TrainOutputs out;
  out.history_csv = history_csv;
  train(model, data.train, data.val, train_cfg, out);
  return evaluate(model, data.test, train_cfg.batch_size).accuracy;
}

namespace {

struct CellSettings {
  int downsample_factor = 1;
  std::optional<double> snr_db;
  BiResNetConfig model;
};

const char* axis_name(GridAxis axis) {
  switch (axis) {
    case GridAxis::resolution: return "resolution_ms";
    case GridAxis::snr: return "snr_db";
    case GridAxis::intralink_n: return "intralink_n";
    case GridAxis::st_block: return "st_block";
  }
  return "?";
}

CellSettings apply_axis(const ExperimentGrid& g, const std::string& value) {
  CellSettings cell;
  cell.model = g.model;
  const double base_ms = g.sim.record_period * 1e3;
  cell.downsample_factor =
      static_cast<int>(std::llround(g.resolution_ms / base_ms));
  cell.snr_db = g.snr_db;
  switch (g.axis) {
    case GridAxis::resolution:
      cell.downsample_factor =
          static_cast<int>(std::llround(std::stod(value) / base_ms));
      break;
    case GridAxis::snr:
      cell.snr_db = value == "clean" ? std::optional<double>{}
                                     : std::optional<double>{std::stod(value)};
      break;
    case GridAxis::intralink_n: {
      const int n = std::stoi(value);
      cell.model.use_intralink = n > 0;
      cell.model.intralink_n = std::max(n, 1);
      break;
    }
    case GridAxis::st_block:
      if (value == "st") {
        cell.model.block_variant = BlockVariant::spatial_temporal;
      } else if (value == "plain") {
        cell.model.block_variant = BlockVariant::plain_stack;
      } else {
        throw UsageError("st_block axis value must be 'st' or 'plain', got '" +
                         value + "'");
      }
      break;
  }
  return cell;
}

nlohmann::json cell_config_json(const ExperimentGrid& g,
                                const std::string& value,
                                const CellSettings& cell) {
  nlohmann::json j;
  j["axis"] = axis_name(g.axis);
  j["value"] = value;
  j["per_class"] = g.per_class;
  j["downsample_factor"] = cell.downsample_factor;
  if (cell.snr_db) {
    j["snr_db"] = *cell.snr_db;
  } else {
    j["snr_db"] = nullptr;
  }
  j["model"] = cell.model;
  j["train"] = g.train;
  j["machine"] = g.machine;
  j["seeds"] = g.seeds;
  return j;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double sum = 0.0, sumsq = 0.0;
  for (double x : xs) {
    sum += x;
    sumsq += x * x;
  }
  const double n = static_cast<double>(xs.size());
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(sumsq / n - mean * mean, 0.0))};
}

std::string sanitize_csv(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::vector<GridCellResult> run_grid(const ExperimentGrid& grid) {
  if (grid.seeds.size() < 3) {
    throw UsageError("experiment grid needs at least 3 seeds per cell");
  }
  // One simulated dataset per seed, shared by every cell.
  std::map<std::uint64_t, std::vector<ExperimentRecord>> raw_by_seed;
  for (std::uint64_t seed : grid.seeds) {
    raw_by_seed[seed] =
        generate_dataset(grid.machine, grid.per_class, seed, grid.sim);
  }
  if (!grid.out_dir.empty()) {
    std::filesystem::create_directories(grid.out_dir);
  }

  std::vector<GridCellResult> cells;
  for (const std::string& value : grid.values) {
    GridCellResult res;
    res.axis_value = value;
    try {
      const CellSettings cell = apply_axis(grid, value);
      res.config_hash = config_hash(cell_config_json(grid, value, cell));
      std::vector<double> accs;
      for (std::uint64_t seed : grid.seeds) {
        PrepareOptions popts;
        popts.downsample_factor = cell.downsample_factor;
        popts.snr_db = cell.snr_db;
        popts.seed = seed;
        const PreparedData data = prepare(raw_by_seed.at(seed), popts);
        TrainConfig tcfg = grid.train;
        tcfg.seed = seed;
        std::optional<std::filesystem::path> history;
        if (!grid.out_dir.empty()) {
          history = grid.out_dir / ("cell_" + std::string(axis_name(grid.axis)) +
                                    "_" + value + "_seed" +
                                    std::to_string(seed) + ".csv");
        }
        accs.push_back(train_eval(data, cell.model, tcfg, history));
      }
      std::tie(res.mean_accuracy, res.std_accuracy) = mean_std(accs);
    } catch (const Error& e) {
      res.failed = true;
      res.error = e.what();
    }
    cells.push_back(std::move(res));
  }
  return cells;
}

void write_grid_csv(const std::vector<GridCellResult>& cells,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write grid CSV: " + path.string());
  out << "value,mean_accuracy,std_accuracy,config_hash,status,error\n";
  out << std::setprecision(17);
  for (const auto& c : cells) {
    out << sanitize_csv(c.axis_value) << "," << c.mean_accuracy << ","
        << c.std_accuracy << "," << c.config_hash << ","
        << (c.failed ? "failed" : "ok") << "," << sanitize_csv(c.error)
        << "\n";
  }
}

const std::vector<FeatureGroup>& feature_groups() {
  static const std::vector<FeatureGroup> groups = {
      {"stator_voltage", {0, 1, 2}},
      {"stator_current", {3, 4, 5}},
      {"rotor_current", {7}},
      {"speed", {6}},
  };
  return groups;
}

std::vector<ExperimentRecord> mask_channels(
    const std::vector<ExperimentRecord>& records,
    const std::vector<std::size_t>& channels) {
  if (channels.empty()) throw UsageError("channel mask is empty");
  std::vector<ExperimentRecord> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    ExperimentRecord r;
    r.channels = channels.size();
    r.samples = rec.samples;
    r.sample_period = rec.sample_period;
    r.label = rec.label;
    r.t_f = rec.t_f;
    r.data.resize(r.channels * r.samples);
    for (std::size_t ci = 0; ci < channels.size(); ++ci) {
      if (channels[ci] >= rec.channels) {
        throw DataError("channel index " + std::to_string(channels[ci]) +
                        " out of range");
      }
      for (std::size_t t = 0; t < rec.samples; ++t) {
        r.at(ci, t) = rec.at(channels[ci], t);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<FeatureImportanceRow> feature_importance(
    const ExperimentGrid& base) {
  if (base.seeds.size() < 3) {
    throw UsageError("feature importance needs at least 3 seeds");
  }
  std::map<std::uint64_t, std::vector<ExperimentRecord>> raw_by_seed;
  for (std::uint64_t seed : base.seeds) {
    raw_by_seed[seed] =
        generate_dataset(base.machine, base.per_class, seed, base.sim);
  }
  const double base_ms = base.sim.record_period * 1e3;
  const int factor = static_cast<int>(std::llround(base.resolution_ms / base_ms));

  std::vector<FeatureImportanceRow> rows;
  for (const auto& group : feature_groups()) {
    FeatureImportanceRow row;
    row.group = group.name;
    nlohmann::json j;
    j["group"] = group.name;
    j["channels"] = group.channels;
    j["per_class"] = base.per_class;
    j["downsample_factor"] = factor;
    if (base.snr_db) {
      j["snr_db"] = *base.snr_db;
    } else {
      j["snr_db"] = nullptr;
    }
    j["model"] = base.model;
    j["train"] = base.train;
    j["machine"] = base.machine;
    j["seeds"] = base.seeds;
    row.config_hash = config_hash(j);

    std::vector<double> accs;
    for (std::uint64_t seed : base.seeds) {
      const auto masked = mask_channels(raw_by_seed.at(seed), group.channels);
      PrepareOptions popts;
      popts.downsample_factor = factor;
      popts.snr_db = base.snr_db;
      popts.seed = seed;
      const PreparedData data = prepare(masked, popts);
      TrainConfig tcfg = base.train;
      tcfg.seed = seed;
      accs.push_back(train_eval(data, base.model, tcfg));
    }
    std::tie(row.mean_accuracy, row.std_accuracy) = mean_std(accs);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_feature_csv(const std::vector<FeatureImportanceRow>& rows,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write feature CSV: " + path.string());
  out << "group,mean_accuracy,std_accuracy,config_hash\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.group << "," << r.mean_accuracy << "," << r.std_accuracy << ","
        << r.config_hash << "\n";
  }
}

}  // namespace biresnet
