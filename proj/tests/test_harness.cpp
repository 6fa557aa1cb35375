#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"

#include "biresnet/harness.hpp"
#include "biresnet/provenance.hpp"

using namespace biresnet;

namespace {

ExperimentRecord bump_record(std::size_t samples, FaultClass label,
                             std::uint64_t seed) {
  ExperimentRecord rec;
  rec.samples = samples;
  rec.label = label;
  rec.t_f = label == FaultClass::NF ? 0.0f : 0.4f;
  rec.data.resize(rec.channels * samples);
  SeededRng rng(seed, "harness/rec");
  for (auto& v : rec.data) v = rng.normal();
  return rec;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BiResNetConfig tiny_config() {
  BiResNetConfig cfg;
  cfg.stage_filters = {8};
  cfg.blocks_per_stage = 1;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Occlusion
// ---------------------------------------------------------------------------

TEST_CASE("occlusion windows: strided starts cover the whole record") {
  const auto starts = occlusion_window_starts(100, 50, 25);
  CHECK(starts == std::vector<std::size_t>{0, 25, 50, 75});
  const auto dense = occlusion_window_starts(10, 4, 1);
  CHECK(dense.size() == 10);
  CHECK(dense.front() == 0);
  CHECK(dense.back() == 9);
}

TEST_CASE("occlusion: input-blind model has exactly zero importance") {
  BiResNet<float> model(tiny_config(), 1);
  for (auto& p : model.params()) {
    if (p->name == "root.conv.w") p->value.fill(0.0f);
  }
  ExperimentRecord rec = bump_record(64, FaultClass::OP, 2);
  // initialize BN running stats
  Tensor<float> x({1, rec.channels, rec.samples});
  for (std::size_t i = 0; i < rec.data.size(); ++i)
    x[i] = static_cast<float>(rec.data[i]);
  model.forward(x, Mode::train);

  OcclusionOptions opt;
  opt.window = 16;
  opt.stride = 16;
  const OcclusionMap map = occlusion_map(model, rec, opt);
  CHECK(map.rows == 8);
  CHECK(map.starts.size() == 4);
  for (double v : map.importance) CHECK(v == 0.0);
}

TEST_CASE("occlusion: zero patches change nothing on an all-zero record") {
  BiResNet<float> model(tiny_config(), 3);
  ExperimentRecord rec = bump_record(32, FaultClass::NF, 4);
  for (auto& v : rec.data) v = 0.0;
  Tensor<float> x({1, rec.channels, rec.samples});
  model.forward(x, Mode::train);

  OcclusionOptions opt;
  opt.window = 8;
  opt.stride = 8;
  const OcclusionMap map = occlusion_map(model, rec, opt);
  for (double v : map.importance) CHECK(v == 0.0);
}

TEST_CASE("occlusion: probability drops stay within [-1, 1]") {
  BiResNet<float> model(tiny_config(), 5);
  ExperimentRecord rec = bump_record(48, FaultClass::VREC, 6);
  Tensor<float> x({1, rec.channels, rec.samples});
  for (std::size_t i = 0; i < rec.data.size(); ++i)
    x[i] = static_cast<float>(rec.data[i]);
  model.forward(x, Mode::train);

  OcclusionOptions opt;
  opt.window = 12;
  opt.stride = 6;
  const OcclusionMap map = occlusion_map(model, rec, opt);
  CHECK(map.base_score >= 0.0);
  CHECK(map.base_score <= 1.0);
  for (double v : map.importance) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  const auto [row, start] = map.argmax();
  CHECK(row < map.rows);
  bool found = false;
  for (auto s : map.starts) found = found || s == start;
  CHECK(found);
}

TEST_CASE("occlusion: all-channel mode collapses to one row") {
  BiResNet<float> model(tiny_config(), 7);
  ExperimentRecord rec = bump_record(32, FaultClass::REVD, 8);
  Tensor<float> x({1, rec.channels, rec.samples});
  model.forward(x, Mode::train);
  OcclusionOptions opt;
  opt.window = 8;
  opt.stride = 8;
  opt.all_channels = true;
  const OcclusionMap map = occlusion_map(model, rec, opt);
  CHECK(map.rows == 1);
  CHECK(map.importance.size() == map.starts.size());
}

TEST_CASE("occlusion: invalid options are rejected") {
  BiResNet<float> model(tiny_config(), 9);
  ExperimentRecord rec = bump_record(32, FaultClass::NF, 10);
  OcclusionOptions zero;
  zero.window = 0;
  CHECK_THROWS_AS(occlusion_map(model, rec, zero), UsageError);
  OcclusionOptions wide;
  wide.window = 64;
  CHECK_THROWS_AS(occlusion_map(model, rec, wide), DataError);
}

TEST_CASE("occlusion: SVG heatmap is written") {
  OcclusionMap map;
  map.window = 8;
  map.stride = 8;
  map.starts = {0, 8, 16};
  map.rows = 8;
  map.importance.assign(24, 0.0);
  map.importance[5] = 0.4;
  map.importance[10] = -0.2;
  const auto path = std::filesystem::temp_directory_path() / "brt_occ.svg";
  write_occlusion_svg(map, path);
  const std::string svg = slurp(path);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("v_a") != std::string::npos);  // channel labels present
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------
// Channel masking and feature groups
// ---------------------------------------------------------------------------

TEST_CASE("feature groups: cover all eight channels without overlap") {
  std::set<std::size_t> seen;
  for (const auto& g : feature_groups()) {
    for (auto c : g.channels) {
      CHECK(seen.insert(c).second);
    }
  }
  CHECK(seen.size() == 8);
}

TEST_CASE("mask_channels: keeps the selected channels in order") {
  std::vector<ExperimentRecord> recs{bump_record(16, FaultClass::OP, 11)};
  const auto masked = mask_channels(recs, {3, 4, 5});
  REQUIRE(masked.size() == 1);
  CHECK(masked[0].channels == 3);
  CHECK(masked[0].label == recs[0].label);
  CHECK(masked[0].t_f == recs[0].t_f);
  for (std::size_t t = 0; t < 16; ++t) {
    CHECK(masked[0].at(0, t) == recs[0].at(3, t));
    CHECK(masked[0].at(1, t) == recs[0].at(4, t));
    CHECK(masked[0].at(2, t) == recs[0].at(5, t));
  }
  CHECK_THROWS_AS(mask_channels(recs, {}), UsageError);
  CHECK_THROWS_AS(mask_channels(recs, {8}), DataError);
}

// ---------------------------------------------------------------------------
// prepare()
// ---------------------------------------------------------------------------

TEST_CASE("prepare: downsample, split, and normalize in one pass") {
  std::vector<ExperimentRecord> raw;
  for (std::size_t c = 0; c < 6; ++c) {
    for (int i = 0; i < 20; ++i) {
      raw.push_back(bump_record(100, static_cast<FaultClass>(c),
                                c * 100 + (std::uint64_t)i));
    }
  }
  PrepareOptions opts;
  opts.downsample_factor = 2;
  opts.snr_db = 5.0;
  opts.seed = 3;
  const PreparedData data = prepare(raw, opts);
  CHECK(data.train.size() == 96);
  CHECK(data.val.size() == 12);
  CHECK(data.test.size() == 12);
  CHECK(data.train[0].samples == 50);
  REQUIRE(data.stats.mean.size() == 8);

  // training split is normalized: per-channel mean ~0, std ~1
  for (std::size_t c = 0; c < 8; ++c) {
    double sum = 0, sumsq = 0, n = 0;
    for (const auto& r : data.train) {
      for (std::size_t t = 0; t < r.samples; ++t) {
        sum += r.at(c, t);
        sumsq += r.at(c, t) * r.at(c, t);
        n += 1;
      }
    }
    const double mean = sum / n;
    CHECK(std::fabs(mean) < 1e-9);
    CHECK(sumsq / n - mean * mean == doctest::Approx(1.0).epsilon(1e-6));
  }

  // deterministic end to end
  const PreparedData again = prepare(raw, opts);
  REQUIRE(again.train.size() == data.train.size());
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    for (std::size_t j = 0; j < data.train[i].data.size(); ++j) {
      CHECK(again.train[i].data[j] == data.train[i].data[j]);
    }
  }
}

// ---------------------------------------------------------------------------
// Grid bookkeeping
// ---------------------------------------------------------------------------

TEST_CASE("config_hash: key order does not matter, values do") {
  nlohmann::json a, b, c;
  a["lr"] = 0.01;
  a["epochs"] = 30;
  b["epochs"] = 30;
  b["lr"] = 0.01;
  c["epochs"] = 31;
  c["lr"] = 0.01;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).rfind("fnv1a64:", 0) == 0);
}

TEST_CASE("grid csv: header and one row per cell") {
  std::vector<GridCellResult> cells;
  cells.push_back({"10", 0.97, 0.01, "fnv1a64:0123456789abcdef", false, ""});
  cells.push_back({"20", 0.0, 0.0, "fnv1a64:fedcba9876543210", true,
                   "integrator diverged"});
  const auto path = std::filesystem::temp_directory_path() / "brt_grid.csv";
  write_grid_csv(cells, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "value,mean_accuracy,std_accuracy,config_hash,status,error");
  REQUIRE(std::getline(in, line));
  CHECK(line.rfind("10,", 0) == 0);
  CHECK(line.find("ok") != std::string::npos);
  REQUIRE(std::getline(in, line));
  CHECK(line.find("failed") != std::string::npos);
  CHECK(line.find("integrator diverged") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("feature csv: header and group rows") {
  std::vector<FeatureImportanceRow> rows;
  rows.push_back({"stator_current", 0.9, 0.02, "fnv1a64:0000000000000000"});
  const auto path = std::filesystem::temp_directory_path() / "brt_feat.csv";
  write_feature_csv(rows, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "group,mean_accuracy,std_accuracy,config_hash");
  REQUIRE(std::getline(in, line));
  CHECK(line.rfind("stator_current,", 0) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("run_grid: fewer than three seeds is rejected") {
  ExperimentGrid grid;
  grid.seeds = {1, 2};
  grid.values = {"10"};
  CHECK_THROWS_AS(run_grid(grid), UsageError);
}

// ---------------------------------------------------------------------------
// Provenance
// ---------------------------------------------------------------------------

TEST_CASE("provenance: file is valid JSON and reruns are byte-identical") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto input = dir / "brt_input.bin";
  {
    std::ofstream out(input, std::ios::binary);
    out << "payload";
  }
  nlohmann::json cfg;
  cfg["epochs"] = 5;

  const auto prov = dir / "brt_prov.json";
  write_provenance(prov, "train", cfg, 42, {input});
  const std::string first = slurp(prov);
  write_provenance(prov, "train", cfg, 42, {input});
  CHECK(slurp(prov) == first);

  const auto j = nlohmann::json::parse(first);
  CHECK(j["command"] == "train");
  CHECK(j["seed"] == 42);
  CHECK(j["config"]["epochs"] == 5);
  REQUIRE(j["inputs"].size() == 1);
  const std::string h = j["inputs"]["brt_input.bin"];
  CHECK(h == file_content_hash(input));
  CHECK(h.rfind("fnv1a64:", 0) == 0);

  // hash tracks content
  {
    std::ofstream out(input, std::ios::binary);
    out << "different";
  }
  CHECK(file_content_hash(input) != h);
  std::filesystem::remove(input);
  std::filesystem::remove(prov);
}

TEST_CASE("fnv1a64: known vectors") {
  // standard FNV-1a test vectors
  CHECK(fnv1a64_bytes("", 0) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64_bytes("a", 1) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64_bytes("foobar", 6) == 0x85944171f73967e8ULL);
}
