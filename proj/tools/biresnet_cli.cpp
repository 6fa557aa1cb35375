// Command-line driver: simulate -> prepare -> train -> eval, plus occlusion
// maps, axis-sweep experiments (ablate) and a finite-difference gradient
// check. Every run writes a provenance JSON next to its outputs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "biresnet/gradcheck.hpp"
#include "biresnet/io_util.hpp"
#include "biresnet/harness.hpp"
#include "biresnet/json_io.hpp"
#include "biresnet/provenance.hpp"

extern "C" void openblas_set_num_threads(int);

namespace {

using namespace biresnet;
namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOpts {
  std::string config_path;
  std::uint64_t seed = 42;
  fs::path out_dir = ".";
  bool deterministic = false;

  json config;       // parsed --config file ({} when absent)
  MachineParams machine;
  BiResNetConfig model;
  TrainConfig train;

  void load() {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw UsageError("cannot read config file: " + config_path);
      try {
        in >> config;
      } catch (const json::exception& e) {
        throw UsageError("invalid JSON in " + config_path + ": " + e.what());
      }
    } else {
      config = json::object();
    }
    if (config.contains("machine")) config.at("machine").get_to(machine);
    if (config.contains("model")) config.at("model").get_to(model);
    if (config.contains("train")) config.at("train").get_to(train);
    train.seed = seed;
    fs::create_directories(out_dir);
    if (deterministic) openblas_set_num_threads(1);
  }

  void provenance(const std::string& command, const json& effective,
                  const std::vector<fs::path>& inputs) const {
    write_provenance(out_dir / ("provenance_" + command + ".json"), command,
                     effective, seed, inputs);
  }
};

json manifest_base(const GlobalOpts& g, double sample_period) {
  json m;
  m["machine"] = g.machine;
  m["seed"] = g.seed;
  m["sample_period"] = sample_period;
  m["channels"] = kChannelNames;
  std::vector<std::string> classes;
  for (std::size_t c = 0; c < kNumFaultClasses; ++c) {
    classes.emplace_back(fault_name(static_cast<FaultClass>(c)));
  }
  m["classes"] = classes;
  return m;
}

double manifest_sample_period(const fs::path& dataset) {
  const fs::path manifest = dataset.parent_path() / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    json m;
    in >> m;
    if (m.contains("sample_period")) return m.at("sample_period").get<double>();
  }
  return 1e-3;
}

int cmd_simulate(GlobalOpts& g, int per_class, double duration,
                 double record_period_ms) {
  SimOptions sim;
  sim.duration = duration;
  sim.record_period = record_period_ms * 1e-3;
  const auto records = generate_dataset(g.machine, per_class, g.seed, sim);
  write_dataset(g.out_dir / "dataset.bin", records);

  json m = manifest_base(g, sim.record_period);
  m["per_class"] = per_class;
  m["count"] = records.size();
  m["duration"] = sim.duration;
  detail::atomic_write(g.out_dir / "manifest.json", [&](detail::BinWriter& w) {
    const std::string text = m.dump(2) + "\n";
    w.bytes(text.data(), text.size());
  });
  g.provenance("simulate", m, {});
  std::cout << "wrote " << records.size() << " records to "
            << (g.out_dir / "dataset.bin").string() << "\n";
  return 0;
}

int cmd_prepare(GlobalOpts& g, const fs::path& dataset, double downsample_ms,
                std::optional<double> snr_db, std::uint64_t split_seed) {
  const double base_period = manifest_sample_period(dataset);
  const auto raw = read_dataset(dataset, base_period);
  PrepareOptions opts;
  opts.downsample_factor =
      static_cast<int>(std::llround(downsample_ms * 1e-3 / base_period));
  opts.snr_db = snr_db;
  opts.seed = split_seed;
  const PreparedData data = prepare(raw, opts);
  write_dataset(g.out_dir / "train.bin", data.train);
  write_dataset(g.out_dir / "val.bin", data.val);
  write_dataset(g.out_dir / "test.bin", data.test);

  json m = manifest_base(g, base_period * opts.downsample_factor);
  m["source"] = dataset.string();
  m["downsample_factor"] = opts.downsample_factor;
  m["noise_order"] = "after_downsample";
  if (snr_db) {
    m["snr_db"] = *snr_db;
  } else {
    m["snr_db"] = nullptr;
  }
  m["split_seed"] = split_seed;
  m["counts"] = {{"train", data.train.size()},
                 {"val", data.val.size()},
                 {"test", data.test.size()}};
  m["stats"] = data.stats;
  detail::atomic_write(g.out_dir / "split_manifest.json",
                       [&](detail::BinWriter& w) {
                         const std::string text = m.dump(2) + "\n";
                         w.bytes(text.data(), text.size());
                       });
  g.provenance("prepare", m, {dataset});
  std::cout << "train/val/test = " << data.train.size() << "/"
            << data.val.size() << "/" << data.test.size() << "\n";
  return 0;
}

void write_arch_sidecar(const fs::path& ckpt, const BiResNetConfig& cfg,
                        std::uint64_t init_seed) {
  json j;
  j["model"] = cfg;
  j["init_seed"] = init_seed;
  detail::atomic_write(fs::path(ckpt.string() + ".json"),
                       [&](detail::BinWriter& w) {
                         const std::string text = j.dump(2) + "\n";
                         w.bytes(text.data(), text.size());
                       });
}

BiResNetConfig read_arch_sidecar(const fs::path& ckpt) {
  const fs::path sidecar = ckpt.string() + ".json";
  std::ifstream in(sidecar);
  if (!in) {
    throw DataError("missing architecture sidecar: " + sidecar.string());
  }
  json j;
  in >> j;
  return j.at("model").get<BiResNetConfig>();
}

int cmd_train(GlobalOpts& g, const fs::path& data_dir) {
  const auto train_recs = read_dataset(data_dir / "train.bin");
  const auto val_recs = read_dataset(data_dir / "val.bin");
  BiResNetConfig cfg = g.model;
  cfg.input_channels = train_recs.at(0).channels;
  BiResNet<float> model(cfg, g.seed);
  std::cout << "parameters: " << model.param_count() << "\n";

  TrainOutputs out;
  out.final_checkpoint = g.out_dir / "model.ckpt";
  out.best_checkpoint = g.out_dir / "model_best.ckpt";
  out.history_csv = g.out_dir / "history.csv";
  out.verbose = true;
  const TrainResult result = train(model, train_recs, val_recs, g.train, out);
  write_arch_sidecar(*out.final_checkpoint, cfg, g.seed);
  write_arch_sidecar(*out.best_checkpoint, cfg, g.seed);

  json effective;
  effective["model"] = cfg;
  effective["train"] = g.train;
  g.provenance("train", effective,
               {data_dir / "train.bin", data_dir / "val.bin"});
  std::cout << "best validation accuracy: " << result.best_val_accuracy
            << "\n";
  return 0;
}

int cmd_eval(GlobalOpts& g, const fs::path& checkpoint, const fs::path& data) {
  const BiResNetConfig cfg = read_arch_sidecar(checkpoint);
  BiResNet<float> model(cfg, 0);
  load_model(model, checkpoint);
  const auto records = read_dataset(data);
  const EvalResult res = evaluate(model, records);
  std::cout << "accuracy: " << res.accuracy << "\n";
  std::cout << "confusion (rows = truth):\n";
  for (std::size_t r = 0; r < res.confusion.size(); ++r) {
    std::cout << fault_name(static_cast<FaultClass>(r)) << "\t";
    for (std::size_t c = 0; c < res.confusion[r].size(); ++c) {
      std::cout << res.confusion[r][c]
                << (c + 1 < res.confusion[r].size() ? " " : "\n");
    }
  }
  json effective;
  effective["model"] = cfg;
  g.provenance("eval", effective, {checkpoint, data});
  return 0;
}

int cmd_occlude(GlobalOpts& g, const fs::path& checkpoint, const fs::path& data,
                int index, const OcclusionOptions& opts, bool emit_svg) {
  const BiResNetConfig cfg = read_arch_sidecar(checkpoint);
  BiResNet<float> model(cfg, 0);
  load_model(model, checkpoint);
  const auto records = read_dataset(data);
  if (index < 0 || static_cast<std::size_t>(index) >= records.size()) {
    throw UsageError("record index " + std::to_string(index) +
                     " out of range [0," + std::to_string(records.size()) +
                     ")");
  }
  const OcclusionMap map = occlusion_map(model, records[(std::size_t)index], opts);

  const std::string stem = "occlusion_" + std::to_string(index);
  std::ofstream csv(g.out_dir / (stem + ".csv"));
  csv << "channel,window_start,importance\n" << std::setprecision(17);
  for (std::size_t r = 0; r < map.rows; ++r) {
    const char* label = map.rows == kChannelNames.size() ? kChannelNames[r]
                                                         : "all";
    for (std::size_t w = 0; w < map.starts.size(); ++w) {
      csv << label << "," << map.starts[w] << "," << map.at(r, w) << "\n";
    }
  }
  if (emit_svg) write_occlusion_svg(map, g.out_dir / (stem + ".svg"));

  json effective;
  effective["window"] = opts.window;
  effective["stride"] = opts.stride;
  effective["logit_drop"] = opts.logit_drop;
  effective["all_channels"] = opts.all_channels;
  effective["index"] = index;
  g.provenance("occlude", effective, {checkpoint, data});
  return 0;
}

int cmd_ablate(GlobalOpts& g, const std::string& axis,
               std::vector<std::string> values,
               std::vector<std::uint64_t> seeds, int per_class,
               double resolution_ms, std::optional<double> snr_db) {
  ExperimentGrid grid;
  if (axis == "resolution") {
    grid.axis = GridAxis::resolution;
    if (values.empty()) values = {"1", "2", "5", "10", "20"};
  } else if (axis == "snr") {
    grid.axis = GridAxis::snr;
    if (values.empty()) values = {"clean", "-5", "-3", "-1", "1", "3", "5"};
  } else if (axis == "n") {
    grid.axis = GridAxis::intralink_n;
    if (values.empty()) values = {"0", "1", "2", "3", "4"};
  } else if (axis == "st") {
    grid.axis = GridAxis::st_block;
    if (values.empty()) values = {"st", "plain"};
  } else if (axis == "feature") {
    // handled below: one row per channel group instead of axis values
    grid.axis = GridAxis::resolution;
  } else {
    throw UsageError("unknown ablation axis '" + axis +
                     "' (resolution|snr|n|st|feature)");
  }
  grid.values = values;
  if (!seeds.empty()) grid.seeds = seeds;
  grid.per_class = per_class;
  grid.machine = g.machine;
  grid.model = g.model;
  grid.train = g.train;
  grid.resolution_ms = static_cast<int>(std::llround(resolution_ms));
  grid.snr_db = snr_db;
  grid.out_dir = g.out_dir / "histories";

  json effective;
  effective["axis"] = axis;
  effective["values"] = grid.values;
  effective["seeds"] = grid.seeds;
  effective["per_class"] = grid.per_class;
  effective["model"] = grid.model;
  effective["train"] = grid.train;
  effective["machine"] = grid.machine;

  if (axis == "feature") {
    const auto rows = feature_importance(grid);
    write_feature_csv(rows, g.out_dir / "feature_importance.csv");
    g.provenance("ablate", effective, {});
    for (const auto& r : rows) {
      std::cout << r.group << ": " << r.mean_accuracy << " +- "
                << r.std_accuracy << "\n";
    }
    return 0;
  }

  const auto cells = run_grid(grid);
  write_grid_csv(cells, g.out_dir / "grid.csv");
  g.provenance("ablate", effective, {});
  for (const auto& c : cells) {
    if (c.failed) {
      std::cout << c.axis_value << ": FAILED (" << c.error << ")\n";
    } else {
      std::cout << c.axis_value << ": " << c.mean_accuracy << " +- "
                << c.std_accuracy << "\n";
    }
  }
  return 0;
}

int cmd_gradcheck(GlobalOpts& g) {
  BiResNetConfig cfg;
  cfg.input_channels = 3;
  cfg.stage_filters = {8, 8};
  cfg.blocks_per_stage = 1;
  cfg.num_classes = 3;
  cfg.intralink_n = g.model.intralink_n;
  BiResNet<double> model(cfg, g.seed);

  const std::size_t batch = 2, t_len = 12;
  Tensor<double> x({batch, cfg.input_channels, t_len});
  SeededRng rng(g.seed, "gradcheck/input");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  const std::vector<int> labels = {0, 2};

  auto loss_fn = [&]() {
    Tensor<double> logits = model.forward(x, Mode::train);
    return softmax_cross_entropy(logits, labels).loss;
  };
  model.zero_grads();
  Tensor<double> logits = model.forward(x, Mode::train);
  auto ce = softmax_cross_entropy(logits, labels);
  model.backward(ce.dlogits);

  // Snapshot the analytic gradients before finite differences mutate values.
  std::vector<std::vector<double>> analytic;
  for (const auto& p : model.params()) {
    std::vector<double> gcopy(p->grad.size());
    for (std::size_t i = 0; i < gcopy.size(); ++i) gcopy[i] = p->grad[i];
    analytic.push_back(std::move(gcopy));
  }

  const double threshold = 1e-4;
  double worst = 0.0;
  std::printf("%-28s %12s\n", "parameter", "max rel err");
  std::size_t pi = 0;
  for (const auto& p : model.params()) {
    GradCheckTerm term{p->name, p->value.data(), analytic[pi].data(),
                       p->value.size()};
    const GradCheckReport rep = finite_diff_check(loss_fn, {term});
    std::printf("%-28s %12.3e\n", p->name.c_str(), rep.max_rel_err);
    worst = std::max(worst, rep.max_rel_err);
    ++pi;
  }
  std::printf("worst: %.3e (threshold %.0e)\n", worst, threshold);
  if (worst >= threshold) {
    throw NumericalError("gradient check failed: " + std::to_string(worst));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bi-ResNet motor fault diagnosis toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--seed", g.seed, "root seed");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_flag("--deterministic", g.deterministic,
               "single-threaded BLAS, bit-reproducible outputs");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a labeled dataset");
  int per_class = 100;
  double duration = 1.0, record_period_ms = 1.0;
  sim->add_option("--per-class", per_class, "records per fault class");
  sim->add_option("--duration", duration, "seconds per record");
  sim->add_option("--record-period-ms", record_period_ms,
                  "sampling period in ms");

  // prepare
  auto* prep = app.add_subcommand(
      "prepare", "downsample/noise/split/normalize a dataset");
  fs::path prep_dataset;
  double downsample_ms = 10.0;
  double prep_snr = 0.0;
  std::uint64_t split_seed = 0;
  prep->add_option("--dataset", prep_dataset, "dataset.bin from simulate")
      ->required();
  prep->add_option("--downsample-ms", downsample_ms, "target sample period");
  auto* snr_opt = prep->add_option("--snr-db", prep_snr,
                                   "add noise at this SNR (omit for clean)");
  prep->add_option("--split-seed", split_seed,
                   "split/noise seed (defaults to --seed)");

  // train
  auto* tr = app.add_subcommand("train", "train a model on a prepared split");
  fs::path data_dir = ".";
  tr->add_option("--data-dir", data_dir, "directory with train.bin/val.bin");
  int epochs = 0, batch_size = 0, intralink_n = -1;
  double lr = 0.0;
  bool plain_stack = false, no_intralink = false;
  tr->add_option("--epochs", epochs, "training epochs");
  tr->add_option("--batch-size", batch_size, "batch size");
  tr->add_option("--lr", lr, "initial learning rate");
  tr->add_option("--intralink-n", intralink_n, "intra-link group size n");
  tr->add_flag("--plain-stack", plain_stack,
               "replace ST blocks with stacked plain convs");
  tr->add_flag("--no-intralink", no_intralink, "plain ReLU residual blocks");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  fs::path eval_ckpt, eval_data;
  ev->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  ev->add_option("--data", eval_data, "dataset to evaluate")->required();

  // occlude
  auto* oc = app.add_subcommand("occlude", "occlusion sensitivity map");
  fs::path oc_ckpt, oc_data;
  int oc_index = 0;
  OcclusionOptions oc_opts;
  bool oc_svg = true;
  oc->add_option("--checkpoint", oc_ckpt, "model checkpoint")->required();
  oc->add_option("--data", oc_data, "dataset with the record")->required();
  oc->add_option("--index", oc_index, "record index");
  oc->add_option("--window", oc_opts.window, "occlusion window (samples)");
  oc->add_option("--stride", oc_opts.stride, "occlusion stride (samples)");
  oc->add_flag("--logit", oc_opts.logit_drop, "score logit drop, not p_true");
  oc->add_flag("--all-channels", oc_opts.all_channels,
               "occlude every channel simultaneously");
  oc->add_flag("!--no-svg", oc_svg, "skip the SVG heatmap");

  // ablate
  auto* ab = app.add_subcommand("ablate", "axis-sweep experiment grid");
  std::string axis = "n";
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds;
  int ab_per_class = 60;
  double ab_resolution = 10.0, ab_snr = -1.0;
  bool ab_clean = false;
  ab->add_option("--axis", axis, "resolution|snr|n|st|feature");
  ab->add_option("--values", values, "axis values (default: full sweep)");
  ab->add_option("--seeds", seeds, "seeds per cell (>=3)");
  ab->add_option("--per-class", ab_per_class, "records per class");
  ab->add_option("--resolution-ms", ab_resolution,
                 "fixed sample period when axis != resolution");
  ab->add_option("--snr-db", ab_snr, "fixed SNR when axis != snr");
  ab->add_flag("--clean", ab_clean, "no noise on non-snr axes");

  // gradcheck
  auto* gc = app.add_subcommand(
      "gradcheck", "finite-difference check of every parameter gradient");

  for (auto* s : {sim, prep, tr, ev, oc, ab, gc}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    g.load();
    if (sim->count("--per-class") == 0 && g.config.contains("per_class")) {
      per_class = g.config.at("per_class").get<int>();
    }
    if (epochs > 0) g.train.epochs = epochs;
    if (batch_size > 0) g.train.batch_size = batch_size;
    if (lr > 0) g.train.lr0 = lr;
    if (intralink_n >= 0) {
      g.model.intralink_n = std::max(intralink_n, 1);
      g.model.use_intralink = intralink_n > 0;
    }
    if (plain_stack) g.model.block_variant = BlockVariant::plain_stack;
    if (no_intralink) g.model.use_intralink = false;

    if (sim->parsed()) {
      return cmd_simulate(g, per_class, duration, record_period_ms);
    }
    if (prep->parsed()) {
      std::optional<double> snr;
      if (snr_opt->count() > 0) snr = prep_snr;
      if (prep->count("--split-seed") == 0) split_seed = g.seed;
      return cmd_prepare(g, prep_dataset, downsample_ms, snr, split_seed);
    }
    if (tr->parsed()) return cmd_train(g, data_dir);
    if (ev->parsed()) return cmd_eval(g, eval_ckpt, eval_data);
    if (oc->parsed()) {
      return cmd_occlude(g, oc_ckpt, oc_data, oc_index, oc_opts, oc_svg);
    }
    if (ab->parsed()) {
      std::optional<double> snr = ab_clean ? std::optional<double>{}
                                           : std::optional<double>{ab_snr};
      return cmd_ablate(g, axis, values, seeds, ab_per_class, ab_resolution,
                        snr);
    }
    if (gc->parsed()) return cmd_gradcheck(g);
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
