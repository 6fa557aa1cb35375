#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <vector>

#include "biresnet/checkpoint.hpp"
#include "biresnet/datapipe.hpp"
#include "biresnet/model.hpp"
#include "biresnet/motorsim.hpp"
#include "biresnet/param.hpp"
#include "biresnet/rng.hpp"

namespace biresnet {

struct TrainConfig {
  int batch_size = 64;
  int epochs = 100;
  double lr0 = 0.01;
  double plateau_factor = 0.5;
  int plateau_patience = 10;
  double plateau_epsilon = 1e-4;  // accuracy delta counting as "unchanged"
  double l2_lambda = 1e-4;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (batch_size <= 0 || epochs <= 0 || lr0 <= 0 || plateau_factor <= 0 ||
        plateau_patience <= 0 || plateau_epsilon <= 0 || l2_lambda < 0) {
      throw UsageError("invalid training configuration");
    }
  }
};

// Halves the learning rate when the monitored accuracy has not improved by
// more than epsilon for `patience` consecutive epochs. The counter resets on
// improvement or on decay; the first observation counts toward the plateau,
// so `patience` identical epochs from the start trigger a decay.
class PlateauLrScheduler {
 public:
  PlateauLrScheduler(double lr0, double factor, int patience, double epsilon)
      : lr_(lr0), factor_(factor), patience_(patience), epsilon_(epsilon) {}

  // Feed one epoch's accuracy; returns the learning rate for the next epoch.
  double observe(double accuracy) {
    if (seen_ && accuracy > best_ + epsilon_) {
      bad_epochs_ = 0;
    } else {
      ++bad_epochs_;
    }
    best_ = seen_ ? std::max(best_, accuracy) : accuracy;
    seen_ = true;
    if (bad_epochs_ >= patience_) {
      lr_ *= factor_;
      bad_epochs_ = 0;
    }
    return lr_;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double epsilon_;
  double best_ = 0.0;
  bool seen_ = false;
  int bad_epochs_ = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;  // informational; never serialized to CSV
};

using TrainHistory = std::vector<EpochStats>;

inline void write_history_csv(const TrainHistory& history,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history CSV: " + path.string());
  out << "epoch,loss,val_acc,lr\n";
  out << std::setprecision(17);
  for (const auto& e : history) {
    out << e.epoch << "," << e.train_loss << "," << e.val_accuracy << ","
        << e.lr << "\n";
  }
}

struct EvalResult {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

// Packs records[first..first+count) into a [B,C,T] tensor.
template <typename T>
Tensor<T> batch_to_tensor(const std::vector<ExperimentRecord>& records,
                          const std::vector<std::size_t>& order,
                          std::size_t first, std::size_t count) {
  const auto& r0 = records[order[first]];
  Tensor<T> x({count, r0.channels, r0.samples});
  for (std::size_t b = 0; b < count; ++b) {
    const auto& rec = records[order[first + b]];
    if (rec.channels != r0.channels || rec.samples != r0.samples) {
      throw ShapeError("channel", "records in one batch must share shape");
    }
    for (std::size_t i = 0; i < rec.data.size(); ++i) {
      x[b * rec.data.size() + i] = static_cast<T>(rec.data[i]);
    }
  }
  return x;
}

template <typename T>
EvalResult evaluate(BiResNet<T>& model,
                    const std::vector<ExperimentRecord>& records,
                    int batch_size = 64) {
  if (records.empty()) throw DataError("evaluate on empty split");
  const std::size_t k = model.config().num_classes;
  EvalResult res;
  res.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t correct = 0;
  for (std::size_t first = 0; first < records.size();
       first += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(batch_size), records.size() - first);
    Tensor<T> x = batch_to_tensor<T>(records, order, first, count);
    Tensor<T> logits = model.forward(x, Mode::eval);
    for (std::size_t b = 0; b < count; ++b) {
      std::size_t pred = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (logits(b, j) > logits(b, pred)) pred = j;
      }
      const auto truth =
          static_cast<std::size_t>(records[first + b].label);
      res.confusion[truth][pred] += 1;
      if (pred == truth) ++correct;
    }
  }
  res.accuracy = static_cast<double>(correct) /
                 static_cast<double>(records.size());
  return res;
}

struct TrainResult {
  TrainHistory history;
  double best_val_accuracy = 0.0;
};

struct TrainOutputs {
  std::optional<std::filesystem::path> final_checkpoint;
  std::optional<std::filesystem::path> best_checkpoint;
  std::optional<std::filesystem::path> history_csv;
  bool verbose = false;
};

// Runs exactly cfg.epochs epochs; the last incomplete batch of each epoch is
// dropped. The plateau monitor watches validation accuracy.
template <typename T>
TrainResult train(BiResNet<T>& model,
                  const std::vector<ExperimentRecord>& train_split,
                  const std::vector<ExperimentRecord>& val_split,
                  const TrainConfig& cfg, const TrainOutputs& out = {}) {
  cfg.validate();
  if (train_split.empty()) throw DataError("train split is empty");
  if (val_split.empty()) throw DataError("validation split is empty");
  if (train_split.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw DataError("train split smaller than one batch");
  }

  SeededRng shuffle_rng(cfg.seed, "train/shuffle");
  PlateauLrScheduler scheduler(cfg.lr0, cfg.plateau_factor,
                               cfg.plateau_patience, cfg.plateau_epsilon);
  AdamConfig adam;
  adam.lr = cfg.lr0;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  adam.eps = cfg.adam_eps;
  adam.weight_decay_l2 = cfg.l2_lambda;

  std::vector<std::size_t> order(train_split.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  double best_acc = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(order);
    const std::size_t batches =
        train_split.size() / static_cast<std::size_t>(cfg.batch_size);
    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const std::size_t first = bi * static_cast<std::size_t>(cfg.batch_size);
      Tensor<T> x = batch_to_tensor<T>(
          train_split, order, first, static_cast<std::size_t>(cfg.batch_size));
      std::vector<int> labels(static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t b = 0; b < labels.size(); ++b) {
        labels[b] = static_cast<int>(train_split[order[first + b]].label);
      }
      model.zero_grads();
      Tensor<T> logits = model.forward(x, Mode::train);
      auto ce = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(ce.loss)) {
        throw NumericalError(
            "training loss diverged at epoch " + std::to_string(epoch) +
            " batch " + std::to_string(bi) + " (lr=" +
            std::to_string(adam.lr) + ", loss=" + std::to_string(ce.loss) +
            ")");
      }
      loss_sum += ce.loss;
      model.backward(ce.dlogits);
      adam_step(model.params(), adam);
    }

    EvalResult val = evaluate(model, val_split, cfg.batch_size);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.val_accuracy = val.accuracy;
    stats.lr = adam.lr;
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.history.push_back(stats);
    if (out.verbose) {
      std::fprintf(stderr, "epoch %3d  loss %.5f  val_acc %.4f  lr %g\n",
                   epoch, stats.train_loss, stats.val_accuracy, stats.lr);
    }

    if (val.accuracy > best_acc) {
      best_acc = val.accuracy;
      if (out.best_checkpoint) {
        save_model(model, *out.best_checkpoint, /*include_adam=*/false);
      }
    }
    adam.lr = scheduler.observe(val.accuracy);
  }
  result.best_val_accuracy = best_acc;

  if (out.final_checkpoint) {
    save_model(model, *out.final_checkpoint, /*include_adam=*/true);
  }
  if (out.history_csv) write_history_csv(result.history, *out.history_csv);
  return result;
}

}  // namespace biresnet
