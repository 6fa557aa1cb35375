#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "biresnet/errors.hpp"
#include "biresnet/model.hpp"

namespace biresnet {

// On-disk model snapshot ("BRCK"): every parameter at IEEE-754 32-bit plus
// batch-norm running statistics, with an optional Adam state section.
struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
  // Adam section (present when the checkpoint carries optimizer state).
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  std::uint64_t step_count = 0;
};

struct Checkpoint {
  bool has_adam = false;
  std::vector<CheckpointEntry> entries;
};

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

namespace detail {

template <typename T>
CheckpointEntry tensor_entry(const std::string& name, const Tensor<T>& t) {
  CheckpointEntry e;
  e.name = name;
  for (std::size_t d : t.shape()) e.dims.push_back(static_cast<std::uint32_t>(d));
  e.values.reserve(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    e.values.push_back(static_cast<float>(t[i]));
  }
  return e;
}

template <typename T>
void entry_to_tensor(const CheckpointEntry& e, Tensor<T>& t) {
  if (e.values.size() != t.size()) {
    throw DataError("checkpoint entry '" + e.name + "' has " +
                    std::to_string(e.values.size()) + " values, model expects " +
                    std::to_string(t.size()));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<T>(e.values[i]);
  }
}

}  // namespace detail

template <typename T>
Checkpoint snapshot(BiResNet<T>& model, bool include_adam = false) {
  Checkpoint ckpt;
  ckpt.has_adam = include_adam;
  for (const auto& p : model.params()) {
    CheckpointEntry e = detail::tensor_entry(p->name, p->value);
    if (include_adam) {
      e.adam_m = detail::tensor_entry(p->name, p->m).values;
      e.adam_v = detail::tensor_entry(p->name, p->v).values;
      e.step_count = static_cast<std::uint64_t>(p->step_count);
    }
    ckpt.entries.push_back(std::move(e));
  }
  for (auto* bn : model.batchnorms()) {
    if (!bn->state().initialized) continue;
    CheckpointEntry mean =
        detail::tensor_entry(bn->name() + ".running_mean", bn->state().running_mean);
    CheckpointEntry var =
        detail::tensor_entry(bn->name() + ".running_var", bn->state().running_var);
    if (include_adam) {
      mean.adam_m.assign(mean.values.size(), 0.0f);
      mean.adam_v.assign(mean.values.size(), 0.0f);
      var.adam_m.assign(var.values.size(), 0.0f);
      var.adam_v.assign(var.values.size(), 0.0f);
    }
    ckpt.entries.push_back(std::move(mean));
    ckpt.entries.push_back(std::move(var));
  }
  return ckpt;
}

template <typename T>
void restore(BiResNet<T>& model, const Checkpoint& ckpt) {
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : ckpt.entries) by_name[e.name] = &e;

  for (auto& p : model.params()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) {
      throw DataError("checkpoint is missing parameter '" + p->name + "'");
    }
    const CheckpointEntry& e = *it->second;
    detail::entry_to_tensor(e, p->value);
    if (ckpt.has_adam && !e.adam_m.empty()) {
      for (std::size_t i = 0; i < p->m.size(); ++i) {
        p->m[i] = static_cast<T>(e.adam_m[i]);
        p->v[i] = static_cast<T>(e.adam_v[i]);
      }
      p->step_count = static_cast<std::int64_t>(e.step_count);
    }
  }
  for (auto* bn : model.batchnorms()) {
    auto mean_it = by_name.find(bn->name() + ".running_mean");
    auto var_it = by_name.find(bn->name() + ".running_var");
    if (mean_it != by_name.end() && var_it != by_name.end()) {
      if (bn->state().running_mean.size() == 0) {
        bn->state().running_mean =
            Tensor<T>({mean_it->second->values.size()});
        bn->state().running_var = Tensor<T>({var_it->second->values.size()});
      }
      detail::entry_to_tensor(*mean_it->second, bn->state().running_mean);
      detail::entry_to_tensor(*var_it->second, bn->state().running_var);
      bn->state().initialized = true;
    }
  }
}

template <typename T>
void save_model(BiResNet<T>& model, const std::filesystem::path& path,
                bool include_adam = false) {
  save_checkpoint(snapshot(model, include_adam), path);
}

template <typename T>
void load_model(BiResNet<T>& model, const std::filesystem::path& path) {
  restore(model, load_checkpoint(path));
}

}  // namespace biresnet
