#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "biresnet/datapipe.hpp"
#include "biresnet/model.hpp"
#include "biresnet/motorsim.hpp"
#include "biresnet/trainer.hpp"

namespace biresnet {

// Every from_json below tolerates missing keys (defaults stay in place), so a
// partial --config file overrides only the fields it names.
namespace detail {
template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}
}  // namespace detail

inline void to_json(nlohmann::json& j, const MachineParams& p) {
  j = nlohmann::json{{"R_a", p.R_a},     {"R_f", p.R_f},
                     {"L_d", p.L_d},     {"L_q", p.L_q},
                     {"L_0", p.L_0},     {"L_ff", p.L_ff},
                     {"L_af", p.L_af},   {"J", p.J},
                     {"D", p.D},         {"P", p.P},
                     {"P_ref", p.P_ref}, {"f", p.f},
                     {"V", p.V},         {"v_f_nom", p.v_f_nom}};
}

inline void from_json(const nlohmann::json& j, MachineParams& p) {
  detail::maybe(j, "R_a", p.R_a);
  detail::maybe(j, "R_f", p.R_f);
  detail::maybe(j, "L_d", p.L_d);
  detail::maybe(j, "L_q", p.L_q);
  detail::maybe(j, "L_0", p.L_0);
  detail::maybe(j, "L_ff", p.L_ff);
  detail::maybe(j, "L_af", p.L_af);
  detail::maybe(j, "J", p.J);
  detail::maybe(j, "D", p.D);
  detail::maybe(j, "P", p.P);
  detail::maybe(j, "P_ref", p.P_ref);
  detail::maybe(j, "f", p.f);
  detail::maybe(j, "V", p.V);
  detail::maybe(j, "v_f_nom", p.v_f_nom);
}

inline void to_json(nlohmann::json& j, const BiResNetConfig& c) {
  j = nlohmann::json{
      {"input_channels", c.input_channels},
      {"stage_filters", c.stage_filters},
      {"blocks_per_stage", c.blocks_per_stage},
      {"root_kernel", c.root_kernel},
      {"intralink_n", c.intralink_n},
      {"num_classes", c.num_classes},
      {"branch_kernels", c.st.kernel_sizes},
      {"global_kernel", c.st.global_kernel},
      {"block_variant", c.block_variant == BlockVariant::spatial_temporal
                            ? "spatial_temporal"
                            : "plain_stack"},
      {"intralink_position",
       c.intralink_position == IntraLinkPosition::post_add ? "post_add"
                                                           : "post_global_conv"},
      {"use_intralink", c.use_intralink},
  };
}

inline void from_json(const nlohmann::json& j, BiResNetConfig& c) {
  detail::maybe(j, "input_channels", c.input_channels);
  detail::maybe(j, "stage_filters", c.stage_filters);
  detail::maybe(j, "blocks_per_stage", c.blocks_per_stage);
  detail::maybe(j, "root_kernel", c.root_kernel);
  detail::maybe(j, "intralink_n", c.intralink_n);
  detail::maybe(j, "num_classes", c.num_classes);
  detail::maybe(j, "branch_kernels", c.st.kernel_sizes);
  detail::maybe(j, "global_kernel", c.st.global_kernel);
  detail::maybe(j, "use_intralink", c.use_intralink);
  if (auto it = j.find("block_variant"); it != j.end()) {
    const std::string v = it->get<std::string>();
    if (v == "spatial_temporal") {
      c.block_variant = BlockVariant::spatial_temporal;
    } else if (v == "plain_stack") {
      c.block_variant = BlockVariant::plain_stack;
    } else {
      throw UsageError("unknown block_variant '" + v + "'");
    }
  }
  if (auto it = j.find("intralink_position"); it != j.end()) {
    const std::string v = it->get<std::string>();
    if (v == "post_add") {
      c.intralink_position = IntraLinkPosition::post_add;
    } else if (v == "post_global_conv") {
      c.intralink_position = IntraLinkPosition::post_global_conv;
    } else {
      throw UsageError("unknown intralink_position '" + v + "'");
    }
  }
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"lr0", c.lr0},
                     {"plateau_factor", c.plateau_factor},
                     {"plateau_patience", c.plateau_patience},
                     {"plateau_epsilon", c.plateau_epsilon},
                     {"l2_lambda", c.l2_lambda},
                     {"seed", c.seed},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  detail::maybe(j, "batch_size", c.batch_size);
  detail::maybe(j, "epochs", c.epochs);
  detail::maybe(j, "lr0", c.lr0);
  detail::maybe(j, "plateau_factor", c.plateau_factor);
  detail::maybe(j, "plateau_patience", c.plateau_patience);
  detail::maybe(j, "plateau_epsilon", c.plateau_epsilon);
  detail::maybe(j, "l2_lambda", c.l2_lambda);
  detail::maybe(j, "seed", c.seed);
  detail::maybe(j, "adam_beta1", c.adam_beta1);
  detail::maybe(j, "adam_beta2", c.adam_beta2);
  detail::maybe(j, "adam_eps", c.adam_eps);
}

inline void to_json(nlohmann::json& j, const NormStats& s) {
  j = nlohmann::json{{"mean", s.mean}, {"std", s.std_dev}};
}

inline void from_json(const nlohmann::json& j, NormStats& s) {
  j.at("mean").get_to(s.mean);
  j.at("std").get_to(s.std_dev);
}

}  // namespace biresnet
