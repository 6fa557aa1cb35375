#include "biresnet/model.hpp"

namespace biresnet {

std::size_t param_count(const BiResNetConfig& cfg) {
  std::size_t total = 0;
  const std::size_t f0 = cfg.stage_filters.at(0);
  total += cfg.input_channels * f0 * cfg.root_kernel;  // root conv (no bias)
  total += 2 * f0;                                     // root BN

  std::size_t cin = f0;
  for (std::size_t cout : cfg.stage_filters) {
    for (std::size_t b = 0; b < cfg.blocks_per_stage; ++b) {
      if (cfg.block_variant == BlockVariant::spatial_temporal) {
        const std::size_t bc = cout / 4;
        for (std::size_t k : cfg.st.kernel_sizes) total += cin * bc * k;
        total += 4 * 2 * bc;                           // branch BNs
        total += cout * cout * cfg.st.global_kernel;   // global conv
        total += 2 * cout;                             // global BN
      } else {
        total += cin * cout * 3 + 3 * cout * cout * 3;  // four stacked convs
        total += 4 * 2 * cout;                          // their BNs
      }
      if (cin != cout) {
        total += cin * cout + 2 * cout;  // projection conv + BN
      }
      cin = cout;
    }
  }
  total += cin * cfg.num_classes + cfg.num_classes;  // dense head
  return total;
}

}  // namespace biresnet
