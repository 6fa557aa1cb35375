#pragma once

#include <cstddef>
#include <type_traits>

#include "biresnet/errors.hpp"
#include "biresnet/tensor.hpp"

namespace biresnet {

// Parameter-free chain between units of the same layer. Units along the
// neuron axis (channel axis for conv tensors, feature axis for dense) are
// partitioned into consecutive groups of n+1; inside a group, computed from
// the highest local index down:
//   g'[n] = g[n];  g'[j] = g[j] + relu(g'[j+1])
//   x[j]  = relu(g'[j])
// A trailing remainder group smaller than n+1 uses plain ReLU, as does
// everything when n == 0.
struct IntraLinkConfig {
  int n = 1;
};

// Always zero; the whole point of the construct. Kept as an executable
// assertion target.
inline int param_count_delta(const IntraLinkConfig&) { return 0; }

template <typename T>
struct IntraLinkCache {
  Tensor<T> g_chain;  // g' values, same shape as input
  int n = 0;
  bool valid = false;
};

namespace detail {

// Chain applied elementwise over `inner` trailing positions per unit.
// units axis has stride `inner` within one outer slice of extent
// units*inner.
template <typename T>
void intralink_slice_forward(const T* g, T* gp, T* x, std::size_t units,
                             std::size_t inner, std::size_t n) {
  std::size_t u = 0;
  for (; u + n < units; u += n + 1) {
    // top unit of the group is plain
    const T* gtop = g + (u + n) * inner;
    T* gptop = gp + (u + n) * inner;
    for (std::size_t i = 0; i < inner; ++i) gptop[i] = gtop[i];
    for (std::size_t j = n; j-- > 0;) {
      const T* gj = g + (u + j) * inner;
      const T* gnext = gp + (u + j + 1) * inner;
      T* gpj = gp + (u + j) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        gpj[i] = gj[i] + (gnext[i] > T(0) ? gnext[i] : T(0));
      }
    }
    for (std::size_t j = 0; j <= n; ++j) {
      const T* gpj = gp + (u + j) * inner;
      T* xj = x + (u + j) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        xj[i] = gpj[i] > T(0) ? gpj[i] : T(0);
      }
    }
  }
  // remainder units: plain activation
  for (; u < units; ++u) {
    const T* gu = g + u * inner;
    T* gpu = gp + u * inner;
    T* xu = x + u * inner;
    for (std::size_t i = 0; i < inner; ++i) {
      gpu[i] = gu[i];
      xu[i] = gu[i] > T(0) ? gu[i] : T(0);
    }
  }
}

template <typename T>
void intralink_slice_backward(const T* gp, const T* dx, T* dg,
                              std::size_t units, std::size_t inner,
                              std::size_t n) {
  std::size_t u = 0;
  for (; u + n < units; u += n + 1) {
    // dg'[0] has only the dx path; each following unit also receives the
    // chain contribution from the unit below it.
    for (std::size_t j = 0; j <= n; ++j) {
      const T* gpj = gp + (u + j) * inner;
      const T* dxj = dx + (u + j) * inner;
      T* dgj = dg + (u + j) * inner;
      if (j == 0) {
        for (std::size_t i = 0; i < inner; ++i) {
          dgj[i] = gpj[i] > T(0) ? dxj[i] : T(0);
        }
      } else {
        const T* dgprev = dg + (u + j - 1) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          dgj[i] = gpj[i] > T(0) ? (dxj[i] + dgprev[i]) : T(0);
        }
      }
    }
  }
  for (; u < units; ++u) {
    const T* gpu = gp + u * inner;
    const T* dxu = dx + u * inner;
    T* dgu = dg + u * inner;
    for (std::size_t i = 0; i < inner; ++i) {
      dgu[i] = gpu[i] > T(0) ? dxu[i] : T(0);
    }
  }
}

}  // namespace detail

// g: rank-3 [B,C,T] (chain along channels, elementwise per time position)
// or rank-2 [B,F] (chain along features) or rank-1 [F].
template <typename T>
Tensor<T> intralink_forward(const Tensor<T>& g, const IntraLinkConfig& cfg,
                            std::type_identity_t<IntraLinkCache<T>>* cache) {
  if (cfg.n < 0) throw UsageError("intralink n must be >= 0");
  const std::size_t axis = g.rank() >= 2 ? 1 : 0;
  const std::size_t units = g.dim(axis);
  if (static_cast<std::size_t>(cfg.n) + 1 > units) {
    throw DataError("intralink group size " + std::to_string(cfg.n + 1) +
                    " exceeds axis length " + std::to_string(units));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= g.dim(i);
  for (std::size_t i = axis + 1; i < g.rank(); ++i) inner *= g.dim(i);

  Tensor<T> x(g.shape());
  Tensor<T> gp(g.shape());
  const std::size_t n = static_cast<std::size_t>(cfg.n);
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t off = o * units * inner;
    detail::intralink_slice_forward(g.data() + off, gp.data() + off,
                                    x.data() + off, units, inner, n);
  }
  if (cache) {
    cache->g_chain = std::move(gp);
    cache->n = cfg.n;
    cache->valid = true;
  }
  return x;
}

template <typename T>
Tensor<T> intralink_backward(const IntraLinkCache<T>& cache,
                             const Tensor<T>& dx) {
  if (!cache.valid) {
    throw UsageError("intralink_backward called before forward");
  }
  const Tensor<T>& gp = cache.g_chain;
  if (!gp.same_shape(dx)) {
    throw ShapeError("channel", "intralink dx " + dx.shape_str() +
                                    " does not match cached " +
                                    gp.shape_str());
  }
  const std::size_t axis = gp.rank() >= 2 ? 1 : 0;
  const std::size_t units = gp.dim(axis);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= gp.dim(i);
  for (std::size_t i = axis + 1; i < gp.rank(); ++i) inner *= gp.dim(i);

  Tensor<T> dg(gp.shape());
  const std::size_t n = static_cast<std::size_t>(cache.n);
  for (std::size_t o = 0; o < outer; ++o) {
    const std::size_t off = o * units * inner;
    detail::intralink_slice_backward(gp.data() + off, dx.data() + off,
                                     dg.data() + off, units, inner, n);
  }
  return dg;
}

}  // namespace biresnet
