#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <type_traits>
#include <vector>

#include "biresnet/blas.hpp"
#include "biresnet/errors.hpp"
#include "biresnet/tensor.hpp"

namespace biresnet {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// conv1d: stride 1, zero "same" padding, K odd, output length == input length.
// Backed by im2col + GEMM; the naive quintuple loop lives in the test oracle.
// ---------------------------------------------------------------------------

template <typename T>
struct Conv1dCache {
  Tensor<T> x;
  bool valid = false;
};

namespace detail {

// cols is [Cin*K][T]; cols[(c*K + k)][t] = x[b][c][t + k - pad], zero padded.
template <typename T>
void im2col(const Tensor<T>& x, std::size_t b, std::size_t kernel,
            std::vector<T>& cols) {
  const std::size_t cin = x.dim(1);
  const std::size_t t_len = x.dim(2);
  const std::size_t pad = (kernel - 1) / 2;
  cols.assign(cin * kernel * t_len, T(0));
  for (std::size_t c = 0; c < cin; ++c) {
    const T* src = &x(b, c, 0);
    for (std::size_t k = 0; k < kernel; ++k) {
      T* dst = cols.data() + (c * kernel + k) * t_len;
      // valid t range: 0 <= t + k - pad < t_len
      const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) -
                                 static_cast<std::ptrdiff_t>(pad);
      const std::size_t lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
      const std::size_t hi =
          off > 0 ? t_len - static_cast<std::size_t>(off) : t_len;
      for (std::size_t t = lo; t < hi; ++t) {
        dst[t] = src[static_cast<std::size_t>(
            static_cast<std::ptrdiff_t>(t) + off)];
      }
    }
  }
}

template <typename T>
void col2im_add(const std::vector<T>& cols, std::size_t cin,
                std::size_t kernel, Tensor<T>& dx, std::size_t b) {
  const std::size_t t_len = dx.dim(2);
  const std::size_t pad = (kernel - 1) / 2;
  for (std::size_t c = 0; c < cin; ++c) {
    T* dst = &dx(b, c, 0);
    for (std::size_t k = 0; k < kernel; ++k) {
      const T* src = cols.data() + (c * kernel + k) * t_len;
      const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) -
                                 static_cast<std::ptrdiff_t>(pad);
      const std::size_t lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
      const std::size_t hi =
          off > 0 ? t_len - static_cast<std::size_t>(off) : t_len;
      for (std::size_t t = lo; t < hi; ++t) {
        dst[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(t) + off)] +=
            src[t];
      }
    }
  }
}

}  // namespace detail

// x: [B,Cin,T], w: [Cout,Cin,K], bias: optional [Cout]. Returns [B,Cout,T].
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& w,
                         const std::type_identity_t<Tensor<T>>* bias,
                         std::type_identity_t<Conv1dCache<T>>* cache) {
  if (x.rank() != 3) {
    throw ShapeError("batch", "conv1d expects rank-3 input, got " +
                                  x.shape_str());
  }
  if (w.rank() != 3) {
    throw ShapeError("kernel", "conv1d weight must be rank 3, got " +
                                   w.shape_str());
  }
  const std::size_t batch = x.dim(0), cin = x.dim(1), t_len = x.dim(2);
  const std::size_t cout = w.dim(0), kernel = w.dim(2);
  if (w.dim(1) != cin) {
    throw ShapeError("channel", "input has " + std::to_string(cin) +
                                    " channels but weight expects " +
                                    std::to_string(w.dim(1)));
  }
  if (kernel % 2 == 0) {
    throw ShapeError("kernel", "kernel size must be odd, got " +
                                   std::to_string(kernel));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != cout)) {
    throw ShapeError("bias", "bias must be [Cout]=" + std::to_string(cout));
  }

  Tensor<T> y({batch, cout, t_len});
  std::vector<T> cols;
  for (std::size_t b = 0; b < batch; ++b) {
    detail::im2col(x, b, kernel, cols);
    gemm(false, false, cout, t_len, cin * kernel, T(1), w.data(), cin * kernel,
         cols.data(), t_len, T(0), &y(b, std::size_t(0), std::size_t(0)),
         t_len);
  }
  if (bias) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < cout; ++o) {
        T* row = &y(b, o, 0);
        const T bv = (*bias)[o];
        for (std::size_t t = 0; t < t_len; ++t) row[t] += bv;
      }
    }
  }
  if (cache) {
    cache->x = x;
    cache->valid = true;
  }
  return y;
}

// Accumulates into dw (and dbias if given); returns dx when need_dx.
template <typename T>
Tensor<T> conv1d_backward(const Conv1dCache<T>& cache, const Tensor<T>& w,
                          const Tensor<T>& dy, Tensor<T>& dw, Tensor<T>* dbias,
                          bool need_dx = true) {
  if (!cache.valid) {
    throw UsageError("conv1d_backward called before forward");
  }
  const Tensor<T>& x = cache.x;
  const std::size_t batch = x.dim(0), cin = x.dim(1), t_len = x.dim(2);
  const std::size_t cout = w.dim(0), kernel = w.dim(2);
  if (dy.shape() != std::vector<std::size_t>{batch, cout, t_len}) {
    throw ShapeError("channel", "conv1d_backward dy " + dy.shape_str() +
                                    " does not match forward output");
  }
  Tensor<T> dx;
  if (need_dx) dx = Tensor<T>({batch, cin, t_len});
  std::vector<T> cols;
  std::vector<T> dcols(cin * kernel * t_len);
  for (std::size_t b = 0; b < batch; ++b) {
    detail::im2col(x, b, kernel, cols);
    // dw[Cout][Cin*K] += dy_b[Cout][T] * cols^T[T][Cin*K]
    gemm(false, true, cout, cin * kernel, t_len, T(1),
         &dy(b, std::size_t(0), std::size_t(0)), t_len, cols.data(), t_len,
         T(1), dw.data(), cin * kernel);
    if (need_dx) {
      // dcols[Cin*K][T] = w^T[Cin*K][Cout] * dy_b[Cout][T]
      gemm(true, false, cin * kernel, t_len, cout, T(1), w.data(), cin * kernel,
           &dy(b, std::size_t(0), std::size_t(0)), t_len, T(0), dcols.data(),
           t_len);
      detail::col2im_add(dcols, cin, kernel, dx, b);
    }
  }
  if (dbias) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < cout; ++o) {
        const T* row = &dy(b, o, 0);
        T s = T(0);
        for (std::size_t t = 0; t < t_len; ++t) s += row[t];
        (*dbias)[o] += s;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Batch normalization over (batch, time) per channel.
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  bool initialized = false;
};

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<double> invstd;
  bool valid = false;
};

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                            const Tensor<T>& beta, BatchNormState<T>& state,
                            Mode mode, std::type_identity_t<BatchNormCache<T>>* cache,
                            double momentum = 0.99, double epsilon = 1e-3) {
  if (x.rank() != 3) {
    throw ShapeError("batch", "batchnorm expects rank-3 input");
  }
  const std::size_t batch = x.dim(0), ch = x.dim(1), t_len = x.dim(2);
  if (gamma.dim(0) != ch || beta.dim(0) != ch) {
    throw ShapeError("channel", "gamma/beta must have " + std::to_string(ch) +
                                    " channels");
  }
  if (state.running_mean.size() != ch) {
    state.running_mean = Tensor<T>({ch});
    state.running_var = Tensor<T>({ch}, T(1));
  }
  const std::size_t n = batch * t_len;
  if (mode == Mode::train && n < 2) {
    throw DataError("batchnorm train mode needs batch*time >= 2");
  }
  if (mode == Mode::eval && !state.initialized) {
    throw DataError(
        "batchnorm eval mode before any train-mode statistics update");
  }

  Tensor<T> y(x.shape());
  if (cache) {
    cache->xhat = Tensor<T>(x.shape());
    cache->invstd.assign(ch, 0.0);
    cache->valid = true;
  }
  for (std::size_t c = 0; c < ch; ++c) {
    double mean, var;
    if (mode == Mode::train) {
      double sum = 0.0, sumsq = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* row = &x(b, c, 0);
        for (std::size_t t = 0; t < t_len; ++t) {
          const double v = static_cast<double>(row[t]);
          sum += v;
          sumsq += v * v;
        }
      }
      mean = sum / static_cast<double>(n);
      var = sumsq / static_cast<double>(n) - mean * mean;
      var = std::max(var, 0.0);
      state.running_mean[c] = static_cast<T>(
          momentum * static_cast<double>(state.running_mean[c]) +
          (1.0 - momentum) * mean);
      state.running_var[c] = static_cast<T>(
          momentum * static_cast<double>(state.running_var[c]) +
          (1.0 - momentum) * var);
    } else {
      mean = static_cast<double>(state.running_mean[c]);
      var = static_cast<double>(state.running_var[c]);
    }
    const double invstd = 1.0 / std::sqrt(var + epsilon);
    if (cache) cache->invstd[c] = invstd;
    const T g = gamma[c], be = beta[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const T* row = &x(b, c, 0);
      T* out = &y(b, c, 0);
      T* xh = cache ? &cache->xhat(b, c, 0) : nullptr;
      for (std::size_t t = 0; t < t_len; ++t) {
        const T h = static_cast<T>((static_cast<double>(row[t]) - mean) *
                                   invstd);
        if (xh) xh[t] = h;
        out[t] = g * h + be;
      }
    }
  }
  if (mode == Mode::train) state.initialized = true;
  return y;
}

template <typename T>
Tensor<T> batchnorm_backward(const BatchNormCache<T>& cache,
                             const Tensor<T>& gamma, const Tensor<T>& dy,
                             Tensor<T>& dgamma, Tensor<T>& dbeta) {
  if (!cache.valid) {
    throw UsageError("batchnorm_backward called before forward");
  }
  const Tensor<T>& xhat = cache.xhat;
  const std::size_t batch = xhat.dim(0), ch = xhat.dim(1), t_len = xhat.dim(2);
  const double n = static_cast<double>(batch * t_len);
  Tensor<T> dx(xhat.shape());
  for (std::size_t c = 0; c < ch; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const T* dyr = &dy(b, c, 0);
      const T* xhr = &xhat(b, c, 0);
      for (std::size_t t = 0; t < t_len; ++t) {
        sum_dy += static_cast<double>(dyr[t]);
        sum_dy_xhat += static_cast<double>(dyr[t]) *
                       static_cast<double>(xhr[t]);
      }
    }
    dgamma[c] += static_cast<T>(sum_dy_xhat);
    dbeta[c] += static_cast<T>(sum_dy);
    const double g = static_cast<double>(gamma[c]);
    const double invstd = cache.invstd[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const T* dyr = &dy(b, c, 0);
      const T* xhr = &xhat(b, c, 0);
      T* dxr = &dx(b, c, 0);
      for (std::size_t t = 0; t < t_len; ++t) {
        const double term = n * static_cast<double>(dyr[t]) - sum_dy -
                            static_cast<double>(xhr[t]) * sum_dy_xhat;
        dxr[t] = static_cast<T>(g * invstd * term / n);
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// ReLU; subgradient at 0 is 0.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x, Tensor<T>* cache = nullptr) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(x[i], T(0));
  if (cache) *cache = x;
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x_cache, const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) {
    dx[i] = x_cache[i] > T(0) ? dy[i] : T(0);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Global max pool over time; ties break to the first occurrence.
// ---------------------------------------------------------------------------

struct GlobalMaxPoolCache {
  std::vector<std::size_t> argmax;  // [B*C]
  std::size_t batch = 0, ch = 0, t_len = 0;
  bool valid = false;
};

template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x, GlobalMaxPoolCache* cache) {
  const std::size_t batch = x.dim(0), ch = x.dim(1), t_len = x.dim(2);
  if (t_len == 0) throw DataError("global_max_pool on empty time axis");
  Tensor<T> y({batch, ch});
  if (cache) {
    cache->argmax.assign(batch * ch, 0);
    cache->batch = batch;
    cache->ch = ch;
    cache->t_len = t_len;
    cache->valid = true;
  }
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T* row = &x(b, c, 0);
      std::size_t best = 0;
      for (std::size_t t = 1; t < t_len; ++t) {
        if (row[t] > row[best]) best = t;
      }
      y(b, c) = row[best];
      if (cache) cache->argmax[b * ch + c] = best;
    }
  }
  return y;
}

template <typename T>
Tensor<T> global_max_pool_backward(const GlobalMaxPoolCache& cache,
                                   const Tensor<T>& dy) {
  if (!cache.valid) {
    throw UsageError("global_max_pool_backward called before forward");
  }
  Tensor<T> dx({cache.batch, cache.ch, cache.t_len});
  for (std::size_t b = 0; b < cache.batch; ++b) {
    for (std::size_t c = 0; c < cache.ch; ++c) {
      dx(b, c, cache.argmax[b * cache.ch + c]) += dy(b, c);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dense affine layer: y[B,O] = x[B,F] * w[F,O] + b[O].
// ---------------------------------------------------------------------------

template <typename T>
struct DenseCache {
  Tensor<T> x;
  bool valid = false;
};

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w,
                        const Tensor<T>& b,
                        std::type_identity_t<DenseCache<T>>* cache) {
  const std::size_t batch = x.dim(0), feat = x.dim(1);
  if (w.dim(0) != feat) {
    throw ShapeError("feature", "dense input has " + std::to_string(feat) +
                                    " features but weight expects " +
                                    std::to_string(w.dim(0)));
  }
  const std::size_t out = w.dim(1);
  if (b.dim(0) != out) {
    throw ShapeError("output", "dense bias must be [O]=" + std::to_string(out));
  }
  Tensor<T> y({batch, out});
  gemm(false, false, batch, out, feat, T(1), x.data(), feat, w.data(), out,
       T(0), y.data(), out);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t o = 0; o < out; ++o) y(r, o) += b[o];
  }
  if (cache) {
    cache->x = x;
    cache->valid = true;
  }
  return y;
}

template <typename T>
Tensor<T> dense_backward(const DenseCache<T>& cache, const Tensor<T>& w,
                         const Tensor<T>& dy, Tensor<T>& dw, Tensor<T>& db) {
  if (!cache.valid) throw UsageError("dense_backward called before forward");
  const Tensor<T>& x = cache.x;
  const std::size_t batch = x.dim(0), feat = x.dim(1), out = w.dim(1);
  // dw[F,O] += x^T[F,B] * dy[B,O]
  gemm(true, false, feat, out, batch, T(1), x.data(), feat, dy.data(), out,
       T(1), dw.data(), out);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t o = 0; o < out; ++o) db[o] += dy(r, o);
  }
  Tensor<T> dx({batch, feat});
  // dx[B,F] = dy[B,O] * w^T[O,F]
  gemm(false, true, batch, feat, out, T(1), dy.data(), out, w.data(), out,
       T(0), dx.data(), feat);
  return dx;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy (mean over batch), max-subtraction stabilized.
// ---------------------------------------------------------------------------

template <typename T>
struct SoftmaxCrossEntropyResult {
  double loss = 0.0;
  Tensor<T> dlogits;
  Tensor<T> probs;
};

template <typename T>
SoftmaxCrossEntropyResult<T> softmax_cross_entropy(
    const Tensor<T>& logits, const std::vector<int>& labels) {
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("batch", "labels count " + std::to_string(labels.size()) +
                                  " != batch " + std::to_string(batch));
  }
  SoftmaxCrossEntropyResult<T> res;
  res.dlogits = Tensor<T>({batch, k});
  res.probs = Tensor<T>({batch, k});
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw DataError("label " + std::to_string(label) + " out of range [0," +
                      std::to_string(k) + ")");
    }
    double maxv = static_cast<double>(logits(b, std::size_t(0)));
    for (std::size_t j = 1; j < k; ++j) {
      maxv = std::max(maxv, static_cast<double>(logits(b, j)));
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      denom += std::exp(static_cast<double>(logits(b, j)) - maxv);
    }
    const double log_denom = std::log(denom);
    total -= static_cast<double>(logits(b, static_cast<std::size_t>(label))) -
             maxv - log_denom;
    for (std::size_t j = 0; j < k; ++j) {
      const double p =
          std::exp(static_cast<double>(logits(b, j)) - maxv - log_denom);
      res.probs(b, j) = static_cast<T>(p);
      const double onehot = (static_cast<std::size_t>(label) == j) ? 1.0 : 0.0;
      res.dlogits(b, j) =
          static_cast<T>((p - onehot) / static_cast<double>(batch));
    }
  }
  res.loss = total / static_cast<double>(batch);
  return res;
}

}  // namespace biresnet
