#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "biresnet/errors.hpp"
#include "biresnet/intralink.hpp"
#include "biresnet/ops.hpp"
#include "biresnet/param.hpp"
#include "biresnet/rng.hpp"
#include "biresnet/tensor.hpp"

namespace biresnet {

// ---------------------------------------------------------------------------
// Parameter registry: definition-order parameter list with deterministic
// initialization. Each parameter draws from its own (seed, "init/<name>")
// stream, so adding a layer never shifts another layer's init.
// ---------------------------------------------------------------------------

template <typename T>
class ParamRegistry {
 public:
  explicit ParamRegistry(std::uint64_t init_seed) : seed_(init_seed) {}

  // Kaiming fan-in scaled normal.
  ParamPtr<T> weight(const std::string& name, std::vector<std::size_t> shape,
                     std::size_t fan_in) {
    Tensor<T> w(shape);
    SeededRng rng(seed_, "init/" + name);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = static_cast<T>(rng.normal() * std_dev);
    }
    return add(name, std::move(w), /*decays=*/true);
  }

  ParamPtr<T> zeros(const std::string& name, std::size_t n) {
    return add(name, Tensor<T>({n}), /*decays=*/false);
  }

  ParamPtr<T> ones(const std::string& name, std::size_t n) {
    return add(name, Tensor<T>({n}, T(1)), /*decays=*/false);
  }

  ParamList<T>& params() { return params_; }
  const ParamList<T>& params() const { return params_; }

 private:
  ParamPtr<T> add(const std::string& name, Tensor<T> value, bool decays) {
    params_.push_back(
        std::make_shared<Parameter<T>>(name, std::move(value), decays));
    return params_.back();
  }

  ParamList<T> params_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Layer wrappers owning their backward caches (one model instance is
// confined to one worker at a time).
// ---------------------------------------------------------------------------

template <typename T>
class Conv1dLayer {
 public:
  Conv1dLayer(ParamRegistry<T>& reg, const std::string& name, std::size_t cin,
              std::size_t cout, std::size_t kernel, bool with_bias)
      : w_(reg.weight(name + ".w", {cout, cin, kernel}, cin * kernel)),
        b_(with_bias ? reg.zeros(name + ".b", cout) : nullptr) {}

  Tensor<T> forward(const Tensor<T>& x) {
    return conv1d_forward(x, w_->value, b_ ? &b_->value : nullptr, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& dy, bool need_dx = true) {
    return conv1d_backward(cache_, w_->value, dy, w_->grad,
                           b_ ? &b_->grad : nullptr, need_dx);
  }

  ParamPtr<T> w() const { return w_; }

 private:
  ParamPtr<T> w_;
  ParamPtr<T> b_;
  Conv1dCache<T> cache_;
};

template <typename T>
class BatchNorm1dLayer {
 public:
  BatchNorm1dLayer(ParamRegistry<T>& reg, const std::string& name,
                   std::size_t channels, double momentum = 0.99,
                   double epsilon = 1e-3)
      : name_(name),
        gamma_(reg.ones(name + ".gamma", channels)),
        beta_(reg.zeros(name + ".beta", channels)),
        momentum_(momentum),
        epsilon_(epsilon) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    return batchnorm_forward(x, gamma_->value, beta_->value, state_, mode,
                             mode == Mode::train ? &cache_ : nullptr,
                             momentum_, epsilon_);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    return batchnorm_backward(cache_, gamma_->value, dy, gamma_->grad,
                              beta_->grad);
  }

  const std::string& name() const { return name_; }
  BatchNormState<T>& state() { return state_; }
  const BatchNormState<T>& state() const { return state_; }

 private:
  std::string name_;
  ParamPtr<T> gamma_;
  ParamPtr<T> beta_;
  BatchNormState<T> state_;
  BatchNormCache<T> cache_;
  double momentum_;
  double epsilon_;
};

template <typename T>
class DenseLayer {
 public:
  DenseLayer(ParamRegistry<T>& reg, const std::string& name, std::size_t in,
             std::size_t out)
      : w_(reg.weight(name + ".w", {in, out}, in)),
        b_(reg.zeros(name + ".b", out)) {}

  Tensor<T> forward(const Tensor<T>& x) {
    return dense_forward(x, w_->value, b_->value, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    return dense_backward(cache_, w_->value, dy, w_->grad, b_->grad);
  }

 private:
  ParamPtr<T> w_;
  ParamPtr<T> b_;
  DenseCache<T> cache_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct STBlockConfig {
  std::array<std::size_t, 4> kernel_sizes{3, 5, 7, 9};
  std::size_t global_kernel = 1;
};

enum class BlockVariant { spatial_temporal, plain_stack };
enum class IntraLinkPosition { post_add, post_global_conv };

struct BiResNetConfig {
  std::size_t input_channels = 8;
  std::vector<std::size_t> stage_filters{32, 64, 128, 256};
  std::size_t blocks_per_stage = 2;
  std::size_t root_kernel = 3;
  int intralink_n = 1;
  std::size_t num_classes = 6;
  STBlockConfig st;
  BlockVariant block_variant = BlockVariant::spatial_temporal;
  IntraLinkPosition intralink_position = IntraLinkPosition::post_add;
  bool use_intralink = true;  // false -> plain-ReLU residual variant
};

// ---------------------------------------------------------------------------
// Embedded spatial-temporal convolution block: four parallel conv branches
// with distinct kernel sizes, each BN + ReLU, concatenated on the channel
// axis and mixed by a global conv + BN. No activation after the global conv;
// the enclosing bi-residual block activates after the shortcut add.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
Tensor<T> concat_channels(const std::array<Tensor<T>, 4>& parts) {
  const std::size_t batch = parts[0].dim(0), t_len = parts[0].dim(2);
  std::size_t total = 0;
  for (const auto& p : parts) total += p.dim(1);
  Tensor<T> out({batch, total, t_len});
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t c0 = 0;
    for (const auto& p : parts) {
      std::copy(&p(b, std::size_t(0), std::size_t(0)),
                &p(b, std::size_t(0), std::size_t(0)) + p.dim(1) * t_len,
                &out(b, c0, std::size_t(0)));
      c0 += p.dim(1);
    }
  }
  return out;
}

template <typename T>
std::array<Tensor<T>, 4> split_channels(const Tensor<T>& x,
                                        std::size_t per_part) {
  const std::size_t batch = x.dim(0), t_len = x.dim(2);
  std::array<Tensor<T>, 4> parts;
  for (std::size_t i = 0; i < 4; ++i) {
    parts[i] = Tensor<T>({batch, per_part, t_len});
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy(&x(b, i * per_part, std::size_t(0)),
                &x(b, i * per_part, std::size_t(0)) + per_part * t_len,
                &parts[i](b, std::size_t(0), std::size_t(0)));
    }
  }
  return parts;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("channel", "residual add of " + a.shape_str() + " and " +
                                    b.shape_str());
  }
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace detail

template <typename T>
class STBlock {
 public:
  STBlock(ParamRegistry<T>& reg, const std::string& name, std::size_t cin,
          std::size_t cout, const STBlockConfig& cfg)
      : branch_channels_(cout / 4) {
    if (cout % 4 != 0) {
      throw UsageError("st block out_channels must be divisible by 4, got " +
                       std::to_string(cout));
    }
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string bname = name + ".branch" + std::to_string(i);
      branch_conv_.emplace_back(reg, bname + ".conv", cin, branch_channels_,
                                cfg.kernel_sizes[i], /*with_bias=*/false);
      branch_bn_.emplace_back(reg, bname + ".bn", branch_channels_);
    }
    global_conv_ = std::make_unique<Conv1dLayer<T>>(
        reg, name + ".global.conv", cout, cout, cfg.global_kernel,
        /*with_bias=*/false);
    global_bn_ =
        std::make_unique<BatchNorm1dLayer<T>>(reg, name + ".global.bn", cout);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    std::array<Tensor<T>, 4> acts;
    for (std::size_t i = 0; i < 4; ++i) {
      Tensor<T> h = branch_conv_[i].forward(x);
      h = branch_bn_[i].forward(h, mode);
      acts[i] = relu(h, &branch_relu_cache_[i]);
    }
    Tensor<T> cat = detail::concat_channels(acts);
    Tensor<T> y = global_conv_->forward(cat);
    return global_bn_->forward(y, mode);
  }

  Tensor<T> backward(const Tensor<T>& dy, bool need_dx = true) {
    Tensor<T> d = global_bn_->backward(dy);
    d = global_conv_->backward(d);
    auto parts = detail::split_channels(d, branch_channels_);
    Tensor<T> dx;
    for (std::size_t i = 0; i < 4; ++i) {
      Tensor<T> db = relu_backward(branch_relu_cache_[i], parts[i]);
      db = branch_bn_[i].backward(db);
      db = branch_conv_[i].backward(db, need_dx);
      if (need_dx) {
        if (i == 0) {
          dx = std::move(db);
        } else {
          for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += db[j];
        }
      }
    }
    return dx;
  }

  std::vector<BatchNorm1dLayer<T>*> batchnorms() {
    std::vector<BatchNorm1dLayer<T>*> bns;
    for (auto& bn : branch_bn_) bns.push_back(&bn);
    bns.push_back(global_bn_.get());
    return bns;
  }

 private:
  std::size_t branch_channels_;
  std::vector<Conv1dLayer<T>> branch_conv_;
  std::vector<BatchNorm1dLayer<T>> branch_bn_;
  std::array<Tensor<T>, 4> branch_relu_cache_;
  std::unique_ptr<Conv1dLayer<T>> global_conv_;
  std::unique_ptr<BatchNorm1dLayer<T>> global_bn_;
};

// Ablation arm: the ST block replaced by four stacked Conv(k=3)+BN+ReLU.
template <typename T>
class PlainStackBlock {
 public:
  PlainStackBlock(ParamRegistry<T>& reg, const std::string& name,
                  std::size_t cin, std::size_t cout) {
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string lname = name + ".stack" + std::to_string(i);
      conv_.emplace_back(reg, lname + ".conv", i == 0 ? cin : cout, cout, 3,
                         /*with_bias=*/false);
      bn_.emplace_back(reg, lname + ".bn", cout);
    }
    relu_cache_.resize(4);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> h = x;
    for (std::size_t i = 0; i < 4; ++i) {
      h = conv_[i].forward(h);
      h = bn_[i].forward(h, mode);
      h = relu(h, &relu_cache_[i]);
    }
    return h;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool need_dx = true) {
    Tensor<T> d = dy;
    for (std::size_t i = 4; i-- > 0;) {
      d = relu_backward(relu_cache_[i], d);
      d = bn_[i].backward(d);
      d = conv_[i].backward(d, need_dx || i > 0);
    }
    return d;
  }

  std::vector<BatchNorm1dLayer<T>*> batchnorms() {
    std::vector<BatchNorm1dLayer<T>*> bns;
    for (auto& bn : bn_) bns.push_back(&bn);
    return bns;
  }

 private:
  std::vector<Conv1dLayer<T>> conv_;
  std::vector<BatchNorm1dLayer<T>> bn_;
  std::vector<Tensor<T>> relu_cache_;
};

// ---------------------------------------------------------------------------
// Bi-residual block: inner (intra-link) plus outer (shortcut) residual paths.
// Default placement applies the intra-link chain to the post-add sum.
// ---------------------------------------------------------------------------

template <typename T>
class BiResidualBlock {
 public:
  BiResidualBlock(ParamRegistry<T>& reg, const std::string& name,
                  std::size_t cin, std::size_t cout,
                  const BiResNetConfig& cfg)
      : cfg_(cfg), link_{cfg.intralink_n} {
    if (cfg.block_variant == BlockVariant::spatial_temporal) {
      st_ = std::make_unique<STBlock<T>>(reg, name + ".st", cin, cout, cfg.st);
    } else {
      plain_ = std::make_unique<PlainStackBlock<T>>(reg, name + ".st", cin,
                                                    cout);
    }
    if (cin != cout) {
      proj_conv_ = std::make_unique<Conv1dLayer<T>>(
          reg, name + ".proj.conv", cin, cout, 1, /*with_bias=*/false);
      proj_bn_ =
          std::make_unique<BatchNorm1dLayer<T>>(reg, name + ".proj.bn", cout);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    Tensor<T> main = st_ ? st_->forward(x, mode) : plain_->forward(x, mode);
    if (cfg_.use_intralink &&
        cfg_.intralink_position == IntraLinkPosition::post_global_conv) {
      main = intralink_forward(main, link_, &link_cache_);
    }
    Tensor<T> shortcut =
        proj_conv_ ? proj_bn_->forward(proj_conv_->forward(x), mode) : x;
    Tensor<T> sum = detail::add(main, shortcut);
    if (cfg_.use_intralink &&
        cfg_.intralink_position == IntraLinkPosition::post_add) {
      return intralink_forward(sum, link_, &link_cache_);
    }
    return relu(sum, &relu_cache_);
  }

  Tensor<T> backward(const Tensor<T>& dy, bool need_dx = true) {
    Tensor<T> dsum;
    if (cfg_.use_intralink &&
        cfg_.intralink_position == IntraLinkPosition::post_add) {
      dsum = intralink_backward(link_cache_, dy);
    } else {
      dsum = relu_backward(relu_cache_, dy);
    }
    Tensor<T> dmain = dsum;
    if (cfg_.use_intralink &&
        cfg_.intralink_position == IntraLinkPosition::post_global_conv) {
      dmain = intralink_backward(link_cache_, dmain);
    }
    Tensor<T> dx = st_ ? st_->backward(dmain, need_dx)
                       : plain_->backward(dmain, need_dx);
    if (proj_conv_) {
      Tensor<T> ds = proj_bn_->backward(dsum);
      ds = proj_conv_->backward(ds, need_dx);
      if (need_dx) {
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += ds[i];
      }
    } else if (need_dx) {
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dsum[i];
    }
    return dx;
  }

  std::vector<BatchNorm1dLayer<T>*> batchnorms() {
    auto bns = st_ ? st_->batchnorms() : plain_->batchnorms();
    if (proj_bn_) bns.push_back(proj_bn_.get());
    return bns;
  }

 private:
  BiResNetConfig cfg_;
  IntraLinkConfig link_;
  std::unique_ptr<STBlock<T>> st_;
  std::unique_ptr<PlainStackBlock<T>> plain_;
  std::unique_ptr<Conv1dLayer<T>> proj_conv_;
  std::unique_ptr<BatchNorm1dLayer<T>> proj_bn_;
  IntraLinkCache<T> link_cache_;
  Tensor<T> relu_cache_;
};

// ---------------------------------------------------------------------------
// Full network: root conv + BN + ReLU, stages of bi-residual blocks, global
// max pool, dense head. Softmax lives in the loss.
// ---------------------------------------------------------------------------

template <typename T>
class BiResNet {
 public:
  explicit BiResNet(const BiResNetConfig& cfg, std::uint64_t init_seed = 0)
      : cfg_(cfg), init_seed_(init_seed), registry_(init_seed) {
    if (cfg.stage_filters.empty()) {
      throw UsageError("BiResNet needs at least one stage");
    }
    root_conv_ = std::make_unique<Conv1dLayer<T>>(
        registry_, "root.conv", cfg.input_channels, cfg.stage_filters[0],
        cfg.root_kernel, /*with_bias=*/false);
    root_bn_ = std::make_unique<BatchNorm1dLayer<T>>(registry_, "root.bn",
                                                     cfg.stage_filters[0]);
    std::size_t cin = cfg.stage_filters[0];
    for (std::size_t s = 0; s < cfg.stage_filters.size(); ++s) {
      const std::size_t cout = cfg.stage_filters[s];
      for (std::size_t b = 0; b < cfg.blocks_per_stage; ++b) {
        const std::string name =
            "stage" + std::to_string(s) + ".block" + std::to_string(b);
        blocks_.push_back(std::make_unique<BiResidualBlock<T>>(
            registry_, name, cin, cout, cfg));
        cin = cout;
      }
    }
    head_ = std::make_unique<DenseLayer<T>>(registry_, "head.fc", cin,
                                            cfg.num_classes);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.rank() != 3 || x.dim(1) != cfg_.input_channels) {
      throw ShapeError("channel",
                       "BiResNet expects [B," +
                           std::to_string(cfg_.input_channels) + ",T], got " +
                           x.shape_str());
    }
    Tensor<T> h = root_conv_->forward(x);
    h = root_bn_->forward(h, mode);
    h = relu(h, &root_relu_cache_);
    for (auto& block : blocks_) h = block->forward(h, mode);
    Tensor<T> pooled = global_max_pool(h, &pool_cache_);
    return head_->forward(pooled);
  }

  void backward(const Tensor<T>& dlogits) {
    Tensor<T> d = head_->backward(dlogits);
    d = global_max_pool_backward(pool_cache_, d);
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      d = blocks_[i]->backward(d, /*need_dx=*/true);
    }
    d = relu_backward(root_relu_cache_, d);
    d = root_bn_->backward(d);
    root_conv_->backward(d, /*need_dx=*/false);
  }

  ParamList<T>& params() { return registry_.params(); }
  const ParamList<T>& params() const { return registry_.params(); }

  std::size_t param_count() const {
    std::size_t total = 0;
    for (const auto& p : registry_.params()) total += p->value.size();
    return total;
  }

  void zero_grads() {
    for (auto& p : registry_.params()) p->zero_grad();
  }

  std::vector<BatchNorm1dLayer<T>*> batchnorms() {
    std::vector<BatchNorm1dLayer<T>*> bns{root_bn_.get()};
    for (auto& block : blocks_) {
      for (auto* bn : block->batchnorms()) bns.push_back(bn);
    }
    return bns;
  }

  const BiResNetConfig& config() const { return cfg_; }
  std::uint64_t init_seed() const { return init_seed_; }

 private:
  BiResNetConfig cfg_;
  std::uint64_t init_seed_;
  ParamRegistry<T> registry_;
  std::unique_ptr<Conv1dLayer<T>> root_conv_;
  std::unique_ptr<BatchNorm1dLayer<T>> root_bn_;
  Tensor<T> root_relu_cache_;
  std::vector<std::unique_ptr<BiResidualBlock<T>>> blocks_;
  GlobalMaxPoolCache pool_cache_;
  std::unique_ptr<DenseLayer<T>> head_;
};

// Analytic parameter count from the architecture description alone; the
// instantiated model's summed sizes are the second route in tests.
std::size_t param_count(const BiResNetConfig& cfg);

}  // namespace biresnet
