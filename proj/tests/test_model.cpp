#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "biresnet/checkpoint.hpp"
#include "biresnet/gradcheck.hpp"
#include "biresnet/model.hpp"
#include "biresnet/rng.hpp"

using namespace biresnet;

namespace {

Tensor<double> random_input(std::vector<std::size_t> shape, std::uint64_t seed,
                            const char* tag = "model/input") {
  SeededRng rng(seed, tag);
  Tensor<double> x(std::move(shape));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  return x;
}

template <typename T>
const Tensor<T>& param_by_name(const ParamList<T>& params,
                               const std::string& name) {
  for (const auto& p : params) {
    if (p->name == name) return p->value;
  }
  throw std::runtime_error("no parameter " + name);
}

// Straight-line reimplementation of the ST block for the oracle comparison:
// per-branch conv (naive loops) + train-mode BN + ReLU, concat, global conv,
// BN. Written independently of the library code paths.
Tensor<double> st_block_oracle(const Tensor<double>& x,
                               const ParamList<double>& params,
                               const std::string& name, std::size_t cout) {
  const std::size_t batch = x.dim(0), t_len = x.dim(2);
  const std::size_t bc = cout / 4;
  const double eps = 1e-3;

  auto conv = [&](const Tensor<double>& in, const Tensor<double>& w) {
    const std::size_t co = w.dim(0), ci = w.dim(1), k = w.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
    Tensor<double> y({batch, co, t_len});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < co; ++o)
        for (std::size_t t = 0; t < t_len; ++t) {
          double acc = 0;
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t kk = 0; kk < k; ++kk) {
              const std::ptrdiff_t s =
                  static_cast<std::ptrdiff_t>(t + kk) - pad;
              if (s >= 0 && s < static_cast<std::ptrdiff_t>(t_len))
                acc += in(b, c, static_cast<std::size_t>(s)) * w(o, c, kk);
            }
          y(b, o, t) = acc;
        }
    return y;
  };
  auto bn = [&](const Tensor<double>& in, const Tensor<double>& gamma,
                const Tensor<double>& beta) {
    const std::size_t ch = in.dim(1);
    Tensor<double> y(in.shape());
    const double n = static_cast<double>(batch * t_len);
    for (std::size_t c = 0; c < ch; ++c) {
      double sum = 0, sumsq = 0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < t_len; ++t) {
          sum += in(b, c, t);
          sumsq += in(b, c, t) * in(b, c, t);
        }
      const double mean = sum / n;
      const double var = std::max(sumsq / n - mean * mean, 0.0);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t t = 0; t < t_len; ++t)
          y(b, c, t) = gamma[c] * (in(b, c, t) - mean) / std::sqrt(var + eps) +
                       beta[c];
    }
    return y;
  };

  Tensor<double> cat({batch, cout, t_len});
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string bn_name = name + ".branch" + std::to_string(i);
    Tensor<double> h =
        conv(x, param_by_name(params, bn_name + ".conv.w"));
    h = bn(h, param_by_name(params, bn_name + ".bn.gamma"),
           param_by_name(params, bn_name + ".bn.beta"));
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < bc; ++c)
        for (std::size_t t = 0; t < t_len; ++t)
          cat(b, i * bc + c, t) = std::max(h(b, c, t), 0.0);
  }
  Tensor<double> y = conv(cat, param_by_name(params, name + ".global.conv.w"));
  return bn(y, param_by_name(params, name + ".global.bn.gamma"),
            param_by_name(params, name + ".global.bn.beta"));
}

}  // namespace

// ---------------------------------------------------------------------------
// ST block
// ---------------------------------------------------------------------------

TEST_CASE("st block: all-zero weights give zero output") {
  ParamRegistry<double> reg(1);
  STBlock<double> block(reg, "st", 3, 8, {});
  for (auto& p : reg.params()) p->value.fill(0.0);
  Tensor<double> x = random_input({2, 3, 10}, 5);
  Tensor<double> y = block.forward(x, Mode::train);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("st block: preserves the time length") {
  ParamRegistry<double> reg(2);
  STBlock<double> block(reg, "st", 4, 8, {});
  for (std::size_t t_len : {9, 17, 33}) {
    Tensor<double> x = random_input({1, 4, t_len}, t_len);
    Tensor<double> y = block.forward(x, Mode::train);
    CHECK(y.dim(0) == 1);
    CHECK(y.dim(1) == 8);
    CHECK(y.dim(2) == t_len);
  }
}

TEST_CASE("st block: matches the straight-line oracle") {
  ParamRegistry<double> reg(7);
  STBlock<double> block(reg, "st", 3, 8, {});
  Tensor<double> x = random_input({2, 3, 13}, 9);
  Tensor<double> fast = block.forward(x, Mode::train);
  Tensor<double> slow = st_block_oracle(x, reg.params(), "st", 8);
  REQUIRE(fast.size() == slow.size());
  for (std::size_t i = 0; i < fast.size(); ++i) {
    CHECK(std::fabs(fast[i] - slow[i]) < 1e-12);
  }
}

TEST_CASE("st block: out channels must divide by 4") {
  ParamRegistry<double> reg(1);
  CHECK_THROWS_AS(STBlock<double>(reg, "st", 3, 10, {}), UsageError);
}

// ---------------------------------------------------------------------------
// bi-residual block
// ---------------------------------------------------------------------------

TEST_CASE("bi-residual block: zero main path + identity shortcut = ReLU(x)") {
  BiResNetConfig cfg;
  cfg.use_intralink = false;
  ParamRegistry<double> reg(3);
  BiResidualBlock<double> block(reg, "blk", 8, 8, cfg);
  for (auto& p : reg.params()) {
    if (p->name.find(".st.") != std::string::npos) p->value.fill(0.0);
  }
  Tensor<double> x = random_input({2, 8, 11}, 4);
  Tensor<double> y = block.forward(x, Mode::train);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(y[i] == std::max(x[i], 0.0));
  }
}

TEST_CASE("bi-residual block: n=0 equals the plain-ReLU variant bit-exactly") {
  BiResNetConfig linked;
  linked.use_intralink = true;
  linked.intralink_n = 0;
  BiResNetConfig plain;
  plain.use_intralink = false;

  ParamRegistry<double> reg_a(11), reg_b(11);
  BiResidualBlock<double> block_a(reg_a, "blk", 4, 8, linked);
  BiResidualBlock<double> block_b(reg_b, "blk", 4, 8, plain);
  Tensor<double> x = random_input({2, 4, 9}, 8);
  Tensor<double> ya = block_a.forward(x, Mode::train);
  Tensor<double> yb = block_b.forward(x, Mode::train);
  for (std::size_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == yb[i]);
}

TEST_CASE("bi-residual block: gradient check") {
  BiResNetConfig cfg;
  ParamRegistry<double> reg(13);
  BiResidualBlock<double> block(reg, "blk", 8, 8, cfg);
  Tensor<double> x = random_input({2, 8, 16}, 21);
  SeededRng prng(22, "blk/proj");
  Tensor<double> proj({2, 8, 16});
  for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = prng.normal();

  auto loss = [&]() {
    Tensor<double> y = block.forward(x, Mode::train);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * proj[i];
    return s;
  };
  for (auto& p : reg.params()) p->zero_grad();
  block.forward(x, Mode::train);
  block.backward(proj, /*need_dx=*/false);

  std::vector<std::vector<double>> grads;
  std::vector<GradCheckTerm> terms;
  for (auto& p : reg.params()) {
    std::vector<double> g(p->grad.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = p->grad[i];
    grads.push_back(std::move(g));
  }
  std::size_t pi = 0;
  for (auto& p : reg.params()) {
    terms.push_back({p->name, p->value.data(), grads[pi++].data(),
                     p->value.size()});
  }
  const auto rep = finite_diff_check(loss, terms);
  CHECK(rep.max_rel_err < 1e-5);
}

// ---------------------------------------------------------------------------
// full network
// ---------------------------------------------------------------------------

TEST_CASE("biresnet: logits shaped [B,6] across the resolution ladder") {
  BiResNetConfig cfg;  // full default width
  BiResNet<double> model(cfg, 1);
  for (std::size_t t_len : {50, 100, 200, 500, 1000}) {
    Tensor<double> x = random_input({1, 8, t_len}, t_len, "net/ladder");
    Tensor<double> y = model.forward(x, Mode::train);
    CHECK(y.dim(0) == 1);
    CHECK(y.dim(1) == 6);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::isfinite(y[i]));
  }
}

TEST_CASE("biresnet: uniform logits give exactly ln 6 loss") {
  BiResNetConfig cfg;
  cfg.stage_filters = {16, 32};  // slim but realistic
  BiResNet<double> model(cfg, 2);
  for (auto& p : model.params()) {
    if (p->name == "head.fc.w" || p->name == "head.fc.b") p->value.fill(0.0);
  }
  Tensor<double> x = random_input({4, 8, 64}, 3);
  Tensor<double> logits = model.forward(x, Mode::train);
  auto ce = softmax_cross_entropy<double>(logits, {0, 1, 2, 3});
  CHECK(ce.loss == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("biresnet: wrong channel count is a shape error") {
  BiResNet<double> model(BiResNetConfig{}, 1);
  Tensor<double> x({1, 7, 32});
  CHECK_THROWS_AS(model.forward(x, Mode::train), ShapeError);
}

// ---------------------------------------------------------------------------
// parameter counting
// ---------------------------------------------------------------------------

TEST_CASE("param count: default configuration is in the budget") {
  const BiResNetConfig cfg;
  const std::size_t analytic = param_count(cfg);
  CHECK(analytic >= 950'000);
  CHECK(analytic <= 1'150'000);

  BiResNet<float> model(cfg, 1);
  CHECK(model.param_count() == analytic);
}

TEST_CASE("param count: dense 256->6 head is 1542 parameters") {
  ParamRegistry<double> reg(1);
  DenseLayer<double> head(reg, "fc", 256, 6);
  std::size_t total = 0;
  for (const auto& p : reg.params()) total += p->value.size();
  CHECK(total == 1542);
}

TEST_CASE("param count: invariant under intralink n in {0..4}") {
  BiResNetConfig base;
  const std::size_t reference = param_count(base);
  for (int n = 0; n <= 4; ++n) {
    BiResNetConfig cfg;
    cfg.intralink_n = n;
    cfg.use_intralink = n > 0;
    CHECK(param_count(cfg) == reference);
    BiResNet<float> model(cfg, 1);
    CHECK(model.param_count() == reference);
  }
}

TEST_CASE("param count: analytic formula matches instantiation on variants") {
  BiResNetConfig plain;
  plain.block_variant = BlockVariant::plain_stack;
  CHECK(BiResNet<float>(plain, 1).param_count() == param_count(plain));

  BiResNetConfig narrow;
  narrow.stage_filters = {16, 32, 64, 128};
  CHECK(BiResNet<float>(narrow, 1).param_count() == param_count(narrow));

  BiResNetConfig few_ch;
  few_ch.input_channels = 3;
  CHECK(BiResNet<float>(few_ch, 1).param_count() == param_count(few_ch));
}

TEST_CASE("plain-stack ablation variant: builds and passes shape checks") {
  BiResNetConfig cfg;
  cfg.stage_filters = {8, 16};
  cfg.block_variant = BlockVariant::plain_stack;
  BiResNet<double> model(cfg, 1);
  Tensor<double> x = random_input({2, 8, 20}, 6);
  Tensor<double> y = model.forward(x, Mode::train);
  CHECK(y.dim(0) == 2);
  CHECK(y.dim(1) == 6);
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint: save -> load -> forward is bit-exact at 32-bit") {
  BiResNetConfig cfg;
  cfg.stage_filters = {8, 8};
  cfg.blocks_per_stage = 1;
  BiResNet<float> model(cfg, 5);

  SeededRng rng(6, "ckpt/x");
  Tensor<float> x({2, 8, 20});
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = static_cast<float>(rng.normal());
  model.forward(x, Mode::train);  // populate BN running stats
  Tensor<float> before = model.forward(x, Mode::eval);

  const auto path = std::filesystem::temp_directory_path() / "brt_test.ckpt";
  save_model(model, path, /*include_adam=*/true);

  BiResNet<float> loaded(cfg, 99);  // different init seed on purpose
  load_model(loaded, path);
  Tensor<float> after = loaded.forward(x, Mode::eval);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: corrupted magic is rejected") {
  const auto path = std::filesystem::temp_directory_path() / "brt_bad.ckpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPEgarbagegarbagegarbage";
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: truncated file is rejected") {
  BiResNetConfig cfg;
  cfg.stage_filters = {8};
  cfg.blocks_per_stage = 1;
  BiResNet<float> model(cfg, 5);
  const auto path = std::filesystem::temp_directory_path() / "brt_trunc.ckpt";
  save_model(model, path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: missing parameter is rejected on restore") {
  BiResNetConfig small;
  small.stage_filters = {8};
  small.blocks_per_stage = 1;
  BiResNet<float> model(small, 5);
  Checkpoint ckpt = snapshot(model);
  ckpt.entries.pop_back();
  CHECK_THROWS_AS(restore(model, ckpt), DataError);
}
