#include <cmath>

#include "doctest.h"

#include "biresnet/gradcheck.hpp"
#include "biresnet/intralink.hpp"
#include "biresnet/ops.hpp"
#include "biresnet/rng.hpp"

using namespace biresnet;

namespace {

Tensor<double> vec(std::initializer_list<double> vals) {
  Tensor<double> t({vals.size()});
  std::size_t i = 0;
  for (double v : vals) t[i++] = v;
  return t;
}

}  // namespace

TEST_CASE("intralink forward: n=1 hand cases") {
  {
    Tensor<double> x = intralink_forward(vec({1.0, -2.0}), {1}, nullptr);
    CHECK(x[0] == 1.0);  // relu(-2)=0 adds nothing
    CHECK(x[1] == 0.0);
  }
  {
    Tensor<double> x = intralink_forward(vec({1.0, 2.0}), {1}, nullptr);
    CHECK(x[0] == 3.0);
    CHECK(x[1] == 2.0);
  }
}

TEST_CASE("intralink forward: n=2 chain [1,1,1] -> [3,2,1]") {
  Tensor<double> x = intralink_forward(vec({1.0, 1.0, 1.0}), {2}, nullptr);
  CHECK(x[0] == 3.0);
  CHECK(x[1] == 2.0);
  CHECK(x[2] == 1.0);
}

TEST_CASE("intralink forward: n=0 is bit-exact plain ReLU") {
  SeededRng rng(1, "il/n0");
  Tensor<double> g({2, 6, 5});
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.normal();
  Tensor<double> a = intralink_forward(g, {0}, nullptr);
  Tensor<double> b = relu(g);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("intralink forward: remainder units are plain") {
  // 5 units, n=1 -> groups (0,1),(2,3), unit 4 plain
  Tensor<double> x =
      intralink_forward(vec({1.0, 1.0, 1.0, 1.0, 1.0}), {1}, nullptr);
  CHECK(x[0] == 2.0);
  CHECK(x[1] == 1.0);
  CHECK(x[2] == 2.0);
  CHECK(x[3] == 1.0);
  CHECK(x[4] == 1.0);
}

TEST_CASE("intralink forward: conv tensors chain channels per time position") {
  Tensor<double> g({1, 2, 3});
  // channel 0: [1,-1,2], channel 1: [1,1,-5]
  g(0, 0, 0) = 1;
  g(0, 0, 1) = -1;
  g(0, 0, 2) = 2;
  g(0, 1, 0) = 1;
  g(0, 1, 1) = 1;
  g(0, 1, 2) = -5;
  Tensor<double> x = intralink_forward(g, {1}, nullptr);
  CHECK(x(0, 0, 0) == 2.0);  // 1 + relu(1)
  CHECK(x(0, 0, 1) == 0.0);  // relu(-1 + relu(1)) = 0
  CHECK(x(0, 0, 2) == 2.0);  // 2 + relu(-5) = 2
  CHECK(x(0, 1, 0) == 1.0);
  CHECK(x(0, 1, 1) == 1.0);
  CHECK(x(0, 1, 2) == 0.0);
}

TEST_CASE("intralink forward: group size exceeding the axis is an error") {
  CHECK_THROWS_AS(intralink_forward(vec({1.0, 2.0}), {2}, nullptr), DataError);
}

TEST_CASE("intralink backward: hand cases") {
  {
    IntraLinkCache<double> cache;
    intralink_forward(vec({1.0, 2.0}), {1}, &cache);
    Tensor<double> dg = intralink_backward(cache, vec({1.0, 0.0}));
    CHECK(dg[0] == 1.0);
    CHECK(dg[1] == 1.0);  // reached through the relu(g'[1]) path
  }
  {
    IntraLinkCache<double> cache;
    intralink_forward(vec({1.0, -2.0}), {1}, &cache);
    Tensor<double> dg = intralink_backward(cache, vec({1.0, 1.0}));
    CHECK(dg[0] == 1.0);
    CHECK(dg[1] == 0.0);  // dead successor blocks both paths
  }
}

TEST_CASE("intralink backward: finite differences for n in {1,2,3}") {
  for (int n = 1; n <= 3; ++n) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SeededRng rng(seed, "il/fd" + std::to_string(n));
      Tensor<double> g({2, 7, 3});
      for (std::size_t i = 0; i < g.size(); ++i) {
        double v = rng.normal();
        while (std::fabs(v) < 5e-3) v = rng.normal();
        g[i] = v;
      }
      Tensor<double> proj({2, 7, 3});
      for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = rng.normal();
      const IntraLinkConfig cfg{n};
      auto loss = [&]() {
        Tensor<double> x = intralink_forward(g, cfg, nullptr);
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * proj[i];
        return s;
      };
      IntraLinkCache<double> cache;
      intralink_forward(g, cfg, &cache);
      Tensor<double> dg = intralink_backward(cache, proj);
      bool near_kink = false;
      for (std::size_t i = 0; i < cache.g_chain.size(); ++i) {
        if (std::fabs(cache.g_chain[i]) < 5e-3) near_kink = true;
      }
      if (near_kink) continue;  // finite differences invalid at ReLU kinks
      const auto rep =
          finite_diff_check(loss, {{"g", g.data(), dg.data(), g.size()}});
      CHECK(rep.max_rel_err < 1e-5);
    }
  }
}

TEST_CASE("intralink: all-non-positive group yields zeros for any n") {
  for (int n = 0; n <= 4; ++n) {
    Tensor<double> g({6});
    for (std::size_t i = 0; i < 6; ++i) g[i] = -1.0 - static_cast<double>(i);
    Tensor<double> x = intralink_forward(g, {n}, nullptr);
    for (std::size_t i = 0; i < 6; ++i) CHECK(x[i] == 0.0);
  }
}

TEST_CASE("intralink: raising one input never lowers any group output") {
  SeededRng rng(3, "il/mono");
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> g({6});
    for (std::size_t i = 0; i < 6; ++i) g[i] = rng.normal();
    const IntraLinkConfig cfg{2};
    Tensor<double> base = intralink_forward(g, cfg, nullptr);
    const std::size_t bump = rng.below(6);
    g[bump] += 0.5;
    Tensor<double> raised = intralink_forward(g, cfg, nullptr);
    for (std::size_t i = 0; i < 6; ++i) CHECK(raised[i] >= base[i]);
  }
}

TEST_CASE("intralink: adds zero parameters") {
  CHECK(param_count_delta({0}) == 0);
  CHECK(param_count_delta({1}) == 0);
  CHECK(param_count_delta({4}) == 0);
}
