#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "lewisim/agents.hpp"
#include "lewisim/optim.hpp"
#include "lewisim/tensor.hpp"

using namespace lewisim;

namespace {

Param random_param(const std::string& name, std::vector<int> shape, Rng& rng) {
  Param p(name, Tensor(std::move(shape)));
  for (double& x : p.value.v) x = rng.uniform(-1.0, 1.0);
  return p;
}

}  // namespace

TEST_CASE("elementwise square: analytic derivative") {
  Param w("w", Tensor::row({1.0, -2.0}));
  Graph g;
  Graph::Id wid = g.param(w);
  Graph::Id loss = g.sum(g.mul(wid, wid));
  g.backward(loss);
  CHECK(w.grad[0] == doctest::Approx(2.0));
  CHECK(w.grad[1] == doctest::Approx(-4.0));
}

TEST_CASE("constant loss leaves all gradients zero") {
  Param w("w", Tensor::row({0.3, 0.7}));
  Graph g;
  (void)g.param(w);
  Graph::Id loss = g.sum(g.input(Tensor::row({5.0})));
  g.backward(loss);
  CHECK(w.grad[0] == 0.0);
  CHECK(w.grad[1] == 0.0);
}

TEST_CASE("random three-layer composition matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Param w1 = random_param("w1", {4, 5}, rng);
    Param b1 = random_param("b1", {1, 5}, rng);
    Param w2 = random_param("w2", {5, 3}, rng);
    Param g1 = random_param("g1", {1, 3}, rng);
    Tensor x(2, 4);
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    auto builder = [&](Graph& g) {
      Graph::Id h = g.tanh_(g.affine(g.input(x), g.param(w1), g.param(b1)));
      Graph::Id y = g.sigmoid(g.matmul(h, g.param(w2)));
      Graph::Id z = g.layer_norm(y, g.param(g1));
      return g.sum(g.mul(z, z));
    };
    const double err = grad_check(builder, {&w1, &b1, &w2, &g1});
    CHECK(err < 1e-4);
  }
}

TEST_CASE("every op kind matches finite differences on random instances") {
  Rng rng(23);
  int instances = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int rows = 2 + static_cast<int>(rng.uniform_int(3));
    const int cols = 2 + static_cast<int>(rng.uniform_int(4));
    Param a = random_param("a", {rows, cols}, rng);
    Param b = random_param("b", {rows, cols}, rng);
    Param w = random_param("w", {cols, 3}, rng);
    Param gain = random_param("gain", {1, cols}, rng);
    Param bias = random_param("bias", {1, cols}, rng);
    std::vector<std::int32_t> picks(static_cast<std::size_t>(rows));
    for (auto& p : picks) p = static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(cols)));
    std::vector<std::int32_t> row_idx(static_cast<std::size_t>(rows));
    for (auto& p : row_idx) p = static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(rows)));
    std::vector<double> mask(static_cast<std::size_t>(rows));
    for (auto& m : mask) m = rng.uniform() < 0.5 ? 0.0 : 1.0;
    std::vector<double> wsum(static_cast<std::size_t>(rows));
    for (auto& v : wsum) v = rng.uniform(-1.0, 1.0);

    auto check = [&](const std::function<Graph::Id(Graph&)>& build,
                     std::vector<Param*> params) {
      CHECK(grad_check(build, std::move(params)) < 1e-4);
      ++instances;
    };
    switch (trial % 8) {
      case 0:
        check([&](Graph& g) { return g.mean(g.tanh_(g.matmul(g.param(a), g.param(w)))); },
              {&a, &w});
        break;
      case 1:
        check([&](Graph& g) { return g.sum(g.sigmoid(g.add(g.param(a), g.param(b)))); },
              {&a, &b});
        break;
      case 2:
        check([&](Graph& g) {
          return g.sum(g.layer_norm(g.param(a), g.param(gain), g.param(bias)));
        },
              {&a, &gain, &bias});
        break;
      case 3:
        check([&](Graph& g) {
          return g.weighted_sum(g.pick(g.log_softmax(g.param(a)), picks),
                                std::vector<double>(wsum.begin(), wsum.end()));
        },
              {&a});
        break;
      case 4:
        check([&](Graph& g) {
          return g.weighted_sum(g.entropy(g.log_softmax(g.param(a))),
                                std::vector<double>(wsum.begin(), wsum.end()));
        },
              {&a});
        break;
      case 5:
        check([&](Graph& g) {
          return g.sum(g.lerp_rows(g.param(a), g.param(b),
                                   std::vector<double>(mask.begin(), mask.end())));
        },
              {&a, &b});
        break;
      case 6:
        check([&](Graph& g) {
          Graph::Id sl = g.slice_cols(g.param(a), 1, cols);
          return g.mean(g.mul(sl, sl));
        },
              {&a});
        break;
      case 7:
        check([&](Graph& g) {
          Graph::Id emb = g.rows(g.param(a), row_idx);
          return g.sum(g.scale(g.mul(emb, emb), 0.5));
        },
              {&a});
        break;
    }
  }
  CHECK(instances == 100);
}

TEST_CASE("group_dot gradients match finite differences") {
  Rng rng(5);
  Param msg = random_param("msg", {3, 4}, rng);
  Param cand = random_param("cand", {6, 4}, rng);
  std::vector<std::int32_t> targets{0, 1, 1};
  auto builder = [&](Graph& g) {
    Graph::Id scores = g.group_dot(g.param(msg), g.param(cand), 2);
    return g.mean(g.pick(g.log_softmax(scores), targets));
  };
  CHECK(grad_check(builder, {&msg, &cand}) < 1e-4);
}

TEST_CASE("layer norm: constants map to zero, zero-mean unit-variance passes through") {
  Graph g;
  Param gain("g", Tensor::row({1.0, 1.0, 1.0}));
  Graph::Id out = g.layer_norm(g.input(Tensor::row({2.5, 2.5, 2.5})), g.param(gain));
  for (double v : g.val(out).v) CHECK(v == doctest::Approx(0.0));

  Param gain2("g2", Tensor::row({1.0, 1.0}));
  Graph::Id out2 = g.layer_norm(g.input(Tensor::row({1.0, -1.0})), g.param(gain2));
  CHECK(std::abs(g.val(out2).v[0] - 1.0) < 1e-4);
  CHECK(std::abs(g.val(out2).v[1] + 1.0) < 1e-4);
}

TEST_CASE("layer norm output is standardized for non-constant rows") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(30));
    Param gain("g", Tensor::row(std::vector<double>(static_cast<std::size_t>(n), 1.0)));
    Tensor x(1, n);
    for (double& v : x.v) v = rng.uniform(-3.0, 3.0);
    Graph g;
    const Tensor& out = g.val(g.layer_norm(g.input(x), g.param(gain)));
    double mean = 0.0;
    for (double v : out.v) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : out.v) var += (v - mean) * (v - mean);
    var /= n;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("log softmax: stability and exact normalization") {
  Graph g;
  Graph::Id lp = g.log_softmax(g.input(Tensor::row({1000.0, 0.0, 0.0})));
  const double loss = -g.val(lp).v[0];
  CHECK(loss >= 0.0);
  CHECK(loss < 1e-12);

  Graph::Id uniform = g.log_softmax(g.input(Tensor::row({0.0, 0.0, 0.0, 0.0})));
  CHECK(-g.val(uniform).v[2] == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits(3, 7);
    for (double& v : logits.v) v = rng.uniform(-30.0, 30.0);
    Graph g2;
    const Tensor& out = g2.val(g2.log_softmax(g2.input(logits)));
    for (int i = 0; i < out.rows(); ++i) {
      double total = 0.0;
      for (int j = 0; j < out.cols(); ++j) {
        const double p = std::exp(out.at(i, j));
        CHECK(p >= 0.0);
        total += p;
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("pick rejects out-of-range targets") {
  Graph g;
  Graph::Id lp = g.log_softmax(g.input(Tensor::row({0.0, 1.0})));
  CHECK_THROWS_AS((void)g.pick(lp, {2}), ContractError);
  CHECK_THROWS_AS((void)g.pick(lp, {-1}), ContractError);
}

TEST_CASE("backward requires a scalar loss") {
  Graph g;
  Graph::Id v = g.input(Tensor::row({1.0, 2.0}));
  CHECK_THROWS_AS(g.backward(v), ContractError);
}

TEST_CASE("adam: first-step magnitude, zero-grad no-op, quadratic descent") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  {
    Param w("w", Tensor::scalar(1.0));
    Adam adam({&w}, cfg);
    w.grad[0] = 0.37;  // any nonzero gradient: bias correction gives step ~ lr
    adam.step();
    CHECK(std::abs(std::abs(1.0 - w.value.v[0]) - cfg.lr) < 1e-6);
    CHECK(adam.t() == 1);
  }
  {
    Param w("w", Tensor::scalar(0.5));
    Adam adam({&w}, cfg);
    adam.step();  // zero gradient
    CHECK(w.value.v[0] == 0.5);
    CHECK(adam.t() == 1);
  }
  {
    // f(w) = w^2 from w=1: strictly decreasing toward 0 every step.
    Param w("w", Tensor::scalar(1.0));
    Adam adam({&w}, cfg);
    double prev = 1.0;
    for (int i = 0; i < 10; ++i) {
      w.grad[0] = 2.0 * w.value.v[0];
      adam.step();
      CHECK(w.value.v[0] < prev);
      CHECK(w.value.v[0] > -0.5);
      prev = w.value.v[0];
    }
  }
}

TEST_CASE("decoupled weight decay shrinks parameters with zero gradient") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  Param w("w", Tensor::scalar(2.0));
  Adam adam({&w}, cfg);
  adam.step();
  CHECK(w.value.v[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)));
}

TEST_CASE("lstm cell: zero weights and inputs give zero outputs") {
  Rng rng(3);
  LstmCell cell("lstm", 4, 4, true, rng);
  for (Param* p : cell.params()) std::fill(p->value.v.begin(), p->value.v.end(), 0.0);
  // Gains stay zero too: layer norm of a constant row is zero regardless.
  Graph g;
  Graph::Id x = g.input(Tensor(1, 4));
  Graph::Id h = g.input(Tensor(1, 4));
  Graph::Id c = g.input(Tensor(1, 4));
  cell.step(g, x, h, c);
  for (double v : g.val(h).v) CHECK(v == doctest::Approx(0.0));
  for (double v : g.val(c).v) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("lstm cell gradients match finite differences") {
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    LstmCell cell("lstm", 3, 3, trial % 2 == 0, rng);
    Tensor x(2, 3), h0(2, 3), c0(2, 3);
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    for (double& v : h0.v) v = rng.uniform(-0.5, 0.5);
    for (double& v : c0.v) v = rng.uniform(-0.5, 0.5);
    auto builder = [&](Graph& g) {
      Graph::Id h = g.input(h0), c = g.input(c0);
      cell.step(g, g.input(x), h, c);
      return g.sum(g.mul(h, h));
    };
    CHECK(grad_check(builder, cell.params()) < 1e-4);
  }
}

TEST_CASE("lstm step is deterministic") {
  Rng rng(13);
  LstmCell cell("lstm", 4, 4, true, rng);
  Tensor x(2, 4), h0(2, 4), c0(2, 4);
  for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
  auto run = [&]() {
    Graph g;
    Graph::Id h = g.input(h0), c = g.input(c0);
    cell.step(g, g.input(x), h, c);
    return g.val(h).v;
  };
  const auto a = run();
  const auto b = run();
  CHECK(a == b);
}

TEST_CASE("gradient check utility: linear layer and constant function") {
  Rng rng(17);
  Param w = random_param("w", {4, 2}, rng);
  Param b = random_param("b", {1, 2}, rng);
  Tensor x(3, 4);
  for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
  const double lin_err =
      grad_check([&](Graph& g) { return g.sum(g.affine(g.input(x), g.param(w), g.param(b))); },
                 {&w, &b});
  CHECK(lin_err < 1e-6);

  Param unused = random_param("u", {2, 2}, rng);
  const double const_err =
      grad_check([&](Graph& g) {
        (void)g.param(unused);
        return g.sum(g.input(Tensor::row({1.0})));
      },
                 {&unused});
  CHECK(const_err == 0.0);
}

TEST_CASE("dropout: inverted scaling and exact mask reuse in backward") {
  Rng rng(21);
  Graph g;
  Tensor x(1, 1000);
  for (double& v : x.v) v = 1.0;
  Graph::Id out = g.dropout(g.input(x), 0.25, rng);
  double mean = 0.0;
  int zeros = 0;
  for (double v : g.val(out).v) {
    mean += v;
    if (v == 0.0) ++zeros;
  }
  mean /= 1000.0;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.1));
  CHECK(zeros > 150);
  CHECK(zeros < 350);
}

TEST_CASE("non-finite rewards raise numeric errors with the node id") {
  Graph g;
  Graph::Id x = g.input(Tensor::row({1e308, 1e308}));
  Graph::Id y = g.mul(x, x);  // overflows to inf
  Graph::Id loss = g.sum(y);
  CHECK_THROWS_AS(g.backward(loss), NumericError);
}
