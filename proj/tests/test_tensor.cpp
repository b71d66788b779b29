#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "stcsnn/tensor.hpp"

using namespace stcsnn;

namespace {

double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-12 ? 0.0 : std::abs(a - b) / scale;
}

Tensor<double> randn(std::vector<std::size_t> shape, std::mt19937_64& rng,
                     double sd = 1.0) {
  Tensor<double> t(std::move(shape));
  std::normal_distribution<double> d(0.0, sd);
  for (double& v : t.data) v = d(rng);
  return t;
}

}  // namespace

TEST_CASE("scalar conv is multiplication") {
  Tensor<double> x({1, 1, 1}, {3.0});
  Tensor<double> k({1, 1, 1, 1}, {2.0});
  Tensor<double> out = conv2d(x, k, Tensor<double>{});
  CHECK(out.data[0] == 6.0);
}

TEST_CASE("identity kernel with same padding is the identity map") {
  std::mt19937_64 rng(1);
  Tensor<double> x = randn({2, 5, 5}, rng);
  Tensor<double> k({2, 2, 3, 3});
  k.data[(0 * 2 + 0) * 9 + 4] = 1.0;  // center tap, matching channel
  k.data[(1 * 2 + 1) * 9 + 4] = 1.0;
  Tensor<double> out = conv2d(x, k, Tensor<double>{}, 1, 1);
  REQUIRE(out.shape == x.shape);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(out.data[i] == Catch::Approx(x.data[i]));
}

TEST_CASE("conv shape errors") {
  Tensor<double> x({1, 2, 2});
  Tensor<double> k({1, 2, 1, 1});  // channel mismatch
  CHECK_THROWS_AS(conv2d(x, k, Tensor<double>{}), ShapeError);
  Tensor<double> big({1, 1, 5, 5});
  CHECK_THROWS_AS(conv2d(x, big, Tensor<double>{}), ShapeError);
}

TEST_CASE("conv backward matches finite differences") {
  std::mt19937_64 rng(2);
  Tensor<double> x = randn({2, 4, 4}, rng);
  Tensor<double> k = randn({3, 2, 3, 3}, rng);
  Tensor<double> b = randn({3}, rng, 0.1);
  Tensor<double> gout = randn({3, 4, 4}, rng);

  auto objective = [&]() {
    Tensor<double> out = conv2d(x, k, b, 1, 1);
    double acc = 0;
    for (std::size_t i = 0; i < out.size(); ++i)
      acc += out.data[i] * gout.data[i];
    return acc;
  };
  Conv2dGrads<double> g = conv2d_backward(x, k, gout, 1, 1);

  const double eps = 1e-3;
  auto fd_check = [&](Tensor<double>& param, const Tensor<double>& analytic) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double keep = param.data[i];
      param.data[i] = keep + eps;
      const double lp = objective();
      param.data[i] = keep - eps;
      const double lm = objective();
      param.data[i] = keep;
      CHECK(rel_err((lp - lm) / (2 * eps), analytic.data[i]) < 1e-4);
    }
  };
  fd_check(x, g.input);
  fd_check(k, g.kernels);
  fd_check(b, g.bias);
}

TEST_CASE("avgpool basics") {
  Tensor<double> x({1, 2, 2}, {1, 2, 3, 4});
  Tensor<double> out = avgpool2d(x, 2);
  CHECK(out.data[0] == 2.5);

  Tensor<double> c({1, 4, 4});
  c.fill(7.0);
  Tensor<double> pc = avgpool2d(c, 2);
  for (double v : pc.data) CHECK(v == 7.0);

  Tensor<double> odd({1, 3, 3});
  CHECK_THROWS_AS(avgpool2d(odd, 2), ShapeError);

  Tensor<double> gout({1, 1, 1}, {1.0});
  Tensor<double> g = avgpool2d_backward(gout, 2, {1, 2, 2});
  for (double v : g.data) CHECK(v == 0.25);
}

TEST_CASE("dense forward and backward") {
  Tensor<double> w({2, 2}, {1, 2, 3, 4});
  Tensor<double> x({2}, {1, 1});
  Tensor<double> out = dense(w, x, Tensor<double>{});
  CHECK(out.data[0] == 3.0);
  CHECK(out.data[1] == 7.0);

  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  Tensor<double> same = dense(eye, x, Tensor<double>{});
  CHECK(same.data == x.data);

  // finite differences against the W^T g backward, 64-bit
  std::mt19937_64 rng(3);
  Tensor<double> w2 = randn({3, 4}, rng);
  Tensor<double> x2 = randn({4}, rng);
  Tensor<double> g2 = randn({3}, rng);
  Tensor<double> gx = dense_backward_input(w2, g2);
  const double eps = 1e-6;
  for (std::size_t j = 0; j < 4; ++j) {
    const double keep = x2.data[j];
    auto obj = [&]() {
      Tensor<double> o = dense(w2, x2, Tensor<double>{});
      double acc = 0;
      for (std::size_t i = 0; i < 3; ++i) acc += o.data[i] * g2.data[i];
      return acc;
    };
    x2.data[j] = keep + eps;
    const double lp = obj();
    x2.data[j] = keep - eps;
    const double lm = obj();
    x2.data[j] = keep;
    CHECK(rel_err((lp - lm) / (2 * eps), gx.data[j]) < 1e-6);
  }
}

TEST_CASE("relu") {
  Tensor<double> x({3}, {-1, 0, 2});
  Tensor<double> out = relu(x);
  CHECK(out.data == std::vector<double>{0, 0, 2});
  Tensor<double> g({3}, {1, 1, 1});
  Tensor<double> gx = relu_backward(x, g);
  CHECK(gx.data == std::vector<double>{0, 0, 1});
}

TEST_CASE("dropout mask") {
  Tensor<double> ones = dropout_mask<double>({10}, 0.0, 1);
  for (double v : ones.data) CHECK(v == 1.0);

  Tensor<double> a = dropout_mask<double>({100}, 0.5, 9);
  Tensor<double> b = dropout_mask<double>({100}, 0.5, 9);
  CHECK(a.data == b.data);

  CHECK_THROWS_AS(dropout_mask<double>({4}, 1.0, 1), ArgumentError);

  // unbiasedness: mean over many draws stays near 1
  double acc = 0;
  const std::size_t n = 100000;
  Tensor<double> big = dropout_mask<double>({n}, 0.3, 77);
  for (double v : big.data) acc += v;
  CHECK(acc / n == Catch::Approx(1.0).margin(0.01));
}
