#include <doctest.h>

#include <cmath>

#include "octdn/tensor.hpp"
#include "support.hpp"

using namespace octdn;
using testsup::fd_max_rel_error;

namespace {

Tensor rand_tensor(std::vector<int> shape, uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  return Tensor::randn(std::move(shape), rng, scale);
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) acc += a.values()[i] * b.values()[i];
  return acc;
}

}  // namespace

TEST_CASE("tensor invariants") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(t.value(), std::invalid_argument);
  CHECK(Tensor::scalar(4.5).value() == 4.5);
}

TEST_CASE("conv2d identity kernel") {
  Tensor x = rand_tensor({1, 1, 4, 4}, 11);
  Tensor k({1, 1, 1, 1}, {1.0});
  Tensor b({1}, {0.0});
  Tensor y = conv2d(nullptr, x, k, b, 1, 0);
  REQUIRE(y.shape() == x.shape());
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("conv2d constant field with all-ones 3x3 kernel") {
  const double a = 0.37;
  Tensor x = Tensor::full({1, 1, 5, 5}, a);
  Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor b({1}, {0.0});
  Tensor y = conv2d(nullptr, x, k, b, 1, 1);
  REQUIRE(y.shape() == std::vector<int>{1, 1, 5, 5});
  auto at = [&](int i, int j) { return y.values()[static_cast<size_t>(i) * 5 + j]; };
  CHECK(at(2, 2) == doctest::Approx(9 * a).epsilon(1e-12));  // interior
  CHECK(at(0, 0) == doctest::Approx(4 * a).epsilon(1e-12));  // corner
  CHECK(at(0, 2) == doctest::Approx(6 * a).epsilon(1e-12));  // edge
}

TEST_CASE("conv2d output shape and errors") {
  Tensor x({1, 2, 5, 5});
  Tensor k({3, 2, 3, 3});
  Tensor b({3});
  CHECK(conv2d(nullptr, x, k, b, 2, 1).shape() == std::vector<int>{1, 3, 3, 3});
  CHECK_THROWS_AS(conv2d(nullptr, x, k, b, 0, 1), std::invalid_argument);
  Tensor k_bad({3, 1, 3, 3});
  CHECK_THROWS_AS(conv2d(nullptr, x, k_bad, b, 1, 1), std::invalid_argument);
  Tensor k_big({3, 2, 7, 7});
  CHECK_THROWS_AS(conv2d(nullptr, x, k_big, b, 1, 0), std::invalid_argument);
}

TEST_CASE("conv2d gradient vs finite differences") {
  Tensor x = rand_tensor({1, 2, 5, 5}, 21, 0.5);
  Tensor k = rand_tensor({3, 2, 3, 3}, 22, 0.5);
  Tensor b = rand_tensor({3}, 23, 0.2);
  Tensor target = rand_tensor({1, 3, 5, 5}, 24, 0.5);
  auto loss = [&](Tape* t) { return mse(t, conv2d(t, x, k, b, 1, 1), target); };
  CHECK(fd_max_rel_error({x, k, b}, loss) < 1e-4);
}

TEST_CASE("conv2d strided gradient vs finite differences") {
  Tensor x = rand_tensor({2, 2, 6, 6}, 31, 0.5);
  Tensor k = rand_tensor({3, 2, 3, 3}, 32, 0.5);
  Tensor b = rand_tensor({3}, 33, 0.2);
  Tensor target = rand_tensor({2, 3, 3, 3}, 34, 0.5);
  auto loss = [&](Tape* t) { return mse(t, conv2d(t, x, k, b, 2, 1), target); };
  CHECK(fd_max_rel_error({x, k, b}, loss) < 1e-4);
}

TEST_CASE("conv2d_transpose identity and shape formula") {
  Tensor x = rand_tensor({1, 1, 4, 4}, 41);
  Tensor k({1, 1, 1, 1}, {1.0});
  Tensor b({1}, {0.0});
  Tensor y = conv2d_transpose(nullptr, x, k, b, 1, 0);
  for (int64_t i = 0; i < x.size(); ++i) CHECK(y.values()[i] == x.values()[i]);

  Tensor k2({1, 1, 2, 2});
  CHECK(conv2d_transpose(nullptr, x, k2, b, 2, 0).shape() ==
        std::vector<int>{1, 1, 8, 8});
}

TEST_CASE("conv2d_transpose is the exact adjoint of conv2d") {
  // <conv(x;k), y> == <x, conv_t(y;k)> with matching hyperparameters
  struct Case {
    int stride, pad, kh;
  };
  for (const Case c : {Case{1, 0, 3}, Case{1, 1, 3}, Case{2, 1, 3}, Case{2, 0, 2}}) {
    // pick an extent the conv tiles exactly, so conv_t reproduces it
    int h = 8;
    while ((h + 2 * c.pad - c.kh) % c.stride != 0) ++h;
    Tensor x = rand_tensor({2, 3, h, h}, 100 + c.stride * 10 + c.pad, 1.0);
    Tensor k = rand_tensor({4, 3, c.kh, c.kh}, 200 + c.kh, 1.0);
    Tensor zero_o({4}), zero_c({3});
    Tensor cx = conv2d(nullptr, x, k, zero_o, c.stride, c.pad);
    Tensor y = rand_tensor(cx.shape(), 300 + c.pad, 1.0);
    Tensor cty = conv2d_transpose(nullptr, y, k, zero_c, c.stride, c.pad);
    REQUIRE(cty.shape() == x.shape());
    const double lhs = dot(cx, y);
    const double rhs = dot(x, cty);
    CHECK(testsup::rel_err(lhs, rhs) < 1e-10);
  }
}

TEST_CASE("conv2d_transpose gradient vs finite differences") {
  Tensor x = rand_tensor({1, 3, 4, 4}, 51, 0.5);
  Tensor k = rand_tensor({3, 2, 4, 4}, 52, 0.5);
  Tensor b = rand_tensor({2}, 53, 0.2);
  Tensor target = rand_tensor({1, 2, 8, 8}, 54, 0.5);
  auto loss = [&](Tape* t) { return mse(t, conv2d_transpose(t, x, k, b, 2, 1), target); };
  CHECK(fd_max_rel_error({x, k, b}, loss) < 1e-4);
}

TEST_CASE("relu forward and gradient") {
  Tensor x({3}, {-1.0, 0.0, 2.0});
  Tensor y = relu(nullptr, x);
  CHECK(y.values() == std::vector<double>{0.0, 0.0, 2.0});

  // all-negative input: zero output, zero gradient
  Tensor neg({4}, {-0.5, -1.0, -2.0, -0.1});
  neg.set_requires_grad(true);
  Tape tape;
  Tensor loss = mse(&tape, relu(&tape, neg), Tensor::zeros({4}));
  tape.backward(loss);
  CHECK(loss.value() == 0.0);
  for (double g : neg.grad()) CHECK(g == 0.0);

  // gradient check away from the kink
  Tensor xr({6}, {-2.0, -0.7, -0.2, 0.3, 0.9, 1.7});
  Tensor target({6}, {0.1, -0.3, 0.2, 0.4, -0.2, 0.5});
  auto lf = [&](Tape* t) { return mse(t, relu(t, xr), target); };
  CHECK(fd_max_rel_error({xr}, lf) < 1e-4);
}

TEST_CASE("sigmoid forward, symmetry and gradient") {
  Tensor zero({1}, {0.0});
  CHECK(sigmoid(nullptr, zero).value() == doctest::Approx(0.5).epsilon(1e-15));

  Tensor x = rand_tensor({64}, 61, 2.0);
  Tensor y = sigmoid(nullptr, x);
  Tensor xn = x.clone_values();
  for (double& v : xn.values()) v = -v;
  Tensor yn = sigmoid(nullptr, xn);
  for (int64_t i = 0; i < x.size(); ++i) {
    CHECK(y.values()[i] > 0.0);
    CHECK(y.values()[i] < 1.0);
    CHECK(std::fabs(y.values()[i] - (1.0 - yn.values()[i])) < 1e-12);
  }

  Tensor target = rand_tensor({8}, 62, 0.3);
  Tensor xs = rand_tensor({8}, 63, 1.5);
  auto lf = [&](Tape* t) { return mse(t, sigmoid(t, xs), target); };
  CHECK(fd_max_rel_error({xs}, lf) < 1e-4);
}

TEST_CASE("affine forward and gradient") {
  Tensor x({1, 2}, {1.0, 2.0});
  Tensor w({1, 2}, {3.0, 4.0});
  Tensor b({1}, {5.0});
  CHECK(affine(nullptr, x, w, b).value() == doctest::Approx(16.0).epsilon(1e-15));

  // identity weight, zero bias
  Tensor xi = rand_tensor({3, 4}, 71);
  Tensor wi({4, 4});
  for (int i = 0; i < 4; ++i) wi.values()[static_cast<size_t>(i) * 4 + i] = 1.0;
  Tensor bi({4});
  Tensor yi = affine(nullptr, xi, wi, bi);
  for (int64_t i = 0; i < xi.size(); ++i) CHECK(yi.values()[i] == xi.values()[i]);

  Tensor xg = rand_tensor({2, 3}, 72, 0.7);
  Tensor wg = rand_tensor({4, 3}, 73, 0.7);
  Tensor bg = rand_tensor({4}, 74, 0.3);
  Tensor tg = rand_tensor({2, 4}, 75, 0.5);
  auto lf = [&](Tape* t) { return mse(t, affine(t, xg, wg, bg), tg); };
  CHECK(fd_max_rel_error({xg, wg, bg}, lf) < 1e-4);

  Tensor w_bad({4, 2});
  CHECK_THROWS_AS(affine(nullptr, xg, w_bad, bg), std::invalid_argument);
}

TEST_CASE("global_avg_pool forward and gradient") {
  Tensor c = Tensor::full({1, 1, 3, 3}, 0.42);
  CHECK(global_avg_pool(nullptr, c).value() == doctest::Approx(0.42).epsilon(1e-15));

  Tensor x({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(global_avg_pool(nullptr, x).value() == doctest::Approx(2.5).epsilon(1e-15));

  Tensor xg = rand_tensor({2, 3, 4, 4}, 81, 0.8);
  Tensor tg = rand_tensor({2, 3}, 82, 0.5);
  auto lf = [&](Tape* t) { return mse(t, global_avg_pool(t, xg), tg); };
  CHECK(fd_max_rel_error({xg}, lf) < 1e-4);
}

TEST_CASE("softmax_cross_entropy values") {
  // uniform logits over K=4 -> ln 4
  Tensor logits({1, 4}, {0.3, 0.3, 0.3, 0.3});
  CHECK(softmax_cross_entropy(nullptr, logits, {2}).value() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // one confident logit: high-precision oracle log1p(3*exp(-10))
  Tensor conf({1, 4}, {10.0, 0.0, 0.0, 0.0});
  const double oracle = std::log1p(3.0 * std::exp(-10.0));
  const double got = softmax_cross_entropy(nullptr, conf, {0}).value();
  CHECK(testsup::rel_err(got, oracle) < 1e-10);
  CHECK(got == doctest::Approx(1.3620e-4).epsilon(1e-3));

  // shift invariance
  Tensor l1 = rand_tensor({3, 4}, 91);
  Tensor l2 = l1.clone_values();
  for (double& v : l2.values()) v += 7.25;
  const std::vector<int> labels = {0, 3, 1};
  CHECK(std::fabs(softmax_cross_entropy(nullptr, l1, labels).value() -
                  softmax_cross_entropy(nullptr, l2, labels).value()) < 1e-10);

  // non-negative
  CHECK(softmax_cross_entropy(nullptr, l1, labels).value() >= 0.0);

  CHECK_THROWS_AS(softmax_cross_entropy(nullptr, l1, {0, 1, 4}), std::invalid_argument);
  CHECK_THROWS_AS(softmax_cross_entropy(nullptr, l1, {0, 1}), std::invalid_argument);
}

TEST_CASE("softmax_cross_entropy gradient vs finite differences") {
  Tensor logits = rand_tensor({3, 4}, 95, 1.0);
  const std::vector<int> labels = {1, 0, 3};
  auto lf = [&](Tape* t) { return softmax_cross_entropy(t, logits, labels); };
  CHECK(fd_max_rel_error({logits}, lf) < 1e-4);
}

TEST_CASE("mse values and gradient") {
  Tensor a = rand_tensor({5}, 101);
  CHECK(mse(nullptr, a, a.clone_values()).value() == 0.0);

  Tensor b = a.clone_values();
  for (double& v : b.values()) v += 0.1;
  CHECK(mse(nullptr, a, b).value() == doctest::Approx(0.01).epsilon(1e-12));

  Tensor x = rand_tensor({7}, 102);
  Tensor y = rand_tensor({7}, 103);
  auto lf = [&](Tape* t) { return mse(t, x, y); };
  CHECK(fd_max_rel_error({x, y}, lf) < 1e-4);

  CHECK_THROWS_AS(mse(nullptr, a, Tensor({4})), std::invalid_argument);
}

TEST_CASE("backward basics") {
  // loss = mse(x, 0) for x=[3] -> grad 6
  Tensor x({1}, {3.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss = mse(&tape, x, Tensor::zeros({1}));
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));

  // accumulation: y = x + x -> dy/dx = 2
  Tensor x2({1}, {1.5});
  x2.set_requires_grad(true);
  Tape tape2;
  Tensor sum = add(&tape2, x2, x2);
  Tensor loss2 = scale(&tape2, sum, 1.0);
  tape2.backward(loss2);
  CHECK(x2.grad()[0] == doctest::Approx(2.0).epsilon(1e-15));

  // consumed twice -> error
  CHECK_THROWS_AS(tape2.backward(loss2), std::invalid_argument);
  tape2.reset();
  CHECK(tape2.size() == 0);

  // non-scalar loss -> error
  Tape tape3;
  Tensor v = add(&tape3, Tensor::zeros({3}), Tensor::zeros({3}));
  CHECK_THROWS_AS(tape3.backward(v), std::invalid_argument);

  // loss from another tape -> error
  Tape tape4;
  CHECK_THROWS_AS(tape4.backward(loss), std::invalid_argument);
}

TEST_CASE("backward through conv-relu-mse pipeline matches finite differences") {
  Tensor x = rand_tensor({1, 2, 6, 6}, 111, 0.5);
  Tensor k1 = rand_tensor({3, 2, 3, 3}, 112, 0.5);
  Tensor b1 = rand_tensor({3}, 113, 0.1);
  Tensor k2 = rand_tensor({2, 3, 3, 3}, 114, 0.5);
  Tensor b2 = rand_tensor({2}, 115, 0.1);
  Tensor target = rand_tensor({1, 2, 2, 2}, 116, 0.3);
  auto lf = [&](Tape* t) {
    Tensor h = relu(t, conv2d(t, x, k1, b1, 1, 1));
    Tensor y = conv2d(t, h, k2, b2, 2, 0);
    return mse(t, y, target);
  };
  CHECK(fd_max_rel_error({x, k1, b1, k2, b2}, lf) < 1e-4);
}

TEST_CASE("backward is deterministic") {
  Tensor x = rand_tensor({1, 2, 5, 5}, 121, 0.5);
  Tensor k = rand_tensor({2, 2, 3, 3}, 122, 0.5);
  Tensor b = rand_tensor({2}, 123, 0.1);
  x.set_requires_grad(true);
  k.set_requires_grad(true);
  b.set_requires_grad(true);

  auto run = [&]() {
    x.grad_buffer();
    k.grad_buffer();
    b.grad_buffer();
    x.zero_grad();
    k.zero_grad();
    b.zero_grad();
    Tape tape;
    Tensor loss = mse(&tape, relu(&tape, conv2d(&tape, x, k, b, 1, 1)),
                      Tensor::zeros({1, 2, 5, 5}));
    tape.backward(loss);
    return std::make_tuple(x.grad(), k.grad(), b.grad());
  };
  auto g1 = run();
  auto g2 = run();
  CHECK(std::get<0>(g1) == std::get<0>(g2));
  CHECK(std::get<1>(g1) == std::get<1>(g2));
  CHECK(std::get<2>(g1) == std::get<2>(g2));
}

TEST_CASE("non-finite forward values are rejected") {
  Tensor x({2}, {1.0, std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(relu(nullptr, x), NumericError);
}

TEST_CASE("adam first step magnitude is lr for any healthy gradient") {
  const double lr = 1e-4;
  for (double g : {1.0, 0.01, -5.0, 1e-3}) {
    Tensor p({1}, {0.5});
    p.set_requires_grad(true);
    std::vector<Tensor> params = {p};
    AdamState st(params, AdamConfig{lr});
    p.grad_buffer()[0] = g;
    adam_step(params, st);
    const double step = std::fabs(p.values()[0] - 0.5);
    // exact first-step closed form: lr * |g| / (|g| + eps)
    const double expect = lr * std::fabs(g) / (std::fabs(g) + 1e-8);
    CHECK(testsup::rel_err(step, expect) < 1e-12);
    CHECK(std::fabs(step - lr) <= lr * 1.1e-5);
    CHECK(st.step_count() == 1);
  }
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  Tensor p({3}, {0.1, -0.2, 0.3});
  p.set_requires_grad(true);
  std::vector<Tensor> params = {p};
  AdamState st(params, AdamConfig{0.01});
  p.grad_buffer();
  p.zero_grad();
  adam_step(params, st);
  CHECK(p.values() == std::vector<double>{0.1, -0.2, 0.3});
}

TEST_CASE("adam trajectory matches an independently scripted oracle") {
  // scripted reference: plain Adam recurrence on a scalar with g = 1
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double theta = 1.0, m = 0.0, v = 0.0;
  std::vector<double> expected;
  for (int t = 1; t <= 2; ++t) {
    const double g = 1.0;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    theta -= lr * mhat / (std::sqrt(vhat) + eps);
    expected.push_back(theta);
  }

  Tensor p({1}, {1.0});
  p.set_requires_grad(true);
  std::vector<Tensor> params = {p};
  AdamState st(params, AdamConfig{lr, b1, b2, eps});
  for (int t = 0; t < 2; ++t) {
    p.grad_buffer()[0] = 1.0;
    adam_step(params, st);
    CHECK(std::fabs(p.values()[0] - expected[t]) < 1e-12);
  }
}

TEST_CASE("adam rejects non-finite gradients and shape drift") {
  Tensor p({2}, {0.0, 0.0});
  p.set_requires_grad(true);
  std::vector<Tensor> params = {p};
  AdamState st(params, AdamConfig{0.01});
  p.grad_buffer()[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(params, st), NumericError);

  std::vector<Tensor> other = {Tensor({3})};
  other[0].set_requires_grad(true);
  other[0].grad_buffer();
  CHECK_THROWS_AS(adam_step(other, st), std::invalid_argument);
}

TEST_CASE("adam config validation") {
  std::vector<Tensor> params = {Tensor({1})};
  CHECK_THROWS_AS(AdamState(params, AdamConfig{0.0}), std::invalid_argument);
  CHECK_THROWS_AS(AdamState(params, AdamConfig{0.1, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(AdamState(params, AdamConfig{0.1, 0.9, 0.999, 0.0}), std::invalid_argument);
}
