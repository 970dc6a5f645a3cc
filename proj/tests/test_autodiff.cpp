#include <doctest.h>

#include <cmath>

#include "acvg/gradcheck.hpp"
#include "acvg/param_store.hpp"
#include "acvg/tensor.hpp"
#include "test_util.hpp"

using namespace acvg;
using testutil::rand_tensor;

TEST_CASE("backward: sum gives all-ones gradient") {
  Rng rng(1);
  Tensor<float> x = rand_tensor<float>({2, 3}, rng).set_requires_grad(true);
  backward(sum(x));
  for (float g : x.grad()) CHECK(g == 1.0f);
}

TEST_CASE("backward: sum of squares gives 2x") {
  Rng rng(2);
  Tensor<float> x = rand_tensor<float>({2, 3}, rng).set_requires_grad(true);
  backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0f * x.vec()[i]));
}

TEST_CASE("backward: gradients accumulate over fan-out") {
  Tensor<float> x = Tensor<float>::scalar(3.0f).set_requires_grad(true);
  Tensor<float> y = add(x, x);  // dy/dx = 2
  backward(sum(y));
  CHECK(x.grad()[0] == 2.0f);
}

TEST_CASE("backward misuse raises GraphError") {
  Tensor<float> detached = Tensor<float>::scalar(1.0f);
  CHECK_THROWS_AS(backward(detached), GraphError);

  Tensor<float> x = Tensor<float>::scalar(2.0f).set_requires_grad(true);
  Tensor<float> loss = sum(mul(x, x));
  backward(loss);
  CHECK_THROWS_AS(backward(loss), GraphError);

  Rng rng(4);
  Tensor<float> vec = rand_tensor<float>({3}, rng).set_requires_grad(true);
  CHECK_THROWS_AS(backward(mul(vec, vec)), GraphError);  // non-scalar
}

TEST_CASE("no-grad mode skips graph recording") {
  Tensor<float> x = Tensor<float>::scalar(2.0f).set_requires_grad(true);
  NoGradGuard ng;
  Tensor<float> y = mul(x, x);
  CHECK_FALSE(static_cast<bool>(y.impl()->backward_fn));
}

TEST_CASE("grad_check on a linear map is exact to roundoff") {
  Rng rng(5);
  Tensor<double> coeff = rand_tensor<double>({4, 4}, rng);
  auto f = [&coeff](const std::vector<Tensor<double>>& in) { return sum(mul(in[0], coeff)); };
  const double err = grad_check(f, {rand_tensor<double>({4, 4}, rng)});
  CHECK(err < 1e-10);
}

TEST_CASE("gradient suite: every kernel passes at 1e-4") {
  for (const auto& r : run_all_grad_checks(0)) {
    INFO(r.op << " max_rel_err=" << r.max_rel_err);
    CHECK(r.max_rel_err < kGradCheckTolerance);
  }
}

TEST_CASE("gradient suite holds across 10 seeds for the core kernels") {
  const std::vector<std::string> ops = {"conv2d", "conv2d_transpose", "max_pool2d",
                                        "upsample_nearest2", "dense", "sigmoid", "tanh",
                                        "leaky_relu", "lstm_step", "recon_image_loss",
                                        "action_loss"};
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    for (const auto& op : ops) {
      const auto r = run_grad_check(op, seed);
      INFO(op << " seed=" << seed << " err=" << r.max_rel_err);
      CHECK(r.pass);
    }
}

TEST_CASE("corrupted backward fixture is caught") {
  const auto r = run_grad_check("_corrupt_fixture", 0);
  CHECK_FALSE(r.pass);
}

TEST_CASE("adam: zero gradients from a fresh state leave parameters bitwise unchanged") {
  Rng rng(6);
  ParamStore<float> store;
  store.add("w", rand_tensor<float>({3, 3}, rng));
  store.add("b", rand_tensor<float>({3}, rng));
  const auto before = store.byte_image();
  for (auto& [name, e] : store.entries()) e.value.grad_ref();  // zero-filled
  adam_step(store, 1e-4);
  CHECK(store.byte_image() == before);
}

TEST_CASE("adam: first-step update has the closed form") {
  ParamStore<double> store;  // 64-bit so the update itself is checked, not float rounding
  store.add("w", Tensor<double>::scalar(1.0));
  store.get("w").grad_ref()[0] = 0.5;
  adam_step(store, 1e-4);
  // -lr * m_hat / (sqrt(v_hat) + eps) = -1e-4 * 0.5/(0.5 + 1e-8)
  const double update = store.get("w").item() - 1.0;
  CHECK(std::abs(update - (-1e-4 * (0.5 / (0.5 + 1e-8)))) < 1e-12);
  CHECK(std::abs(update + 1e-4) < 1e-9);
}

TEST_CASE("adam: missing gradient raises naming the parameter") {
  ParamStore<float> store;
  store.add("gen.w", Tensor<float>::scalar(1.0f));
  try {
    adam_step(store, 1e-3);
    FAIL("expected GradError");
  } catch (const GradError& e) {
    CHECK(std::string(e.what()).find("gen.w") != std::string::npos);
  }
}

TEST_CASE("adam: 100 steps on a quadratic bowl descend monotonically after warm-up") {
  // f(w) = sum w^2, minimum 0; the closed-form optimum is the origin.
  ParamStore<float> store;
  Rng rng(7);
  store.add("w", rand_tensor<float>({4}, rng, 0.5, 1.0));
  auto loss_of = [&] {
    double acc = 0.0;
    for (float v : store.get("w").vec()) acc += static_cast<double>(v) * v;
    return acc;
  };
  double prev = loss_of();
  for (int step = 1; step <= 100; ++step) {
    auto& g = store.get("w").grad_ref();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0f * store.get("w").vec()[i];
    adam_step(store, 1e-2);
    const double cur = loss_of();
    if (step > 5) CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("parameter updates are deterministic given a seed") {
  auto run = [] {
    Rng rng(11);
    ParamStore<float> store;
    store.add("w", rand_tensor<float>({8}, rng));
    for (int step = 0; step < 20; ++step) {
      auto& g = store.get("w").grad_ref();
      Rng srng = rng.split(static_cast<std::uint64_t>(step));
      for (auto& v : g) v = static_cast<float>(srng.uniform(-1, 1));
      adam_step(store, 1e-3);
    }
    return store.byte_image();
  };
  CHECK(run() == run());
}
