#include <doctest.h>

#include <cmath>

#include "acvg/tensor.hpp"
#include "test_util.hpp"

using namespace acvg;
using testutil::rand_tensor;

namespace {

// Direct six-nested-loop cross-correlation; the independent reference every
// fast path is compared against.
Tensor<float> naive_conv2d(const Tensor<float>& x, const Tensor<float>& k, const Tensor<float>& b,
                           int stride, int pad) {
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  Tensor<float> out = Tensor<float>::zeros({N, O, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = b.defined() ? b.vec()[static_cast<std::size_t>(o)] : 0.0;
          for (int ci = 0; ci < Ci; ++ci)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int ih = oh * stride - pad + u;
                const int iw = ow * stride - pad + v;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += static_cast<double>(
                           x.vec()[((static_cast<std::size_t>(n) * Ci + ci) * H + ih) * W + iw]) *
                       k.vec()[((static_cast<std::size_t>(o) * Ci + ci) * kh + u) * kw + v];
              }
          out.vec()[((static_cast<std::size_t>(n) * O + o) * Ho + oh) * Wo + ow] =
              static_cast<float>(acc);
        }
  return out;
}

double dot(const Tensor<float>& a, const Tensor<float>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    acc += static_cast<double>(a.vec()[i]) * b.vec()[i];
  return acc;
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  Rng rng(1);
  Tensor<float> x = rand_tensor<float>({1, 1, 4, 4}, rng);
  Tensor<float> k = Tensor<float>::full({1, 1, 1, 1}, 1.0f);
  Tensor<float> b = Tensor<float>::zeros({1});
  Tensor<float> y = conv2d(x, k, b, 1, 0);
  CHECK(testutil::bitwise_equal(x, y));
}

TEST_CASE("conv2d: all-ones 5x5 input with 3x3 ones kernel sums to 9") {
  Tensor<float> x = Tensor<float>::full({1, 1, 5, 5}, 1.0f);
  Tensor<float> k = Tensor<float>::full({1, 1, 3, 3}, 1.0f);
  Tensor<float> y = conv2d(x, k, Tensor<float>(), 1, 0);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (float v : y.vec()) CHECK(v == doctest::Approx(9.0f));
}

TEST_CASE("conv2d matches the direct-loop reference on random shapes") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    Rng tr = rng.split(static_cast<std::uint64_t>(trial));
    const int N = 1 + tr.uniform_int(2);
    const int Ci = 1 + tr.uniform_int(4);
    const int O = 1 + tr.uniform_int(4);
    const int kh = 1 + tr.uniform_int(3);
    const int kw = 1 + tr.uniform_int(3);
    const int stride = 1 + tr.uniform_int(2);
    const int pad = tr.uniform_int(2);
    // Pick H,W so the output extent is integral.
    const int Ho = 1 + tr.uniform_int(4);
    const int Wo = 1 + tr.uniform_int(4);
    const int H = (Ho - 1) * stride + kh - 2 * pad;
    const int W = (Wo - 1) * stride + kw - 2 * pad;
    if (H < 1 || W < 1) continue;
    Tensor<float> x = rand_tensor<float>({N, Ci, H, W}, tr);
    Tensor<float> k = rand_tensor<float>({O, Ci, kh, kw}, tr);
    Tensor<float> b = rand_tensor<float>({O}, tr);
    Tensor<float> fast = conv2d(x, k, b, stride, pad);
    Tensor<float> slow = naive_conv2d(x, k, b, stride, pad);
    CHECK(testutil::max_abs_diff(fast, slow) < 1e-5);
  }
}

TEST_CASE("conv2d rejects invalid shapes and geometry") {
  Rng rng(7);
  Tensor<float> x = rand_tensor<float>({1, 3, 4, 4}, rng);
  Tensor<float> k_badc = rand_tensor<float>({2, 2, 3, 3}, rng);
  CHECK_THROWS_AS(conv2d(x, k_badc, Tensor<float>(), 1, 0), ShapeError);
  Tensor<float> k = rand_tensor<float>({2, 3, 3, 3}, rng);
  CHECK_THROWS_AS(conv2d(x, k, Tensor<float>(), 2, 0), GeometryError);  // (4-3)%2 != 0
}

TEST_CASE("conv2d_transpose: identity and stride-2 scatter") {
  Rng rng(3);
  Tensor<float> x = rand_tensor<float>({1, 1, 3, 3}, rng);
  Tensor<float> k1 = Tensor<float>::full({1, 1, 1, 1}, 1.0f);
  CHECK(testutil::bitwise_equal(conv2d_transpose(x, k1, Tensor<float>(), 1, 0), x));

  // One-hot 2x2 kernel at (0,0): inputs land on a stride-2 grid, zeros elsewhere.
  Tensor<float> in2 = rand_tensor<float>({1, 1, 2, 2}, rng);
  Tensor<float> k2 = Tensor<float>::zeros({1, 1, 2, 2});
  k2.vec()[0] = 1.0f;
  Tensor<float> y = conv2d_transpose(in2, k2, Tensor<float>(), 2, 0);
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  for (int h = 0; h < 4; ++h)
    for (int w = 0; w < 4; ++w) {
      const float v = y.vec()[static_cast<std::size_t>(h) * 4 + w];
      if (h % 2 == 0 && w % 2 == 0)
        CHECK(v == in2.vec()[static_cast<std::size_t>(h / 2) * 2 + w / 2]);
      else
        CHECK(v == 0.0f);
    }
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Rng tr = rng.split(static_cast<std::uint64_t>(trial));
    const int Ci = 1 + tr.uniform_int(3), O = 1 + tr.uniform_int(3);
    const int stride = 1 + tr.uniform_int(2), pad = tr.uniform_int(2);
    const int kh = 2 + tr.uniform_int(2);
    const int Ho = 2 + tr.uniform_int(3), Wo = 2 + tr.uniform_int(3);
    const int H = (Ho - 1) * stride + kh - 2 * pad;
    const int W = (Wo - 1) * stride + kh - 2 * pad;
    if (H < 1 || W < 1) continue;
    Tensor<float> x = rand_tensor<float>({1, Ci, H, W}, tr);
    Tensor<float> k = rand_tensor<float>({O, Ci, kh, kh}, tr);
    Tensor<float> y = rand_tensor<float>({1, O, Ho, Wo}, tr);
    const double lhs = dot(conv2d(x, k, Tensor<float>(), stride, pad), y);
    const double rhs = dot(x, conv2d_transpose(y, k, Tensor<float>(), stride, pad));
    CHECK(std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1.0}) < 1e-5);
  }
}

TEST_CASE("max_pool2d: window maximum, tie-break and loop reference") {
  Tensor<float> x = Tensor<float>::from({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(max_pool2d(x).vec()[0] == 4.0f);

  // Constant input: gradient concentrates on the first (row-major) element.
  Tensor<float> c = Tensor<float>::full({1, 1, 2, 2}, 0.5f);
  c.set_requires_grad(true);
  backward(sum(max_pool2d(c)));
  CHECK(c.grad() == std::vector<float>{1, 0, 0, 0});

  Rng rng(5);
  Tensor<float> r = rand_tensor<float>({1, 2, 8, 8}, rng);
  Tensor<float> fast = max_pool2d(r);
  for (int ch = 0; ch < 2; ++ch)
    for (int h = 0; h < 4; ++h)
      for (int w = 0; w < 4; ++w) {
        float best = -1e9f;
        for (int dh = 0; dh < 2; ++dh)
          for (int dw = 0; dw < 2; ++dw)
            best = std::max(best, r.vec()[(static_cast<std::size_t>(ch) * 8 + 2 * h + dh) * 8 +
                                          2 * w + dw]);
        CHECK(fast.vec()[(static_cast<std::size_t>(ch) * 4 + h) * 4 + w] == best);
      }

  CHECK_THROWS_AS(max_pool2d(Tensor<float>::zeros({1, 1, 3, 4})), GeometryError);
}

TEST_CASE("upsample_nearest2 replicates pixels and inverts through pooling") {
  Tensor<float> x = Tensor<float>::from({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor<float> y = upsample_nearest2(x);
  CHECK(y.vec() == std::vector<float>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});

  Rng rng(9);
  Tensor<float> r = rand_tensor<float>({2, 3, 4, 4}, rng);
  CHECK(testutil::bitwise_equal(max_pool2d(upsample_nearest2(r)), r));
}

TEST_CASE("dense with identity weight and zero bias is the identity") {
  Rng rng(13);
  Tensor<float> x = rand_tensor<float>({3, 4}, rng);
  Tensor<float> w = Tensor<float>::zeros({4, 4});
  for (int i = 0; i < 4; ++i) w.vec()[static_cast<std::size_t>(i) * 4 + i] = 1.0f;
  Tensor<float> y = dense(x, w, Tensor<float>::zeros({4}));
  CHECK(testutil::max_abs_diff(x, y) == 0.0);
}

TEST_CASE("activation fixed points") {
  Tensor<float> z = Tensor<float>::scalar(0.0f);
  CHECK(sigmoid(z).item() == 0.5f);
  CHECK(tanh_op(z).item() == 0.0f);
  CHECK(leaky_relu(Tensor<float>::scalar(-2.0f), 0.2f).item() == doctest::Approx(-0.4f));
}

TEST_CASE("concat/narrow round trip") {
  Rng rng(21);
  for (int axis = 0; axis < 3; ++axis) {
    Tensor<float> a = rand_tensor<float>({2, 3, 4}, rng);
    Tensor<float> b = rand_tensor<float>({2, 3, 4}, rng);
    Tensor<float> cat = concat<float>({a, b}, axis);
    CHECK(cat.dim(axis) == 2 * a.dim(axis));
    CHECK(testutil::bitwise_equal(narrow(cat, axis, 0, a.dim(axis)), a));
    CHECK(testutil::bitwise_equal(narrow(cat, axis, a.dim(axis), b.dim(axis)), b));
  }
  Tensor<float> a = rand_tensor<float>({2, 3}, rng);
  Tensor<float> bad = rand_tensor<float>({3, 3}, rng);
  CHECK_THROWS_AS(concat<float>({a, bad}, 1), ShapeError);
}

TEST_CASE("tile_actions produces constant planes") {
  Tensor<float> a = Tensor<float>::from({1, 2}, {1.0f, -1.0f});
  Tensor<float> planes = tile_actions(a, 3, 3);
  CHECK(planes.shape() == Shape{1, 2, 3, 3});
  for (int i = 0; i < 9; ++i) {
    CHECK(planes.vec()[static_cast<std::size_t>(i)] == 1.0f);
    CHECK(planes.vec()[static_cast<std::size_t>(9 + i)] == -1.0f);
  }
}

TEST_CASE("spatial differences match direct indexing") {
  Rng rng(33);
  Tensor<float> x = rand_tensor<float>({1, 2, 4, 5}, rng);
  Tensor<float> dh = spatial_diff_h(x);
  Tensor<float> dw = spatial_diff_w(x);
  CHECK(dh.shape() == Shape{1, 2, 3, 5});
  CHECK(dw.shape() == Shape{1, 2, 4, 4});
  auto at = [&](int c, int h, int w) {
    return x.vec()[(static_cast<std::size_t>(c) * 4 + h) * 5 + w];
  };
  CHECK(dh.vec()[0] == at(0, 1, 0) - at(0, 0, 0));
  CHECK(dw.vec()[0] == at(0, 0, 1) - at(0, 0, 0));
}
