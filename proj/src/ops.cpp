#include <algorithm>
#include <cmath>
#include <cstdint>

#include "acvg/rng.hpp"
#include "acvg/tensor.hpp"

namespace acvg {
namespace {

// C(M x N) += A(M x K) * B(K x N)
template <typename T>
void gemm_nn(int M, int K, int N, const T* A, const T* B, T* C) {
  for (int i = 0; i < M; ++i) {
    T* c = C + static_cast<std::size_t>(i) * N;
    const T* a = A + static_cast<std::size_t>(i) * K;
    for (int p = 0; p < K; ++p) {
      const T av = a[p];
      if (av == T(0)) continue;
      const T* b = B + static_cast<std::size_t>(p) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C(M x N) += A(K x M)^T * B(K x N)
template <typename T>
void gemm_tn(int M, int K, int N, const T* A, const T* B, T* C) {
  for (int p = 0; p < K; ++p) {
    const T* a = A + static_cast<std::size_t>(p) * M;
    const T* b = B + static_cast<std::size_t>(p) * N;
    for (int i = 0; i < M; ++i) {
      const T av = a[i];
      if (av == T(0)) continue;
      T* c = C + static_cast<std::size_t>(i) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C(M x N) += A(M x K) * B(N x K)^T
template <typename T>
void gemm_nt(int M, int K, int N, const T* A, const T* B, T* C) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<std::size_t>(i) * K;
    T* c = C + static_cast<std::size_t>(i) * N;
    for (int j = 0; j < N; ++j) {
      const T* b = B + static_cast<std::size_t>(j) * K;
      T acc = T(0);
      for (int p = 0; p < K; ++p) acc += a[p] * b[p];
      c[j] += acc;
    }
  }
}

// Patch matrix layout: rows indexed by (c, ku, kv), columns by (oh, ow).
template <typename T>
void im2col(const T* img, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
            int Wo, T* cols) {
  const int cols_w = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    const T* src = img + static_cast<std::size_t>(c) * H * W;
    for (int ku = 0; ku < kh; ++ku) {
      for (int kv = 0; kv < kw; ++kv) {
        T* row = cols + static_cast<std::size_t>((c * kh + ku) * kw + kv) * cols_w;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * stride - pad + ku;
          T* out = row + oh * Wo;
          if (ih < 0 || ih >= H) {
            std::fill(out, out + Wo, T(0));
            continue;
          }
          const T* in = src + static_cast<std::size_t>(ih) * W;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * stride - pad + kv;
            out[ow] = (iw >= 0 && iw < W) ? in[iw] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
                int Wo, T* img) {
  const int cols_w = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    T* dst = img + static_cast<std::size_t>(c) * H * W;
    for (int ku = 0; ku < kh; ++ku) {
      for (int kv = 0; kv < kw; ++kv) {
        const T* row = cols + static_cast<std::size_t>((c * kh + ku) * kw + kv) * cols_w;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * stride - pad + ku;
          if (ih < 0 || ih >= H) continue;
          T* out = dst + static_cast<std::size_t>(ih) * W;
          const T* in = row + oh * Wo;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * stride - pad + kv;
            if (iw >= 0 && iw < W) out[iw] += in[ow];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> make_node(Shape shape, std::vector<T> data, std::initializer_list<Tensor<T>> inputs,
                    std::function<void(TensorImpl<T>&)> fn) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  if (grad_enabled()) {
    bool track = false;
    for (const auto& t : inputs)
      if (t.defined() && t.impl()->tracked()) track = true;
    if (track) {
      impl->backward_fn = std::move(fn);
      for (const auto& t : inputs)
        if (t.defined() && t.impl()->tracked()) impl->parents.push_back(t.impl());
    }
  }
  return Tensor<T>(impl);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
}

template <typename T>
void require_rank(const Tensor<T>& t, int rank, const char* op) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  auto ai = a.impl(), bi = b.impl();
  return make_node<T>(a.shape(), std::move(out), {a, b}, [ai, bi](TensorImpl<T>& o) {
    if (ai->tracked()) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i];
    }
    if (bi->tracked()) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
  auto ai = a.impl(), bi = b.impl();
  return make_node<T>(a.shape(), std::move(out), {a, b}, [ai, bi](TensorImpl<T>& o) {
    if (ai->tracked()) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i];
    }
    if (bi->tracked()) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] -= o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  const T* pa = a.data();
  const T* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  auto ai = a.impl(), bi = b.impl();
  return make_node<T>(a.shape(), std::move(out), {a, b}, [ai, bi](TensorImpl<T>& o) {
    if (ai->tracked()) {
      ai->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i] * bi->data[i];
    }
    if (bi->tracked()) {
      bi->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] += o.grad[i] * ai->data[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> out(a.numel());
  const T* pa = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * s;
  auto ai = a.impl();
  return make_node<T>(a.shape(), std::move(out), {a}, [ai, s](TensorImpl<T>& o) {
    if (!ai->tracked()) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i] * s;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.numel());
  const T* pa = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + s;
  auto ai = a.impl();
  return make_node<T>(a.shape(), std::move(out), {a}, [ai](TensorImpl<T>& o) {
    if (!ai->tracked()) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  std::vector<T> out(static_cast<std::size_t>(n) * m, T(0));
  gemm_nn(n, k, m, a.data(), b.data(), out.data());
  auto ai = a.impl(), bi = b.impl();
  return make_node<T>({n, m}, std::move(out), {a, b}, [ai, bi, n, k, m](TensorImpl<T>& o) {
    if (ai->tracked()) {
      ai->ensure_grad();
      gemm_nt(n, m, k, o.grad.data(), bi->data.data(), ai->grad.data());
    }
    if (bi->tracked()) {
      bi->ensure_grad();
      gemm_tn(k, n, m, ai->data.data(), o.grad.data(), bi->grad.data());
    }
  });
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_rank(x, 2, "dense");
  require_rank(w, 2, "dense");
  if (x.dim(1) != w.dim(0))
    throw ShapeError("dense: input features " + shape_str(x.shape()) + " do not match weight " +
                     shape_str(w.shape()));
  const int n = x.dim(0), f = x.dim(1), g = w.dim(1);
  if (b.defined() && (b.rank() != 1 || b.dim(0) != g))
    throw ShapeError("dense: bias " + shape_str(b.shape()) + " does not match weight " +
                     shape_str(w.shape()));
  std::vector<T> out(static_cast<std::size_t>(n) * g, T(0));
  if (b.defined()) {
    const T* pb = b.data();
    for (int i = 0; i < n; ++i)
      std::copy(pb, pb + g, out.data() + static_cast<std::size_t>(i) * g);
  }
  gemm_nn(n, f, g, x.data(), w.data(), out.data());
  auto xi = x.impl(), wi = w.impl(), bi = b.defined() ? b.impl() : nullptr;
  return make_node<T>({n, g}, std::move(out), {x, w, b}, [xi, wi, bi, n, f, g](TensorImpl<T>& o) {
    if (xi->tracked()) {
      xi->ensure_grad();
      gemm_nt(n, g, f, o.grad.data(), wi->data.data(), xi->grad.data());
    }
    if (wi->tracked()) {
      wi->ensure_grad();
      gemm_tn(f, n, g, xi->data.data(), o.grad.data(), wi->grad.data());
    }
    if (bi && bi->tracked()) {
      bi->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < g; ++j) bi->grad[j] += o.grad[static_cast<std::size_t>(i) * g + j];
    }
  });
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int stride, int padding) {
  require_rank(input, 4, "conv2d");
  require_rank(kernel, 4, "conv2d");
  if (input.dim(1) != kernel.dim(1))
    throw ShapeError("conv2d: input channels " + shape_str(input.shape()) +
                     " do not match kernel " + shape_str(kernel.shape()));
  if (stride < 1 || padding < 0) throw GeometryError("conv2d: stride must be >= 1 and padding >= 0");
  const int N = input.dim(0), Ci = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int O = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != O))
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " must have extent " +
                     std::to_string(O));
  const int num_h = H + 2 * padding - kh;
  const int num_w = W + 2 * padding - kw;
  if (num_h < 0 || num_w < 0 || num_h % stride != 0 || num_w % stride != 0)
    throw GeometryError("conv2d: non-integral output extent for input " + shape_str(input.shape()) +
                        ", kernel " + shape_str(kernel.shape()) + ", stride " +
                        std::to_string(stride) + ", padding " + std::to_string(padding));
  const int Ho = num_h / stride + 1, Wo = num_w / stride + 1;
  const int R = Ci * kh * kw;
  const int planar = Ho * Wo;

  std::vector<T> out(static_cast<std::size_t>(N) * O * planar, T(0));
  std::vector<T> cols(static_cast<std::size_t>(R) * planar);
  if (bias.defined()) {
    const T* pb = bias.data();
    for (int n = 0; n < N; ++n)
      for (int o = 0; o < O; ++o)
        std::fill_n(out.data() + (static_cast<std::size_t>(n) * O + o) * planar, planar, pb[o]);
  }
  for (int n = 0; n < N; ++n) {
    im2col(input.data() + static_cast<std::size_t>(n) * Ci * H * W, Ci, H, W, kh, kw, stride,
           padding, Ho, Wo, cols.data());
    gemm_nn(O, R, planar, kernel.data(), cols.data(),
            out.data() + static_cast<std::size_t>(n) * O * planar);
  }

  auto xi = input.impl(), ki = kernel.impl(), bi = bias.defined() ? bias.impl() : nullptr;
  return make_node<T>(
      {N, O, Ho, Wo}, std::move(out), {input, kernel, bias},
      [xi, ki, bi, N, Ci, H, W, O, kh, kw, stride, padding, Ho, Wo, R, planar](TensorImpl<T>& o) {
        std::vector<T> cols(static_cast<std::size_t>(R) * planar);
        std::vector<T> dcols;
        const bool need_dx = xi->tracked();
        const bool need_dk = ki->tracked();
        if (need_dx) {
          xi->ensure_grad();
          dcols.resize(cols.size());
        }
        if (need_dk) ki->ensure_grad();
        for (int n = 0; n < N; ++n) {
          const T* g = o.grad.data() + static_cast<std::size_t>(n) * O * planar;
          if (need_dk) {
            im2col(xi->data.data() + static_cast<std::size_t>(n) * Ci * H * W, Ci, H, W, kh, kw,
                   stride, padding, Ho, Wo, cols.data());
            gemm_nt(O, planar, R, g, cols.data(), ki->grad.data());
          }
          if (need_dx) {
            std::fill(dcols.begin(), dcols.end(), T(0));
            gemm_tn(R, O, planar, ki->data.data(), g, dcols.data());
            col2im_add(dcols.data(), Ci, H, W, kh, kw, stride, padding, Ho, Wo,
                       xi->grad.data() + static_cast<std::size_t>(n) * Ci * H * W);
          }
        }
        if (bi && bi->tracked()) {
          bi->ensure_grad();
          for (int n = 0; n < N; ++n)
            for (int c = 0; c < O; ++c) {
              const T* g = o.grad.data() + (static_cast<std::size_t>(n) * O + c) * planar;
              T acc = T(0);
              for (int i = 0; i < planar; ++i) acc += g[i];
              bi->grad[c] += acc;
            }
        }
      });
}

template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                           int stride, int padding) {
  require_rank(input, 4, "conv2d_transpose");
  require_rank(kernel, 4, "conv2d_transpose");
  if (input.dim(1) != kernel.dim(0))
    throw ShapeError("conv2d_transpose: input channels " + shape_str(input.shape()) +
                     " do not match kernel " + shape_str(kernel.shape()));
  if (stride < 1 || padding < 0)
    throw GeometryError("conv2d_transpose: stride must be >= 1 and padding >= 0");
  const int N = input.dim(0), O = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int I = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != I))
    throw ShapeError("conv2d_transpose: bias " + shape_str(bias.shape()) + " must have extent " +
                     std::to_string(I));
  const int Ho = (H - 1) * stride + kh - 2 * padding;
  const int Wo = (W - 1) * stride + kw - 2 * padding;
  if (Ho < 1 || Wo < 1)
    throw GeometryError("conv2d_transpose: degenerate output extent for input " +
                        shape_str(input.shape()) + ", kernel " + shape_str(kernel.shape()));
  const int R = I * kh * kw;
  const int in_planar = H * W;
  const int out_planar = Ho * Wo;

  std::vector<T> out(static_cast<std::size_t>(N) * I * out_planar, T(0));
  std::vector<T> cols(static_cast<std::size_t>(R) * in_planar);
  for (int n = 0; n < N; ++n) {
    std::fill(cols.begin(), cols.end(), T(0));
    gemm_tn(R, O, in_planar, kernel.data(),
            input.data() + static_cast<std::size_t>(n) * O * in_planar, cols.data());
    col2im_add(cols.data(), I, Ho, Wo, kh, kw, stride, padding, H, W,
               out.data() + static_cast<std::size_t>(n) * I * out_planar);
  }
  if (bias.defined()) {
    const T* pb = bias.data();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < I; ++c) {
        T* dst = out.data() + (static_cast<std::size_t>(n) * I + c) * out_planar;
        for (int i = 0; i < out_planar; ++i) dst[i] += pb[c];
      }
  }

  auto xi = input.impl(), ki = kernel.impl(), bi = bias.defined() ? bias.impl() : nullptr;
  return make_node<T>(
      {N, I, Ho, Wo}, std::move(out), {input, kernel, bias},
      [xi, ki, bi, N, O, H, W, I, kh, kw, stride, padding, Ho, Wo, R, in_planar,
       out_planar](TensorImpl<T>& o) {
        std::vector<T> gcols(static_cast<std::size_t>(R) * in_planar);
        const bool need_dx = xi->tracked();
        const bool need_dk = ki->tracked();
        if (need_dx) xi->ensure_grad();
        if (need_dk) ki->ensure_grad();
        for (int n = 0; n < N; ++n) {
          const T* g = o.grad.data() + static_cast<std::size_t>(n) * I * out_planar;
          if (need_dx || need_dk)
            im2col(g, I, Ho, Wo, kh, kw, stride, padding, H, W, gcols.data());
          if (need_dk)
            gemm_nt(O, in_planar, R, xi->data.data() + static_cast<std::size_t>(n) * O * in_planar,
                    gcols.data(), ki->grad.data());
          if (need_dx)
            gemm_nn(O, R, in_planar, ki->data.data(), gcols.data(),
                    xi->grad.data() + static_cast<std::size_t>(n) * O * in_planar);
        }
        if (bi && bi->tracked()) {
          bi->ensure_grad();
          for (int n = 0; n < N; ++n)
            for (int c = 0; c < I; ++c) {
              const T* g = o.grad.data() + (static_cast<std::size_t>(n) * I + c) * out_planar;
              T acc = T(0);
              for (int i = 0; i < out_planar; ++i) acc += g[i];
              bi->grad[c] += acc;
            }
        }
      });
}

// ---------------------------------------------------------------------------
// Pooling / resampling
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input) {
  require_rank(input, 4, "max_pool2d");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  if (H % 2 != 0 || W % 2 != 0)
    throw GeometryError("max_pool2d: spatial extents of " + shape_str(input.shape()) +
                        " are not divisible by 2");
  const int Ho = H / 2, Wo = W / 2;
  std::vector<T> out(static_cast<std::size_t>(N) * C * Ho * Wo);
  auto argmax = std::make_shared<std::vector<std::int32_t>>(out.size());
  const T* src = input.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const T* plane = src + static_cast<std::size_t>(nc) * H * W;
    T* dst = out.data() + static_cast<std::size_t>(nc) * Ho * Wo;
    std::int32_t* am = argmax->data() + static_cast<std::size_t>(nc) * Ho * Wo;
    for (int oh = 0; oh < Ho; ++oh)
      for (int ow = 0; ow < Wo; ++ow) {
        // Row-major scan; strict comparison keeps the first maximal element.
        int best = (2 * oh) * W + 2 * ow;
        T bv = plane[best];
        const int cand[3] = {(2 * oh) * W + 2 * ow + 1, (2 * oh + 1) * W + 2 * ow,
                             (2 * oh + 1) * W + 2 * ow + 1};
        for (int k = 0; k < 3; ++k)
          if (plane[cand[k]] > bv) {
            best = cand[k];
            bv = plane[best];
          }
        dst[oh * Wo + ow] = bv;
        am[oh * Wo + ow] = best;
      }
  }
  auto xi = input.impl();
  return make_node<T>({N, C, Ho, Wo}, std::move(out), {input},
                      [xi, argmax, N, C, H, W, Ho, Wo](TensorImpl<T>& o) {
                        if (!xi->tracked()) return;
                        xi->ensure_grad();
                        for (int nc = 0; nc < N * C; ++nc) {
                          T* gx = xi->grad.data() + static_cast<std::size_t>(nc) * H * W;
                          const T* g = o.grad.data() + static_cast<std::size_t>(nc) * Ho * Wo;
                          const std::int32_t* am =
                              argmax->data() + static_cast<std::size_t>(nc) * Ho * Wo;
                          for (int i = 0; i < Ho * Wo; ++i) gx[am[i]] += g[i];
                        }
                      });
}

template <typename T>
Tensor<T> upsample_nearest2(const Tensor<T>& input) {
  require_rank(input, 4, "upsample_nearest2");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int Ho = H * 2, Wo = W * 2;
  std::vector<T> out(static_cast<std::size_t>(N) * C * Ho * Wo);
  const T* src = input.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const T* plane = src + static_cast<std::size_t>(nc) * H * W;
    T* dst = out.data() + static_cast<std::size_t>(nc) * Ho * Wo;
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w) {
        const T v = plane[h * W + w];
        T* d = dst + (2 * h) * Wo + 2 * w;
        d[0] = v;
        d[1] = v;
        d[Wo] = v;
        d[Wo + 1] = v;
      }
  }
  auto xi = input.impl();
  return make_node<T>({N, C, Ho, Wo}, std::move(out), {input},
                      [xi, N, C, H, W, Ho, Wo](TensorImpl<T>& o) {
                        if (!xi->tracked()) return;
                        xi->ensure_grad();
                        for (int nc = 0; nc < N * C; ++nc) {
                          T* gx = xi->grad.data() + static_cast<std::size_t>(nc) * H * W;
                          const T* g = o.grad.data() + static_cast<std::size_t>(nc) * Ho * Wo;
                          for (int h = 0; h < H; ++h)
                            for (int w = 0; w < W; ++w) {
                              const T* s = g + (2 * h) * Wo + 2 * w;
                              gx[h * W + w] += s[0] + s[1] + s[Wo] + s[Wo + 1];
                            }
                        }
                      });
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = px[i];
    out[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                       : std::exp(v) / (T(1) + std::exp(v));
  }
  auto xi = x.impl();
  auto saved = std::make_shared<std::vector<T>>(out);
  return make_node<T>(x.shape(), std::move(out), {x}, [xi, saved](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    const auto& y = *saved;
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      xi->grad[i] += o.grad[i] * y[i] * (T(1) - y[i]);
  });
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(px[i]);
  auto xi = x.impl();
  auto saved = std::make_shared<std::vector<T>>(out);
  return make_node<T>(x.shape(), std::move(out), {x}, [xi, saved](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    const auto& y = *saved;
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      xi->grad[i] += o.grad[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  std::vector<T> out(x.numel());
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] > T(0) ? px[i] : slope * px[i];
  auto xi = x.impl();
  return make_node<T>(x.shape(), std::move(out), {x}, [xi, slope](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      xi->grad[i] += o.grad[i] * (xi->data[i] > T(0) ? T(1) : slope);
  });
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(s0.size()))
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " + shape_str(s0));
  Shape out_shape = s0;
  int total_axis = 0;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank())
      throw ShapeError("concat: rank mismatch between " + shape_str(s0) + " and " +
                       shape_str(p.shape()));
    for (int d = 0; d < p.rank(); ++d)
      if (d != axis && p.dim(d) != s0[static_cast<std::size_t>(d)])
        throw ShapeError("concat: non-axis extents differ, " + shape_str(s0) + " vs " +
                         shape_str(p.shape()));
    total_axis += p.dim(axis);
  }
  out_shape[static_cast<std::size_t>(axis)] = total_axis;

  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(s0[d]);
  for (int d = axis + 1; d < static_cast<int>(s0.size()); ++d) inner *= static_cast<std::size_t>(s0[d]);

  std::vector<T> out(shape_numel(out_shape));
  std::size_t off = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t block = static_cast<std::size_t>(p.dim(axis)) * inner;
    const T* src = p.data();
    for (std::size_t of = 0; of < outer; ++of)
      std::copy(src + of * block, src + (of + 1) * block,
                out.data() + of * (static_cast<std::size_t>(total_axis) * inner) + off);
    off += block;
  }

  std::vector<std::shared_ptr<TensorImpl<T>>> impls;
  std::vector<int> axis_extents;
  for (const auto& p : parts) {
    impls.push_back(p.impl());
    axis_extents.push_back(p.dim(axis));
  }
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = out_shape;
  impl->data = std::move(out);
  bool track = false;
  if (grad_enabled())
    for (const auto& pi : impls)
      if (pi->tracked()) track = true;
  if (track) {
    for (const auto& pi : impls)
      if (pi->tracked()) impl->parents.push_back(pi);
    const std::size_t row = static_cast<std::size_t>(total_axis) * inner;
    impl->backward_fn = [impls, axis_extents, outer, inner, row](TensorImpl<T>& o) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < impls.size(); ++k) {
        const std::size_t block = static_cast<std::size_t>(axis_extents[k]) * inner;
        if (impls[k]->tracked()) {
          impls[k]->ensure_grad();
          for (std::size_t of = 0; of < outer; ++of) {
            const T* g = o.grad.data() + of * row + off;
            T* dst = impls[k]->grad.data() + of * block;
            for (std::size_t i = 0; i < block; ++i) dst[i] += g[i];
          }
        }
        off += block;
      }
    };
  }
  return Tensor<T>(impl);
}

template <typename T>
Tensor<T> narrow(const Tensor<T>& x, int axis, int start, int len) {
  const Shape& s = x.shape();
  if (axis < 0 || axis >= x.rank())
    throw ShapeError("narrow: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  if (start < 0 || len <= 0 || start + len > s[static_cast<std::size_t>(axis)])
    throw ShapeError("narrow: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(s[d]);
  for (int d = axis + 1; d < x.rank(); ++d) inner *= static_cast<std::size_t>(s[d]);
  const std::size_t row = static_cast<std::size_t>(s[static_cast<std::size_t>(axis)]) * inner;
  const std::size_t block = static_cast<std::size_t>(len) * inner;
  Shape out_shape = s;
  out_shape[static_cast<std::size_t>(axis)] = len;
  std::vector<T> out(outer * block);
  const T* src = x.data();
  for (std::size_t of = 0; of < outer; ++of)
    std::copy(src + of * row + static_cast<std::size_t>(start) * inner,
              src + of * row + static_cast<std::size_t>(start) * inner + block,
              out.data() + of * block);
  auto xi = x.impl();
  return make_node<T>(out_shape, std::move(out), {x},
                      [xi, outer, inner, row, block, start](TensorImpl<T>& o) {
                        if (!xi->tracked()) return;
                        xi->ensure_grad();
                        for (std::size_t of = 0; of < outer; ++of) {
                          const T* g = o.grad.data() + of * block;
                          T* dst = xi->grad.data() + of * row + static_cast<std::size_t>(start) * inner;
                          for (std::size_t i = 0; i < block; ++i) dst[i] += g[i];
                        }
                      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& s) {
  if (shape_numel(s) != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(s));
  std::vector<T> out(x.vec());
  auto xi = x.impl();
  return make_node<T>(s, std::move(out), {x}, [xi](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i];
  });
}

template <typename T>
Tensor<T> flatten2(const Tensor<T>& x) {
  const int n = x.dim(0);
  return reshape(x, {n, static_cast<int>(x.numel()) / n});
}

// ---------------------------------------------------------------------------
// Reductions and pointwise math
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (const T v : x.vec()) acc += v;
  auto xi = x.impl();
  return make_node<T>({1}, {acc}, {x}, [xi](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    const T g = o.grad[0];
    for (auto& v : xi->grad) v += g;
  });
}

template <typename T>
Tensor<T> abs_op(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(px[i]);
  auto xi = x.impl();
  return make_node<T>(x.shape(), std::move(out), {x}, [xi](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const T v = xi->data[i];
      xi->grad[i] += o.grad[i] * (v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)));
    }
  });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = px[i] * px[i];
  auto xi = x.impl();
  return make_node<T>(x.shape(), std::move(out), {x}, [xi](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      xi->grad[i] += o.grad[i] * T(2) * xi->data[i];
  });
}

template <typename T>
Tensor<T> log_op(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(px[i] > T(0))) throw NumericError("log of non-positive value");
    out[i] = std::log(px[i]);
  }
  auto xi = x.impl();
  return make_node<T>(x.shape(), std::move(out), {x}, [xi](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i] / xi->data[i];
  });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  std::vector<T> out(x.numel());
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(px[i], lo), hi);
  auto xi = x.impl();
  return make_node<T>(x.shape(), std::move(out), {x}, [xi, lo, hi](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const T v = xi->data[i];
      if (v > lo && v < hi) xi->grad[i] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> spatial_diff_h(const Tensor<T>& x) {
  require_rank(x, 4, "spatial_diff_h");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H < 2) throw ShapeError("spatial_diff_h: H must be >= 2 in " + shape_str(x.shape()));
  std::vector<T> out(static_cast<std::size_t>(N) * C * (H - 1) * W);
  const T* src = x.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const T* p = src + static_cast<std::size_t>(nc) * H * W;
    T* d = out.data() + static_cast<std::size_t>(nc) * (H - 1) * W;
    for (int h = 0; h + 1 < H; ++h)
      for (int w = 0; w < W; ++w) d[h * W + w] = p[(h + 1) * W + w] - p[h * W + w];
  }
  auto xi = x.impl();
  return make_node<T>({N, C, H - 1, W}, std::move(out), {x}, [xi, N, C, H, W](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (int nc = 0; nc < N * C; ++nc) {
      T* gx = xi->grad.data() + static_cast<std::size_t>(nc) * H * W;
      const T* g = o.grad.data() + static_cast<std::size_t>(nc) * (H - 1) * W;
      for (int h = 0; h + 1 < H; ++h)
        for (int w = 0; w < W; ++w) {
          gx[(h + 1) * W + w] += g[h * W + w];
          gx[h * W + w] -= g[h * W + w];
        }
    }
  });
}

template <typename T>
Tensor<T> spatial_diff_w(const Tensor<T>& x) {
  require_rank(x, 4, "spatial_diff_w");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (W < 2) throw ShapeError("spatial_diff_w: W must be >= 2 in " + shape_str(x.shape()));
  std::vector<T> out(static_cast<std::size_t>(N) * C * H * (W - 1));
  const T* src = x.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const T* p = src + static_cast<std::size_t>(nc) * H * W;
    T* d = out.data() + static_cast<std::size_t>(nc) * H * (W - 1);
    for (int h = 0; h < H; ++h)
      for (int w = 0; w + 1 < W; ++w) d[h * (W - 1) + w] = p[h * W + w + 1] - p[h * W + w];
  }
  auto xi = x.impl();
  return make_node<T>({N, C, H, W - 1}, std::move(out), {x}, [xi, N, C, H, W](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (int nc = 0; nc < N * C; ++nc) {
      T* gx = xi->grad.data() + static_cast<std::size_t>(nc) * H * W;
      const T* g = o.grad.data() + static_cast<std::size_t>(nc) * H * (W - 1);
      for (int h = 0; h < H; ++h)
        for (int w = 0; w + 1 < W; ++w) {
          gx[h * W + w + 1] += g[h * (W - 1) + w];
          gx[h * W + w] -= g[h * (W - 1) + w];
        }
    }
  });
}

template <typename T>
Tensor<T> tile_actions(const Tensor<T>& a, int h, int w) {
  require_rank(a, 2, "tile_actions");
  const int N = a.dim(0), M = a.dim(1);
  if (h < 1 || w < 1) throw ShapeError("tile_actions: target extents must be positive");
  std::vector<T> out(static_cast<std::size_t>(N) * M * h * w);
  const T* pa = a.data();
  for (int n = 0; n < N; ++n)
    for (int j = 0; j < M; ++j)
      std::fill_n(out.data() + (static_cast<std::size_t>(n) * M + j) * h * w, h * w,
                  pa[static_cast<std::size_t>(n) * M + j]);
  auto ai = a.impl();
  return make_node<T>({N, M, h, w}, std::move(out), {a}, [ai, N, M, h, w](TensorImpl<T>& o) {
    if (!ai->tracked()) return;
    ai->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int j = 0; j < M; ++j) {
        const T* g = o.grad.data() + (static_cast<std::size_t>(n) * M + j) * h * w;
        T acc = T(0);
        for (int i = 0; i < h * w; ++i) acc += g[i];
        ai->grad[static_cast<std::size_t>(n) * M + j] += acc;
      }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  std::vector<T> out(x.numel());
  const T* px = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T m = rng.uniform() < rate ? T(0) : keep_scale;
    (*mask)[i] = m;
    out[i] = px[i] * m;
  }
  auto xi = x.impl();
  return make_node<T>(x.shape(), std::move(out), {x}, [xi, mask](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i] * (*mask)[i];
  });
}

template <typename T>
Tensor<T> center_rows(const Tensor<T>& x) {
  require_rank(x, 2, "center_rows");
  const int N = x.dim(0), F = x.dim(1);
  std::vector<T> out(x.numel());
  const T* px = x.data();
  for (int n = 0; n < N; ++n) {
    const T* row = px + static_cast<std::size_t>(n) * F;
    T mean = T(0);
    for (int j = 0; j < F; ++j) mean += row[j];
    mean /= static_cast<T>(F);
    T* d = out.data() + static_cast<std::size_t>(n) * F;
    for (int j = 0; j < F; ++j) d[j] = row[j] - mean;
  }
  auto xi = x.impl();
  return make_node<T>(x.shape(), std::move(out), {x}, [xi, N, F](TensorImpl<T>& o) {
    if (!xi->tracked()) return;
    xi->ensure_grad();
    for (int n = 0; n < N; ++n) {
      const T* g = o.grad.data() + static_cast<std::size_t>(n) * F;
      T mean = T(0);
      for (int j = 0; j < F; ++j) mean += g[j];
      mean /= static_cast<T>(F);
      T* dst = xi->grad.data() + static_cast<std::size_t>(n) * F;
      for (int j = 0; j < F; ++j) dst[j] += g[j] - mean;
    }
  });
}

// ---------------------------------------------------------------------------

#define ACVG_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int); \
  template Tensor<T> conv2d_transpose(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                      int, int);                                             \
  template Tensor<T> max_pool2d(const Tensor<T>&);                                           \
  template Tensor<T> upsample_nearest2(const Tensor<T>&);                                    \
  template Tensor<T> sigmoid(const Tensor<T>&);                                              \
  template Tensor<T> tanh_op(const Tensor<T>&);                                              \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                        \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                             \
  template Tensor<T> narrow(const Tensor<T>&, int, int, int);                                \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                \
  template Tensor<T> flatten2(const Tensor<T>&);                                             \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> abs_op(const Tensor<T>&);                                               \
  template Tensor<T> square(const Tensor<T>&);                                               \
  template Tensor<T> log_op(const Tensor<T>&);                                               \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                          \
  template Tensor<T> spatial_diff_h(const Tensor<T>&);                                       \
  template Tensor<T> spatial_diff_w(const Tensor<T>&);                                       \
  template Tensor<T> tile_actions(const Tensor<T>&, int, int);                               \
  template Tensor<T> dropout(const Tensor<T>&, double, Rng&);                                \
  template Tensor<T> center_rows(const Tensor<T>&);

ACVG_INSTANTIATE_OPS(float)
ACVG_INSTANTIATE_OPS(double)

#undef ACVG_INSTANTIATE_OPS

}  // namespace acvg
