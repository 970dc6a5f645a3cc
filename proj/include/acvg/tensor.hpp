#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "acvg/errors.hpp"

namespace acvg {

class Rng;

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Tape recording is thread-local; wrap inference-only code in NoGradGuard to
// skip graph construction entirely.
bool grad_enabled();
void set_grad_enabled(bool on);
struct NoGradGuard {
  bool prev;
  NoGradGuard();
  ~NoGradGuard();
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first contribution
  bool requires_grad = false;
  bool grad_consumed = false;
  std::function<void(TensorImpl&)> backward_fn;
  std::vector<std::shared_ptr<TensorImpl>> parents;

  bool tracked() const { return requires_grad || static_cast<bool>(backward_fn); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

// Dense n-dimensional array (rank 1-5) with an optional gradient and an
// optional tape node. Value-semantics handle sharing one implementation.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, T v);
  static Tensor scalar(T v);
  static Tensor from(const Shape& s, std::vector<T> values);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int i) const { return shape().at(static_cast<std::size_t>(i)); }
  std::size_t numel() const;

  T* data();
  const T* data() const;
  std::vector<T>& vec();
  const std::vector<T>& vec() const;
  T item() const;  // rank-agnostic single-element read

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool has_grad() const;
  const std::vector<T>& grad() const;
  std::vector<T>& grad_ref();  // allocates zeros when absent
  void zero_grad();            // drops the gradient buffer

  Tensor detach() const;  // copy of the values, no tape node
  Tensor clone() const;   // deep copy keeping leaf flag

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

// Reverse-topological gradient accumulation from a scalar loss. The tape is
// released as it is walked; a second call on the same loss raises GraphError.
template <typename T>
void backward(const Tensor<T>& loss);

// ---------------------------------------------------------------------------
// Differentiable kernels. Image tensors are NCHW, kernels OIHW, dense inputs
// N x F. Every op validates shapes and registers its backward rule when the
// tape is active.
// ---------------------------------------------------------------------------

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);

template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// y = x W + b with x: N x F, W: F x G, b: G (b may be undefined).
template <typename T> Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int stride, int padding);
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                           int stride, int padding);

template <typename T> Tensor<T> max_pool2d(const Tensor<T>& input);      // 2x2 window, stride 2
template <typename T> Tensor<T> upsample_nearest2(const Tensor<T>& input);

template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> tanh_op(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.2));

template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T> Tensor<T> narrow(const Tensor<T>& x, int axis, int start, int len);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, const Shape& s);
template <typename T> Tensor<T> flatten2(const Tensor<T>& x);  // keep dim 0, fold the rest

template <typename T> Tensor<T> sum(const Tensor<T>& x);  // scalar, shape {1}
template <typename T> Tensor<T> abs_op(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> log_op(const Tensor<T>& x);
template <typename T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

// Neighbor differences along H / W of an NCHW tensor (extent shrinks by one).
template <typename T> Tensor<T> spatial_diff_h(const Tensor<T>& x);
template <typename T> Tensor<T> spatial_diff_w(const Tensor<T>& x);

// (N, m) action matrix -> (N, m, h, w) constant planes.
template <typename T> Tensor<T> tile_actions(const Tensor<T>& a, int h, int w);

// Inverted dropout; identity when rate == 0.
template <typename T> Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng);

// Subtract the per-row mean of an N x F matrix.
template <typename T> Tensor<T> center_rows(const Tensor<T>& x);

template <typename T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

}  // namespace acvg
