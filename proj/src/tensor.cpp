#include "acvg/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace acvg {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int e : s) n *= static_cast<std::size_t>(e);
  return n;
}

namespace {
thread_local bool g_grad_enabled = true;

void validate_shape(const Shape& s) {
  if (s.empty() || s.size() > 5) throw ShapeError("tensor rank must be 1-5, got " + shape_str(s));
  for (int e : s)
    if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(s));
}
}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }
NoGradGuard::NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev; }

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& s) {
  validate_shape(s);
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = s;
  impl->data.assign(shape_numel(s), T(0));
  return Tensor(impl);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& s, T v) {
  Tensor t = zeros(s);
  for (auto& x : t.vec()) x = v;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T v) {
  return full({1}, v);
}

template <typename T>
Tensor<T> Tensor<T>::from(const Shape& s, std::vector<T> values) {
  validate_shape(s);
  if (values.size() != shape_numel(s))
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(s));
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = s;
  impl->data = std::move(values);
  return Tensor(impl);
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!impl_) throw ShapeError("tensor is undefined");
  return impl_->shape;
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return impl_ ? impl_->data.size() : 0;
}

template <typename T>
T* Tensor<T>::data() {
  return vec().data();
}

template <typename T>
const T* Tensor<T>::data() const {
  return vec().data();
}

template <typename T>
std::vector<T>& Tensor<T>::vec() {
  if (!impl_) throw ShapeError("tensor is undefined");
  return impl_->data;
}

template <typename T>
const std::vector<T>& Tensor<T>::vec() const {
  if (!impl_) throw ShapeError("tensor is undefined");
  return impl_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
  return vec()[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (!impl_) throw ShapeError("tensor is undefined");
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return impl_ && impl_->grad.size() == impl_->data.size();
}

template <typename T>
const std::vector<T>& Tensor<T>::grad() const {
  if (!has_grad()) throw GradError("tensor has no gradient");
  return impl_->grad;
}

template <typename T>
std::vector<T>& Tensor<T>::grad_ref() {
  if (!impl_) throw ShapeError("tensor is undefined");
  impl_->ensure_grad();
  return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (impl_) impl_->grad.clear();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  if (!impl_) return Tensor();
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(impl);
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor t = detach();
  if (impl_) t.impl()->requires_grad = impl_->requires_grad;
  return t;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  auto root = loss.impl();
  if (!root) throw GraphError("backward on undefined tensor");
  if (root->data.size() != 1) throw GraphError("backward requires a scalar loss, got " + shape_str(root->shape));
  if (root->grad_consumed) throw GraphError("backward called twice on the same graph");
  if (!root->backward_fn && !root->requires_grad)
    throw GraphError("backward on a detached tensor: no recorded graph");

  // Iterative postorder over parent edges; reversing it puts every node before
  // the nodes it reads gradients from.
  using ImplPtr = TensorImpl<T>*;
  std::vector<ImplPtr> order;
  std::unordered_set<ImplPtr> seen;
  struct Frame {
    ImplPtr node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      ImplPtr p = f.node->parents[f.next_parent++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl<T>* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
  // Release closures and parent links so activation memory frees immediately.
  for (TensorImpl<T>* node : order) {
    node->backward_fn = nullptr;
    node->parents.clear();
  }
  root->grad_consumed = true;
}

template class Tensor<float>;
template class Tensor<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);

}  // namespace acvg
