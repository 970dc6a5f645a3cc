#include "acvg/param_store.hpp"

#include <cmath>
#include <cstring>

namespace acvg {

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& name, Tensor<T> t) {
  if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  t.set_requires_grad(true);
  Entry e;
  e.value = std::move(t);
  auto [it, ok] = entries_.emplace(name, std::move(e));
  (void)ok;
  return it->second.value;
}

template <typename T>
Tensor<T>& ParamStore<T>::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second.value;
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second.value;
}

template <typename T>
void ParamStore<T>::zero_grads() {
  for (auto& [name, e] : entries_) e.value.zero_grad();
}

template <typename T>
double ParamStore<T>::grad_norm() const {
  double acc = 0.0;
  for (const auto& [name, e] : entries_) {
    if (!e.value.has_grad()) throw GradError("gradient missing for parameter: " + name);
    for (const T g : e.value.grad()) acc += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(acc);
}

template <typename T>
bool ParamStore<T>::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm <= max_norm || norm == 0.0) return false;
  const T f = static_cast<T>(max_norm / norm);
  for (auto& [name, e] : entries_) {
    auto& g = e.value.grad_ref();
    for (auto& v : g) v *= f;
  }
  return true;
}

template <typename T>
std::size_t ParamStore<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.numel();
  return n;
}

template <typename T>
std::vector<std::uint8_t> ParamStore<T>::byte_image() const {
  std::vector<std::uint8_t> out;
  for (const auto& [name, e] : entries_) {
    const auto& v = e.value.vec();
    const std::size_t off = out.size();
    out.resize(off + v.size() * sizeof(T));
    std::memcpy(out.data() + off, v.data(), v.size() * sizeof(T));
  }
  return out;
}

template <typename T>
void adam_step(ParamStore<T>& store, double lr, double beta1, double beta2, double eps) {
  for (auto& [name, e] : store.entries()) {
    if (!e.value.has_grad()) throw GradError("adam_step: gradient missing for parameter: " + name);
    const auto& g = e.value.grad();
    auto& p = e.value.vec();
    if (e.m.size() != p.size()) e.m.assign(p.size(), T(0));
    if (e.v.size() != p.size()) e.v.assign(p.size(), T(0));
    e.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(e.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(e.step));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double m = beta1 * static_cast<double>(e.m[i]) + (1.0 - beta1) * gi;
      const double v = beta2 * static_cast<double>(e.v[i]) + (1.0 - beta2) * gi * gi;
      e.m[i] = static_cast<T>(m);
      e.v[i] = static_cast<T>(v);
      const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
      p[i] = static_cast<T>(static_cast<double>(p[i]) - update);
    }
  }
  store.zero_grads();
}

template <typename T>
Tensor<T> init_uniform(const Shape& shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  Tensor<T> t = Tensor<T>::zeros(shape);
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template class ParamStore<float>;
template class ParamStore<double>;
template void adam_step(ParamStore<float>&, double, double, double, double);
template void adam_step(ParamStore<double>&, double, double, double, double);
template Tensor<float> init_uniform(const Shape&, int, Rng&);
template Tensor<double> init_uniform(const Shape&, int, Rng&);

}  // namespace acvg
