#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "acvg/rng.hpp"
#include "acvg/tensor.hpp"

namespace acvg {

// Named parameter table with per-parameter Adam state. Iteration follows the
// lexicographic name order of std::map, which keeps update order and
// checkpoint layout deterministic.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    Tensor<T> value;
    std::vector<T> m;  // first moment
    std::vector<T> v;  // second moment
    std::int64_t step = 0;
  };

  Tensor<T>& add(const std::string& name, Tensor<T> t);
  Tensor<T>& get(const std::string& name);
  const Tensor<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  void zero_grads();
  // L2 norm over every gradient in the store; GradError when any is missing.
  double grad_norm() const;
  // Scales all gradients by max_norm/norm when norm exceeds max_norm.
  // Returns true when clipping fired.
  bool clip_grad_norm(double max_norm);

  std::size_t total_elements() const;
  std::vector<std::uint8_t> byte_image() const;  // raw parameter bytes, for change audits

 private:
  std::map<std::string, Entry> entries_;
};

// Bias-corrected Adam over every parameter in name order; clears gradients
// afterwards. Throws GradError naming the first parameter without a gradient.
template <typename T>
void adam_step(ParamStore<T>& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
template <typename T>
Tensor<T> init_uniform(const Shape& shape, int fan_in, Rng& rng);

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace acvg
