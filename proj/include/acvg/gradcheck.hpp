#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "acvg/tensor.hpp"

namespace acvg {

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckEps = 1e-5;

// Central-difference verification, 64-bit only. `f` must rebuild its graph
// from the same leaf tensors on every call; every element of every input is
// perturbed by +/- eps. Returns the max over elements of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f,
                  std::vector<Tensor<double>> inputs, double eps = kGradCheckEps);

struct GradCheckResult {
  std::string op;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Registered finite-difference suites covering every differentiable kernel,
// the losses, the discriminator and short generator/actor rollouts.
std::vector<std::string> grad_check_names();
GradCheckResult run_grad_check(const std::string& name, std::uint64_t seed);
std::vector<GradCheckResult> run_all_grad_checks(std::uint64_t seed);

}  // namespace acvg
