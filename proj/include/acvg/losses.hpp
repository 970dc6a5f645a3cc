#pragma once

#include <array>
#include <vector>

#include "acvg/param_store.hpp"
#include "acvg/rng.hpp"
#include "acvg/tensor.hpp"

namespace acvg {

// Objective weights and phase gates. beta gates the image/flow reconstruction
// (plus the scaled adversarial term), gamma gates the action term.
struct LossWeights {
  int lambda1 = 1;   // reconstruction exponent, 1 or 2
  int lambda2 = 1;   // gradient-difference exponent, 1 or 2
  int lambda_a = 2;  // action exponent, fixed at 2
  double mu = 1e-4;  // adversarial scale
  int beta = 1;
  int gamma = 1;
  void validate() const;
};

// Sum over time of |x - x~|^l1 plus the gradient-difference penalty
// || |dx| - |dx~| |^l2 over both spatial axes, summed over pixels/channels and
// divided by the batch size.
template <typename T>
Tensor<T> recon_image_loss(const std::vector<Tensor<T>>& target,
                           const std::vector<Tensor<T>>& pred, int lambda1, int lambda2);
template <typename T>
Tensor<T> recon_flow_loss(const std::vector<Tensor<T>>& target,
                          const std::vector<Tensor<T>>& pred, int lambda1, int lambda2);

// Sum over time of the squared Euclidean action error, divided by batch size.
template <typename T>
Tensor<T> action_loss(const std::vector<Tensor<T>>& target, const std::vector<Tensor<T>>& pred);

// -log D(fake), probabilities clamped to [1e-7, 1-1e-7]; batch-meaned.
template <typename T>
Tensor<T> adversarial_gen_loss(const Tensor<T>& d_fake);

// -log D(real) - log(1 - D(fake)), clamped as above; batch-meaned.
template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& d_real, const Tensor<T>& d_fake);

struct TotalLossParts {
  Tensor<float> recon_image, recon_flow, adversarial, action;
};
// beta * (recon_image + recon_flow + mu * adversarial) + gamma * action.
Tensor<float> total_loss(const TotalLossParts& parts, const LossWeights& w);

struct DiscriminatorConfig {
  int frame_channels = 3;
  int frame_h = 32, frame_w = 32;
  int sequence_len = 15;  // past + future frames judged jointly
  std::array<int, 4> widths{16, 32, 64, 64};
  void validate() const;
};

// Stride-2 conv classifier over the channel-stacked frame sequence, ending in
// a sigmoid probability per batch element.
template <typename T>
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, Rng& init_rng);

  // frames: sequence_len tensors of (N,C,H,W) -> (N,1) probabilities.
  Tensor<T> discriminate(const std::vector<Tensor<T>>& frames) const;

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  ParamStore<T> params_;
};

extern template class Discriminator<float>;
extern template class Discriminator<double>;

}  // namespace acvg
