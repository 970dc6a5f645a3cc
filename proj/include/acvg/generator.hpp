#pragma once

#include <array>
#include <string>
#include <vector>

#include "acvg/param_store.hpp"
#include "acvg/provider.hpp"
#include "acvg/rng.hpp"
#include "acvg/tensor.hpp"

namespace acvg {

struct GeneratorConfig {
  int frame_h = 32, frame_w = 32;
  int frame_channels = 3;
  int action_dim = 2;
  std::array<int, 3> enc_widths{16, 32, 64};  // per encoder stage
  int lstm_hidden = 64;
  int kernel = 3;  // conv kernel for encoder/decoder/recurrent/combination

  int latent_h() const { return frame_h / 8; }
  int latent_w() const { return frame_w / 8; }
  int latent_channels() const { return enc_widths[2]; }
  void validate() const;
};

// Recurrent/skip context carried across one prediction rollout.
template <typename T>
struct GeneratorState {
  Tensor<T> h, c;                 // ConvLSTM
  Tensor<T> x_hat;                // latent of the current (real or predicted) frame
  std::vector<Tensor<T>> skips;   // per-stage pre-pool features of that frame
};

template <typename T>
struct RolloutResult {
  std::vector<Tensor<T>> frames;   // predicted frames, horizon entries
  std::vector<Tensor<T>> flows;    // predicted first-order flows
  std::vector<Tensor<T>> latents;  // pre-decoder latents (chi), consumed by the policy head
};

// Encoder -> action-augmented ConvLSTM -> latent combination -> decoder with
// skip connections, plus the free-running multi-step rollout.
template <typename T>
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, Rng& init_rng);

  // Frame in [0,1] (rescaled to [-1,1] internally); returns the deepest
  // feature map and the per-stage pre-pool activations.
  std::pair<Tensor<T>, std::vector<Tensor<T>>> encode_image(const Tensor<T>& x) const;
  Tensor<T> encode_flow(const Tensor<T>& o) const;
  // Tiles each normalized action component into a constant plane and appends
  // it to the encoded flow channels.
  Tensor<T> augment_flow(const Tensor<T>& o_hat, const Tensor<T>& a) const;
  // One ConvLSTM step over the augmented flow; returns the motion features.
  Tensor<T> flow_step(const Tensor<T>& o_aug, GeneratorState<T>& state) const;
  // Fuses motion features with the current image latent.
  Tensor<T> combine(const Tensor<T>& x_hat, const Tensor<T>& motion) const;
  // Maps a latent back to a full frame in (0,1).
  Tensor<T> decode(const Tensor<T>& chi, const std::vector<Tensor<T>>& skips) const;

  // Runs the conditioning window (ground-truth flows/actions for the steps
  // before the present frame) and caches the present frame's features.
  GeneratorState<T> warmup(const std::vector<Tensor<T>>& past_frames,
                           const std::vector<Tensor<T>>& past_flows,
                           const std::vector<Tensor<T>>& past_actions) const;

  // Free-running prediction: each step consumes the previous prediction.
  RolloutResult<T> rollout(GeneratorState<T>& state, const Tensor<T>& x0, const Tensor<T>& o0,
                           ActionProvider<T>& actions, int horizon) const;

  GeneratorState<T> initial_state(int batch) const;

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const GeneratorConfig& config() const { return cfg_; }

 private:
  Tensor<T> encode_stages(const Tensor<T>& x, const std::string& prefix,
                          std::vector<Tensor<T>>* skips) const;

  GeneratorConfig cfg_;
  ParamStore<T> params_;
};

extern template class Generator<float>;
extern template class Generator<double>;

}  // namespace acvg
