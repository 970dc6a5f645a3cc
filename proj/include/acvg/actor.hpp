#pragma once

#include <string>
#include <vector>

#include "acvg/param_store.hpp"
#include "acvg/provider.hpp"
#include "acvg/rng.hpp"
#include "acvg/tensor.hpp"

namespace acvg {

struct ActorConfig {
  int action_dim = 2;
  int lstm_hidden = 2;  // matches the action dimension by default
  int chi_channels = 64, chi_h = 4, chi_w = 4;  // generator latent geometry
  int chi_stages = 2;                           // conv+pool stages over the latent
  std::array<int, 2> chi_widths{16, 8};
  int dense_hidden = 32;
  double dropout = 0.0;
  bool center_features = false;  // optional bias-only feature centering
  void validate() const;
};

template <typename T>
struct ActorState {
  Tensor<T> h, c;  // (N, hidden)
};

// Recurrent imitation of the recording platform's controller: an LSTM over
// past actions plus a decoder that reads the generator's pre-decoder latent
// to emit the next normalized action in (-1,1)^m.
template <typename T>
class Actor {
 public:
  Actor(const ActorConfig& cfg, Rng& init_rng);

  ActorState<T> initial_state(int batch) const;
  // One LSTM step over an (N,m) action; returns the new hidden state.
  Tensor<T> rec_step(const Tensor<T>& a, ActorState<T>& state) const;
  // chi (N,C,h,w) latent + hidden state -> next action, tanh-bounded.
  Tensor<T> decode(const Tensor<T>& chi, const Tensor<T>& alpha, Rng* dropout_rng = nullptr) const;

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const ActorConfig& config() const { return cfg_; }

 private:
  ActorConfig cfg_;
  ParamStore<T> params_;
};

// In-the-loop action source for rollouts: serves the ground-truth present
// action first, then its own predictions, each derived from the latent of the
// previous generator step. Optional Gaussian noise (clamped to [-1,1]) is
// applied to every served action and to the recurrent input, so a
// perturbation study degrades both paths consistently.
template <typename T>
class ActorActionProvider : public ActionProvider<T> {
 public:
  ActorActionProvider(const Actor<T>& actor, const std::vector<Tensor<T>>& past_actions,
                      double noise_sigma = 0.0, Rng* noise_rng = nullptr);

  Tensor<T> action(int t) override;
  void observe_chi(int t, const Tensor<T>& chi) override;

  // Predicted actions so far (one per observed latent), before noise.
  const std::vector<Tensor<T>>& predicted() const { return predicted_; }

 private:
  Tensor<T> apply_noise(const Tensor<T>& a);

  const Actor<T>& actor_;
  ActorState<T> state_;
  Tensor<T> pending_;  // action to serve at the next action(t) call
  int next_t_ = 0;
  bool awaiting_observe_ = false;
  std::vector<Tensor<T>> predicted_;
  double noise_sigma_;
  Rng* noise_rng_;
};

extern template class Actor<float>;
extern template class Actor<double>;
extern template class ActorActionProvider<float>;
extern template class ActorActionProvider<double>;

}  // namespace acvg
