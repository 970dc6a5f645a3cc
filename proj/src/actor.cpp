#include "acvg/actor.hpp"

namespace acvg {

void ActorConfig::validate() const {
  if (action_dim < 1 || lstm_hidden < 1 || dense_hidden < 1)
    throw ConfigError("actor: dimensions must be positive");
  if (chi_stages < 0 || chi_stages > 2)
    throw ConfigError("actor: chi_stages must be 0, 1 or 2");
  int h = chi_h, w = chi_w;
  for (int s = 0; s < chi_stages; ++s) {
    if (h % 2 != 0 || w % 2 != 0)
      throw ConfigError("actor: latent extent " + std::to_string(chi_h) + "x" +
                        std::to_string(chi_w) + " does not support " +
                        std::to_string(chi_stages) + " pooling stages");
    h /= 2;
    w /= 2;
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("actor: dropout must be in [0,1)");
}

namespace {
int chi_feature_count(const ActorConfig& c) {
  int h = c.chi_h, w = c.chi_w, ch = c.chi_channels;
  for (int s = 0; s < c.chi_stages; ++s) {
    ch = c.chi_widths[static_cast<std::size_t>(s)];
    h /= 2;
    w /= 2;
  }
  return ch * h * w;
}
}  // namespace

template <typename T>
Actor<T>::Actor(const ActorConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  cfg_.validate();
  const int hid = cfg_.lstm_hidden;
  params_.add("lstm.w", init_uniform<T>({cfg_.action_dim + hid, 4 * hid}, cfg_.action_dim + hid, init_rng));
  params_.add("lstm.b", Tensor<T>::zeros({4 * hid}));
  {
    auto& b = params_.get("lstm.b").vec();
    for (int i = hid; i < 2 * hid; ++i) b[static_cast<std::size_t>(i)] = T(1);
  }
  int in_ch = cfg_.chi_channels;
  for (int s = 0; s < cfg_.chi_stages; ++s) {
    const int out_ch = cfg_.chi_widths[static_cast<std::size_t>(s)];
    params_.add("chi.s" + std::to_string(s + 1) + ".k",
                init_uniform<T>({out_ch, in_ch, 3, 3}, in_ch * 9, init_rng));
    params_.add("chi.s" + std::to_string(s + 1) + ".b", Tensor<T>::zeros({out_ch}));
    in_ch = out_ch;
  }
  const int feat = chi_feature_count(cfg_) + hid;
  params_.add("dec.d1.w", init_uniform<T>({feat, cfg_.dense_hidden}, feat, init_rng));
  params_.add("dec.d1.b", Tensor<T>::zeros({cfg_.dense_hidden}));
  params_.add("dec.d2.w", init_uniform<T>({cfg_.dense_hidden, cfg_.action_dim}, cfg_.dense_hidden, init_rng));
  params_.add("dec.d2.b", Tensor<T>::zeros({cfg_.action_dim}));
}

template <typename T>
ActorState<T> Actor<T>::initial_state(int batch) const {
  ActorState<T> st;
  st.h = Tensor<T>::zeros({batch, cfg_.lstm_hidden});
  st.c = Tensor<T>::zeros({batch, cfg_.lstm_hidden});
  return st;
}

template <typename T>
Tensor<T> Actor<T>::rec_step(const Tensor<T>& a, ActorState<T>& state) const {
  if (a.rank() != 2 || a.dim(1) != cfg_.action_dim)
    throw ShapeError("actor rec_step: expected (N," + std::to_string(cfg_.action_dim) +
                     ") actions, got " + shape_str(a.shape()));
  const int hid = cfg_.lstm_hidden;
  Tensor<T> gates = dense(concat<T>({a, state.h}, 1), params_.get("lstm.w"), params_.get("lstm.b"));
  Tensor<T> gi = sigmoid(narrow(gates, 1, 0, hid));
  Tensor<T> gf = sigmoid(narrow(gates, 1, hid, hid));
  Tensor<T> go = sigmoid(narrow(gates, 1, 2 * hid, hid));
  Tensor<T> gg = tanh_op(narrow(gates, 1, 3 * hid, hid));
  state.c = add(mul(gf, state.c), mul(gi, gg));
  state.h = mul(go, tanh_op(state.c));
  return state.h;
}

template <typename T>
Tensor<T> Actor<T>::decode(const Tensor<T>& chi, const Tensor<T>& alpha, Rng* dropout_rng) const {
  if (chi.rank() != 4 || chi.dim(1) != cfg_.chi_channels || chi.dim(2) != cfg_.chi_h ||
      chi.dim(3) != cfg_.chi_w)
    throw ShapeError("actor decode: expected latent (N," + std::to_string(cfg_.chi_channels) + "," +
                     std::to_string(cfg_.chi_h) + "," + std::to_string(cfg_.chi_w) + "), got " +
                     shape_str(chi.shape()));
  Tensor<T> cur = chi;
  for (int s = 0; s < cfg_.chi_stages; ++s) {
    const std::string stage = "chi.s" + std::to_string(s + 1);
    cur = leaky_relu(conv2d(cur, params_.get(stage + ".k"), params_.get(stage + ".b"), 1, 1));
    cur = max_pool2d(cur);
  }
  Tensor<T> feat = concat<T>({flatten2(cur), alpha}, 1);
  Tensor<T> hiddenv = leaky_relu(dense(feat, params_.get("dec.d1.w"), params_.get("dec.d1.b")));
  if (cfg_.dropout > 0.0 && dropout_rng) hiddenv = dropout(hiddenv, cfg_.dropout, *dropout_rng);
  if (cfg_.center_features) hiddenv = center_rows(hiddenv);
  return tanh_op(dense(hiddenv, params_.get("dec.d2.w"), params_.get("dec.d2.b")));
}

// ---------------------------------------------------------------------------

template <typename T>
ActorActionProvider<T>::ActorActionProvider(const Actor<T>& actor,
                                            const std::vector<Tensor<T>>& past_actions,
                                            double noise_sigma, Rng* noise_rng)
    : actor_(actor), noise_sigma_(noise_sigma), noise_rng_(noise_rng) {
  if (past_actions.empty()) throw ProviderError("actor provider needs at least one past action");
  state_ = actor_.initial_state(past_actions[0].dim(0));
  // Replay the history so the hidden state encodes everything up to the
  // present action; the present action itself is served as the first step.
  for (std::size_t k = 0; k + 1 < past_actions.size(); ++k) actor_.rec_step(past_actions[k], state_);
  pending_ = apply_noise(past_actions.back());
  actor_.rec_step(pending_, state_);
}

template <typename T>
Tensor<T> ActorActionProvider<T>::apply_noise(const Tensor<T>& a) {
  if (noise_sigma_ <= 0.0 || noise_rng_ == nullptr) return a;
  Tensor<T> noisy = a.detach();
  auto& v = noisy.vec();
  for (auto& x : v) {
    x = static_cast<T>(x + noise_rng_->normal(0.0, noise_sigma_));
    x = std::min(T(1), std::max(T(-1), x));
  }
  return noisy;
}

template <typename T>
Tensor<T> ActorActionProvider<T>::action(int t) {
  if (t != next_t_ || awaiting_observe_)
    throw ProviderError("actor provider stepped out of order: got t=" + std::to_string(t) +
                        ", expected " + std::to_string(next_t_) +
                        (awaiting_observe_ ? " after observing the pending latent" : ""));
  awaiting_observe_ = true;
  ++next_t_;
  return pending_;
}

template <typename T>
void ActorActionProvider<T>::observe_chi(int t, const Tensor<T>& chi) {
  if (!awaiting_observe_ || t != next_t_ - 1)
    throw ProviderError("actor provider observed latent for t=" + std::to_string(t) +
                        " before serving it");
  awaiting_observe_ = false;
  Tensor<T> pred = actor_.decode(chi, state_.h);
  predicted_.push_back(pred);
  pending_ = apply_noise(pred);
  actor_.rec_step(pending_, state_);
}

template class Actor<float>;
template class Actor<double>;
template class ActorActionProvider<float>;
template class ActorActionProvider<double>;

}  // namespace acvg
