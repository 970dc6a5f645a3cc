#include "acvg/generator.hpp"

namespace acvg {

void GeneratorConfig::validate() const {
  if (frame_h % 8 != 0 || frame_w % 8 != 0)
    throw ConfigError("generator: frame extents must be divisible by 8, got " +
                      std::to_string(frame_h) + "x" + std::to_string(frame_w));
  if (kernel < 1 || kernel % 2 == 0)
    throw ConfigError("generator: kernel must be odd, got " + std::to_string(kernel));
  for (int w : enc_widths)
    if (w < 1) throw ConfigError("generator: encoder widths must be positive");
  if (lstm_hidden < 1 || action_dim < 1 || frame_channels < 1)
    throw ConfigError("generator: invalid channel configuration");
}

namespace {
template <typename T>
void add_conv(ParamStore<T>& ps, const std::string& name, int out_ch, int in_ch, int k, Rng& rng) {
  ps.add(name + ".k", init_uniform<T>({out_ch, in_ch, k, k}, in_ch * k * k, rng));
  ps.add(name + ".b", Tensor<T>::zeros({out_ch}));
}

// Transpose-conv kernels are laid out (in_ch, out_ch, k, k).
template <typename T>
void add_tconv(ParamStore<T>& ps, const std::string& name, int in_ch, int out_ch, int k, Rng& rng) {
  ps.add(name + ".k", init_uniform<T>({in_ch, out_ch, k, k}, in_ch * k * k, rng));
  ps.add(name + ".b", Tensor<T>::zeros({out_ch}));
}
}  // namespace

template <typename T>
Generator<T>::Generator(const GeneratorConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  cfg_.validate();
  const int k = cfg_.kernel;
  const auto& w = cfg_.enc_widths;
  for (const char* enc : {"enc_x", "enc_o"}) {
    add_conv(params_, std::string(enc) + ".s1", w[0], cfg_.frame_channels, k, init_rng);
    add_conv(params_, std::string(enc) + ".s2", w[1], w[0], k, init_rng);
    add_conv(params_, std::string(enc) + ".s3", w[2], w[1], k, init_rng);
  }
  const int lstm_in = w[2] + cfg_.action_dim;
  add_conv(params_, "lstm", 4 * cfg_.lstm_hidden, lstm_in + cfg_.lstm_hidden, k, init_rng);
  {
    // Forget-gate bias starts at +1 so early steps keep their cell memory.
    auto& b = params_.get("lstm.b").vec();
    for (int i = cfg_.lstm_hidden; i < 2 * cfg_.lstm_hidden; ++i) b[static_cast<std::size_t>(i)] = T(1);
  }
  add_conv(params_, "comb.c1", w[2], w[2] + cfg_.lstm_hidden, k, init_rng);
  add_conv(params_, "comb.c2", w[2], w[2], k, init_rng);
  add_tconv(params_, "dec.s1", w[2] + w[2], w[1], k, init_rng);
  add_tconv(params_, "dec.s2", w[1] + w[1], w[0], k, init_rng);
  add_tconv(params_, "dec.s3", w[0] + w[0], cfg_.frame_channels, k, init_rng);
}

template <typename T>
Tensor<T> Generator<T>::encode_stages(const Tensor<T>& x, const std::string& prefix,
                                      std::vector<Tensor<T>>* skips) const {
  const int pad = (cfg_.kernel - 1) / 2;
  Tensor<T> cur = x;
  for (int s = 1; s <= 3; ++s) {
    const std::string stage = prefix + ".s" + std::to_string(s);
    cur = leaky_relu(conv2d(cur, params_.get(stage + ".k"), params_.get(stage + ".b"), 1, pad));
    if (skips) skips->push_back(cur);
    cur = max_pool2d(cur);
  }
  return cur;
}

template <typename T>
std::pair<Tensor<T>, std::vector<Tensor<T>>> Generator<T>::encode_image(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != cfg_.frame_channels || x.dim(2) != cfg_.frame_h ||
      x.dim(3) != cfg_.frame_w)
    throw ShapeError("encode_image: expected (N," + std::to_string(cfg_.frame_channels) + "," +
                     std::to_string(cfg_.frame_h) + "," + std::to_string(cfg_.frame_w) + "), got " +
                     shape_str(x.shape()));
  std::vector<Tensor<T>> skips;
  // Frames arrive in [0,1]; the encoder works in [-1,1].
  Tensor<T> rescaled = add_scalar(scale(x, T(2)), T(-1));
  Tensor<T> deep = encode_stages(rescaled, "enc_x", &skips);
  return {deep, std::move(skips)};
}

template <typename T>
Tensor<T> Generator<T>::encode_flow(const Tensor<T>& o) const {
  if (o.rank() != 4 || o.dim(1) != cfg_.frame_channels || o.dim(2) != cfg_.frame_h ||
      o.dim(3) != cfg_.frame_w)
    throw ShapeError("encode_flow: expected (N," + std::to_string(cfg_.frame_channels) + "," +
                     std::to_string(cfg_.frame_h) + "," + std::to_string(cfg_.frame_w) + "), got " +
                     shape_str(o.shape()));
  return encode_stages(o, "enc_o", nullptr);
}

template <typename T>
Tensor<T> Generator<T>::augment_flow(const Tensor<T>& o_hat, const Tensor<T>& a) const {
  if (a.rank() != 2 || a.dim(1) != cfg_.action_dim)
    throw ShapeError("augment_flow: expected (N," + std::to_string(cfg_.action_dim) +
                     ") actions, got " + shape_str(a.shape()));
  Tensor<T> planes = tile_actions(a, o_hat.dim(2), o_hat.dim(3));
  return concat<T>({o_hat, planes}, 1);
}

template <typename T>
Tensor<T> Generator<T>::flow_step(const Tensor<T>& o_aug, GeneratorState<T>& state) const {
  if (o_aug.dim(2) != state.h.dim(2) || o_aug.dim(3) != state.h.dim(3))
    throw ShapeError("flow_step: input " + shape_str(o_aug.shape()) +
                     " does not match state " + shape_str(state.h.shape()));
  const int hid = cfg_.lstm_hidden;
  const int pad = (cfg_.kernel - 1) / 2;
  Tensor<T> gates =
      conv2d(concat<T>({o_aug, state.h}, 1), params_.get("lstm.k"), params_.get("lstm.b"), 1, pad);
  Tensor<T> gi = sigmoid(narrow(gates, 1, 0, hid));
  Tensor<T> gf = sigmoid(narrow(gates, 1, hid, hid));
  Tensor<T> go = sigmoid(narrow(gates, 1, 2 * hid, hid));
  Tensor<T> gg = tanh_op(narrow(gates, 1, 3 * hid, hid));
  state.c = add(mul(gf, state.c), mul(gi, gg));
  state.h = mul(go, tanh_op(state.c));
  return state.h;
}

template <typename T>
Tensor<T> Generator<T>::combine(const Tensor<T>& x_hat, const Tensor<T>& motion) const {
  if (x_hat.dim(2) != motion.dim(2) || x_hat.dim(3) != motion.dim(3))
    throw ShapeError("combine: latents " + shape_str(x_hat.shape()) + " and " +
                     shape_str(motion.shape()) + " differ spatially");
  const int pad = (cfg_.kernel - 1) / 2;
  Tensor<T> fused = concat<T>({x_hat, motion}, 1);
  fused = leaky_relu(conv2d(fused, params_.get("comb.c1.k"), params_.get("comb.c1.b"), 1, pad));
  return conv2d(fused, params_.get("comb.c2.k"), params_.get("comb.c2.b"), 1, pad);
}

template <typename T>
Tensor<T> Generator<T>::decode(const Tensor<T>& chi, const std::vector<Tensor<T>>& skips) const {
  if (skips.size() != 3)
    throw ShapeError("decode: expected 3 skip tensors, got " + std::to_string(skips.size()));
  const int pad = (cfg_.kernel - 1) / 2;
  Tensor<T> cur = upsample_nearest2(chi);
  cur = concat<T>({cur, skips[2]}, 1);
  cur = leaky_relu(conv2d_transpose(cur, params_.get("dec.s1.k"), params_.get("dec.s1.b"), 1, pad));
  cur = upsample_nearest2(cur);
  cur = concat<T>({cur, skips[1]}, 1);
  cur = leaky_relu(conv2d_transpose(cur, params_.get("dec.s2.k"), params_.get("dec.s2.b"), 1, pad));
  cur = upsample_nearest2(cur);
  cur = concat<T>({cur, skips[0]}, 1);
  return sigmoid(conv2d_transpose(cur, params_.get("dec.s3.k"), params_.get("dec.s3.b"), 1, pad));
}

template <typename T>
GeneratorState<T> Generator<T>::initial_state(int batch) const {
  GeneratorState<T> st;
  st.h = Tensor<T>::zeros({batch, cfg_.lstm_hidden, cfg_.latent_h(), cfg_.latent_w()});
  st.c = Tensor<T>::zeros({batch, cfg_.lstm_hidden, cfg_.latent_h(), cfg_.latent_w()});
  return st;
}

template <typename T>
GeneratorState<T> Generator<T>::warmup(const std::vector<Tensor<T>>& past_frames,
                                       const std::vector<Tensor<T>>& past_flows,
                                       const std::vector<Tensor<T>>& past_actions) const {
  const int n = static_cast<int>(past_frames.size());
  if (n < 2)
    throw DataError("warmup: at least 2 past observations required, got " + std::to_string(n));
  if (static_cast<int>(past_flows.size()) != n || static_cast<int>(past_actions.size()) != n)
    throw ShapeError("warmup: frames/flows/actions counts differ");
  GeneratorState<T> st = initial_state(past_frames[0].dim(0));
  // Steps strictly before the present frame run on ground truth; the present
  // flow/action pair belongs to the first rollout step.
  for (int k = 0; k + 1 < n; ++k) {
    Tensor<T> o_hat = encode_flow(past_flows[static_cast<std::size_t>(k)]);
    flow_step(augment_flow(o_hat, past_actions[static_cast<std::size_t>(k)]), st);
  }
  auto [x_hat, skips] = encode_image(past_frames.back());
  st.x_hat = x_hat;
  st.skips = std::move(skips);
  return st;
}

template <typename T>
RolloutResult<T> Generator<T>::rollout(GeneratorState<T>& state, const Tensor<T>& x0,
                                       const Tensor<T>& o0, ActionProvider<T>& actions,
                                       int horizon) const {
  if (horizon < 1) throw ConfigError("rollout: horizon must be >= 1");
  if (!state.x_hat.defined()) throw ConfigError("rollout: state has not been warmed up");
  RolloutResult<T> out;
  Tensor<T> cur_frame = x0;
  Tensor<T> cur_flow = o0;
  for (int t = 0; t < horizon; ++t) {
    Tensor<T> a = actions.action(t);
    Tensor<T> o_hat = encode_flow(cur_flow);
    Tensor<T> motion = flow_step(augment_flow(o_hat, a), state);
    Tensor<T> chi = combine(state.x_hat, motion);
    Tensor<T> next_frame = decode(chi, state.skips);
    Tensor<T> next_flow = sub(next_frame, cur_frame);
    actions.observe_chi(t, chi);
    out.frames.push_back(next_frame);
    out.flows.push_back(next_flow);
    out.latents.push_back(chi);
    cur_frame = next_frame;
    cur_flow = next_flow;
    auto [x_hat, skips] = encode_image(next_frame);
    state.x_hat = x_hat;
    state.skips = std::move(skips);
  }
  return out;
}

template class Generator<float>;
template class Generator<double>;

}  // namespace acvg
