#include "acvg/losses.hpp"

namespace acvg {

void LossWeights::validate() const {
  if (lambda1 != 1 && lambda1 != 2) throw ConfigError("lambda1 must be 1 or 2");
  if (lambda2 != 1 && lambda2 != 2) throw ConfigError("lambda2 must be 1 or 2");
  if (lambda_a != 2) throw ConfigError("lambda_a must be 2");
  if (mu < 0.0) throw ConfigError("mu must be >= 0");
  if ((beta != 0 && beta != 1) || (gamma != 0 && gamma != 1))
    throw ConfigError("beta and gamma are binary gates");
}

namespace {
constexpr double kProbFloor = 1e-7;

template <typename T>
Tensor<T> abs_power(const Tensor<T>& u, int exponent) {
  return exponent == 1 ? abs_op(u) : square(u);
}

template <typename T>
Tensor<T> recon_seq_loss(const std::vector<Tensor<T>>& target, const std::vector<Tensor<T>>& pred,
                         int lambda1, int lambda2, const char* what) {
  if (target.size() != pred.size() || target.empty())
    throw ShapeError(std::string(what) + ": sequence lengths differ or are empty");
  if ((lambda1 != 1 && lambda1 != 2) || (lambda2 != 1 && lambda2 != 2))
    throw ConfigError(std::string(what) + ": exponents must be 1 or 2");
  const int batch = target[0].dim(0);
  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (target[t].shape() != pred[t].shape())
      throw ShapeError(std::string(what) + ": step " + std::to_string(t) + " shapes " +
                       shape_str(target[t].shape()) + " vs " + shape_str(pred[t].shape()));
    Tensor<T> diff = sub(target[t], pred[t]);
    total = add(total, sum(lambda1 == 1 ? abs_op(diff) : square(diff)));
    // Gradient-difference term: mismatch of absolute neighbor differences,
    // invariant to constant offsets by construction.
    Tensor<T> gh = sub(abs_op(spatial_diff_h(target[t])), abs_op(spatial_diff_h(pred[t])));
    Tensor<T> gw = sub(abs_op(spatial_diff_w(target[t])), abs_op(spatial_diff_w(pred[t])));
    total = add(total, sum(abs_power(gh, lambda2)));
    total = add(total, sum(abs_power(gw, lambda2)));
  }
  return scale(total, T(1.0 / batch));
}
}  // namespace

template <typename T>
Tensor<T> recon_image_loss(const std::vector<Tensor<T>>& target, const std::vector<Tensor<T>>& pred,
                           int lambda1, int lambda2) {
  return recon_seq_loss(target, pred, lambda1, lambda2, "recon_image_loss");
}

template <typename T>
Tensor<T> recon_flow_loss(const std::vector<Tensor<T>>& target, const std::vector<Tensor<T>>& pred,
                          int lambda1, int lambda2) {
  return recon_seq_loss(target, pred, lambda1, lambda2, "recon_flow_loss");
}

template <typename T>
Tensor<T> action_loss(const std::vector<Tensor<T>>& target, const std::vector<Tensor<T>>& pred) {
  if (target.size() != pred.size() || target.empty())
    throw ShapeError("action_loss: sequence lengths differ or are empty");
  const int batch = target[0].dim(0);
  Tensor<T> total = Tensor<T>::scalar(T(0));
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (target[t].shape() != pred[t].shape())
      throw ShapeError("action_loss: step " + std::to_string(t) + " shapes " +
                       shape_str(target[t].shape()) + " vs " + shape_str(pred[t].shape()));
    total = add(total, sum(square(sub(target[t], pred[t]))));
  }
  return scale(total, T(1.0 / batch));
}

template <typename T>
Tensor<T> adversarial_gen_loss(const Tensor<T>& d_fake) {
  const int batch = d_fake.dim(0);
  Tensor<T> p = clamp(d_fake, static_cast<T>(kProbFloor), static_cast<T>(1.0 - kProbFloor));
  return scale(sum(log_op(p)), T(-1.0 / batch));
}

template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  if (d_real.shape() != d_fake.shape())
    throw ShapeError("discriminator_loss: shapes " + shape_str(d_real.shape()) + " vs " +
                     shape_str(d_fake.shape()));
  const int batch = d_real.dim(0);
  Tensor<T> pr = clamp(d_real, static_cast<T>(kProbFloor), static_cast<T>(1.0 - kProbFloor));
  Tensor<T> pf = clamp(d_fake, static_cast<T>(kProbFloor), static_cast<T>(1.0 - kProbFloor));
  Tensor<T> one_minus = add_scalar(scale(pf, T(-1)), T(1));
  Tensor<T> total = add(sum(log_op(pr)), sum(log_op(one_minus)));
  return scale(total, T(-1.0 / batch));
}

Tensor<float> total_loss(const TotalLossParts& parts, const LossWeights& w) {
  w.validate();
  Tensor<float> total = Tensor<float>::scalar(0.0f);
  if (w.beta) {
    if (parts.recon_image.defined()) total = add(total, parts.recon_image);
    if (parts.recon_flow.defined()) total = add(total, parts.recon_flow);
    if (parts.adversarial.defined())
      total = add(total, scale(parts.adversarial, static_cast<float>(w.mu)));
  }
  if (w.gamma && parts.action.defined()) total = add(total, parts.action);
  return total;
}

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

void DiscriminatorConfig::validate() const {
  if (frame_h % 16 != 0 || frame_w % 16 != 0)
    throw ConfigError("discriminator: frame extents must be divisible by 16, got " +
                      std::to_string(frame_h) + "x" + std::to_string(frame_w));
  if (sequence_len < 1) throw ConfigError("discriminator: sequence_len must be >= 1");
  for (int w : widths)
    if (w < 1) throw ConfigError("discriminator: widths must be positive");
}

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorConfig& cfg, Rng& init_rng) : cfg_(cfg) {
  cfg_.validate();
  int in_ch = cfg_.frame_channels * cfg_.sequence_len;
  for (int s = 0; s < 4; ++s) {
    const int out_ch = cfg_.widths[static_cast<std::size_t>(s)];
    params_.add("c" + std::to_string(s + 1) + ".k",
                init_uniform<T>({out_ch, in_ch, 4, 4}, in_ch * 16, init_rng));
    params_.add("c" + std::to_string(s + 1) + ".b", Tensor<T>::zeros({out_ch}));
    in_ch = out_ch;
  }
  const int feat = cfg_.widths[3] * (cfg_.frame_h / 16) * (cfg_.frame_w / 16);
  params_.add("out.w", init_uniform<T>({feat, 1}, feat, init_rng));
  params_.add("out.b", Tensor<T>::zeros({1}));
}

template <typename T>
Tensor<T> Discriminator<T>::discriminate(const std::vector<Tensor<T>>& frames) const {
  if (static_cast<int>(frames.size()) != cfg_.sequence_len)
    throw ShapeError("discriminate: expected " + std::to_string(cfg_.sequence_len) +
                     " frames, got " + std::to_string(frames.size()));
  Tensor<T> cur = concat(frames, 1);
  for (int s = 0; s < 4; ++s) {
    const std::string stage = "c" + std::to_string(s + 1);
    cur = leaky_relu(conv2d(cur, params_.get(stage + ".k"), params_.get(stage + ".b"), 2, 1));
  }
  return sigmoid(dense(flatten2(cur), params_.get("out.w"), params_.get("out.b")));
}

#define ACVG_INSTANTIATE_LOSSES(T)                                                       \
  template Tensor<T> recon_image_loss(const std::vector<Tensor<T>>&,                     \
                                      const std::vector<Tensor<T>>&, int, int);          \
  template Tensor<T> recon_flow_loss(const std::vector<Tensor<T>>&,                      \
                                     const std::vector<Tensor<T>>&, int, int);           \
  template Tensor<T> action_loss(const std::vector<Tensor<T>>&,                          \
                                 const std::vector<Tensor<T>>&);                         \
  template Tensor<T> adversarial_gen_loss(const Tensor<T>&);                             \
  template Tensor<T> discriminator_loss(const Tensor<T>&, const Tensor<T>&);             \
  template class Discriminator<T>;

ACVG_INSTANTIATE_LOSSES(float)
ACVG_INSTANTIATE_LOSSES(double)

#undef ACVG_INSTANTIATE_LOSSES

}  // namespace acvg
