#include "acvg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "acvg/actor.hpp"
#include "acvg/generator.hpp"
#include "acvg/losses.hpp"
#include "acvg/rng.hpp"

namespace acvg {

double grad_check(const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f,
                  std::vector<Tensor<double>> inputs, double eps) {
  for (auto& t : inputs) t.set_requires_grad(true);
  Tensor<double> loss = f(inputs);
  if (loss.numel() != 1) throw ShapeError("grad_check: closure must return a scalar");
  if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
  backward(loss);

  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs)
    analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(t.numel(), 0.0));

  double max_rel = 0.0;
  NoGradGuard ng;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& values = inputs[k].vec();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = f(inputs).item();
      values[i] = orig - eps;
      const double down = f(inputs).item();
      values[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("grad_check: non-finite perturbed loss");
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

namespace {

Tensor<double> random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t = Tensor<double>::zeros(s);
  for (auto& v : t.vec()) v = rng.uniform(lo, hi);
  return t;
}

// Resample until `ok` holds, so finite differences never straddle a kink
// (pooling ties, |.| at zero, leaky-relu corner).
template <typename GenFn, typename OkFn>
std::vector<Tensor<double>> sample_smooth(std::uint64_t seed, GenFn gen, OkFn ok) {
  for (int attempt = 0; attempt < 500; ++attempt) {
    Rng rng = Rng(seed).split(static_cast<std::uint64_t>(attempt) + 17);
    auto inputs = gen(rng);
    if (ok(inputs)) return inputs;
  }
  throw NumericError("grad_check: could not sample kink-free inputs");
}

bool min_window_separation(const Tensor<double>& x, double margin) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const double* p = x.data();
  for (int nc = 0; nc < N * C; ++nc) {
    const double* plane = p + static_cast<std::size_t>(nc) * H * W;
    for (int h = 0; h < H; h += 2)
      for (int w = 0; w < W; w += 2) {
        const double v[4] = {plane[h * W + w], plane[h * W + w + 1], plane[(h + 1) * W + w],
                             plane[(h + 1) * W + w + 1]};
        for (int a = 0; a < 4; ++a)
          for (int b = a + 1; b < 4; ++b)
            if (std::abs(v[a] - v[b]) < margin) return false;
      }
  }
  return true;
}

bool all_away_from(const Tensor<double>& x, double point, double margin) {
  for (double v : x.vec())
    if (std::abs(v - point) < margin) return false;
  return true;
}

bool abs_diff_margins(const Tensor<double>& target, const Tensor<double>& pred, double margin) {
  // Kink arguments of the reconstruction loss when only `pred` is perturbed:
  // the elementwise difference, the prediction's own neighbor differences and
  // the outer difference of absolute neighbor differences.
  {
    const double* t = target.data();
    const double* p = pred.data();
    for (std::size_t i = 0; i < target.numel(); ++i)
      if (std::abs(t[i] - p[i]) < margin) return false;
  }
  const int N = target.dim(0), C = target.dim(1), H = target.dim(2), W = target.dim(3);
  auto at = [&](const Tensor<double>& x, int nc, int h, int w) {
    return x.data()[static_cast<std::size_t>(nc) * H * W + static_cast<std::size_t>(h) * W + w];
  };
  for (int nc = 0; nc < N * C; ++nc) {
    for (int h = 0; h + 1 < H; ++h)
      for (int w = 0; w < W; ++w) {
        const double dp = at(pred, nc, h + 1, w) - at(pred, nc, h, w);
        const double dt = at(target, nc, h + 1, w) - at(target, nc, h, w);
        if (std::abs(dp) < margin || std::abs(std::abs(dt) - std::abs(dp)) < margin) return false;
      }
    for (int h = 0; h < H; ++h)
      for (int w = 0; w + 1 < W; ++w) {
        const double dp = at(pred, nc, h, w + 1) - at(pred, nc, h, w);
        const double dt = at(target, nc, h, w + 1) - at(target, nc, h, w);
        if (std::abs(dp) < margin || std::abs(std::abs(dt) - std::abs(dp)) < margin) return false;
      }
  }
  return true;
}

constexpr double kMargin = 2e-3;

using CheckFn = std::function<double(std::uint64_t)>;

double check_conv2d(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> inputs = {random_tensor({2, 3, 7, 7}, rng),
                                        random_tensor({4, 3, 3, 3}, rng),
                                        random_tensor({4}, rng),
                                        random_tensor({3, 3, 3, 3}, rng)};
  auto f = [](const std::vector<Tensor<double>>& in) {
    Tensor<double> y1 = conv2d(in[0], in[1], in[2], 1, 1);
    Tensor<double> y2 = conv2d(in[0], in[3], Tensor<double>(), 2, 1);  // (7+2-3)/2+1 = 4
    return add(sum(square(y1)), sum(square(y2)));
  };
  return grad_check(f, inputs);
}

double check_conv2d_transpose(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> inputs = {random_tensor({2, 4, 5, 5}, rng),
                                        random_tensor({4, 3, 3, 3}, rng),
                                        random_tensor({3}, rng)};
  auto f = [](const std::vector<Tensor<double>>& in) {
    Tensor<double> y1 = conv2d_transpose(in[0], in[1], in[2], 1, 1);
    Tensor<double> y2 = conv2d_transpose(in[0], in[1], Tensor<double>(), 2, 1);
    return add(sum(square(y1)), sum(square(y2)));
  };
  return grad_check(f, inputs);
}

double check_max_pool2d(std::uint64_t seed) {
  auto inputs = sample_smooth(
      seed, [](Rng& rng) { return std::vector<Tensor<double>>{random_tensor({2, 3, 8, 8}, rng)}; },
      [](const std::vector<Tensor<double>>& in) { return min_window_separation(in[0], kMargin); });
  auto f = [](const std::vector<Tensor<double>>& in) { return sum(square(max_pool2d(in[0]))); };
  return grad_check(f, inputs);
}

double check_upsample(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> inputs = {random_tensor({2, 3, 5, 5}, rng)};
  auto f = [](const std::vector<Tensor<double>>& in) {
    return sum(square(upsample_nearest2(in[0])));
  };
  return grad_check(f, inputs);
}

double check_dense(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> inputs = {random_tensor({3, 7}, rng), random_tensor({7, 4}, rng),
                                        random_tensor({4}, rng)};
  auto f = [](const std::vector<Tensor<double>>& in) {
    return sum(square(dense(in[0], in[1], in[2])));
  };
  return grad_check(f, inputs);
}

double check_sigmoid(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> inputs = {random_tensor({4, 9}, rng, -3.0, 3.0)};
  auto f = [](const std::vector<Tensor<double>>& in) { return sum(square(sigmoid(in[0]))); };
  return grad_check(f, inputs);
}

double check_tanh(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> inputs = {random_tensor({4, 9}, rng, -3.0, 3.0)};
  auto f = [](const std::vector<Tensor<double>>& in) { return sum(square(tanh_op(in[0]))); };
  return grad_check(f, inputs);
}

double check_leaky_relu(std::uint64_t seed) {
  auto inputs = sample_smooth(
      seed, [](Rng& rng) { return std::vector<Tensor<double>>{random_tensor({4, 9}, rng)}; },
      [](const std::vector<Tensor<double>>& in) { return all_away_from(in[0], 0.0, kMargin); });
  auto f = [](const std::vector<Tensor<double>>& in) {
    return sum(square(leaky_relu(in[0], 0.2)));
  };
  return grad_check(f, inputs);
}

double check_conv_lstm_step(std::uint64_t seed) {
  Rng rng(seed);
  const int hid = 3, cin = 2;
  std::vector<Tensor<double>> inputs = {
      random_tensor({4 * hid, cin + hid, 3, 3}, rng), random_tensor({4 * hid}, rng),
      random_tensor({1, cin, 4, 4}, rng), random_tensor({1, cin, 4, 4}, rng),
      random_tensor({1, cin, 4, 4}, rng), random_tensor({1, hid, 4, 4}, rng),
      random_tensor({1, hid, 4, 4}, rng)};
  auto f = [hid](const std::vector<Tensor<double>>& in) {
    Tensor<double> h = in[5], c = in[6];
    for (int t = 0; t < 3; ++t) {
      Tensor<double> gates = conv2d(concat<double>({in[static_cast<std::size_t>(2 + t)], h}, 1),
                                    in[0], in[1], 1, 1);
      Tensor<double> gi = sigmoid(narrow(gates, 1, 0, hid));
      Tensor<double> gf = sigmoid(narrow(gates, 1, hid, hid));
      Tensor<double> go = sigmoid(narrow(gates, 1, 2 * hid, hid));
      Tensor<double> gg = tanh_op(narrow(gates, 1, 3 * hid, hid));
      c = add(mul(gf, c), mul(gi, gg));
      h = mul(go, tanh_op(c));
    }
    return add(sum(square(h)), sum(square(c)));
  };
  return grad_check(f, inputs);
}

double check_lstm_step(std::uint64_t seed) {
  Rng rng(seed);
  const int hid = 3, m = 2;
  std::vector<Tensor<double>> inputs = {random_tensor({m + hid, 4 * hid}, rng),
                                        random_tensor({4 * hid}, rng),
                                        random_tensor({2, m}, rng),
                                        random_tensor({2, m}, rng),
                                        random_tensor({2, m}, rng),
                                        random_tensor({2, hid}, rng),
                                        random_tensor({2, hid}, rng)};
  auto f = [hid](const std::vector<Tensor<double>>& in) {
    Tensor<double> h = in[5], c = in[6];
    for (int t = 0; t < 3; ++t) {
      Tensor<double> gates = dense(concat<double>({in[static_cast<std::size_t>(2 + t)], h}, 1),
                                   in[0], in[1]);
      Tensor<double> gi = sigmoid(narrow(gates, 1, 0, hid));
      Tensor<double> gf = sigmoid(narrow(gates, 1, hid, hid));
      Tensor<double> go = sigmoid(narrow(gates, 1, 2 * hid, hid));
      Tensor<double> gg = tanh_op(narrow(gates, 1, 3 * hid, hid));
      c = add(mul(gf, c), mul(gi, gg));
      h = mul(go, tanh_op(c));
    }
    return add(sum(square(h)), sum(square(c)));
  };
  return grad_check(f, inputs);
}

double check_recon_loss(std::uint64_t seed, bool flow) {
  std::vector<Tensor<double>> targets;
  auto inputs = sample_smooth(
      seed,
      [&targets](Rng& rng) {
        targets.clear();
        std::vector<Tensor<double>> preds;
        for (int t = 0; t < 2; ++t) {
          targets.push_back(random_tensor({1, 2, 5, 5}, rng));
          preds.push_back(random_tensor({1, 2, 5, 5}, rng));
        }
        return preds;
      },
      [&targets](const std::vector<Tensor<double>>& preds) {
        for (std::size_t t = 0; t < preds.size(); ++t)
          if (!abs_diff_margins(targets[t], preds[t], kMargin)) return false;
        return true;
      });
  auto f = [&targets, flow](const std::vector<Tensor<double>>& preds) {
    Tensor<double> l1 = flow ? recon_flow_loss(targets, preds, 1, 1)
                             : recon_image_loss(targets, preds, 1, 1);
    Tensor<double> l2 = flow ? recon_flow_loss(targets, preds, 2, 2)
                             : recon_image_loss(targets, preds, 2, 2);
    return add(l1, l2);
  };
  return grad_check(f, inputs);
}

double check_action_loss(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> targets;
  std::vector<Tensor<double>> inputs;
  for (int t = 0; t < 3; ++t) {
    targets.push_back(random_tensor({2, 2}, rng));
    inputs.push_back(random_tensor({2, 2}, rng));
  }
  auto f = [&targets](const std::vector<Tensor<double>>& preds) {
    return action_loss(targets, preds);
  };
  return grad_check(f, inputs);
}

double check_adversarial_losses(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> inputs = {random_tensor({3, 1}, rng, -2.0, 2.0),
                                        random_tensor({3, 1}, rng, -2.0, 2.0)};
  auto f = [](const std::vector<Tensor<double>>& in) {
    Tensor<double> d_real = sigmoid(in[0]);
    Tensor<double> d_fake = sigmoid(in[1]);
    return add(adversarial_gen_loss(d_fake), discriminator_loss(d_real, d_fake));
  };
  return grad_check(f, inputs);
}

double check_discriminate(std::uint64_t seed) {
  Rng init_rng = Rng(seed).split(1);
  DiscriminatorConfig cfg;
  cfg.frame_channels = 1;
  cfg.frame_h = 16;
  cfg.frame_w = 16;
  cfg.sequence_len = 3;
  cfg.widths = {2, 3, 3, 4};
  auto disc = std::make_shared<Discriminator<double>>(cfg, init_rng);

  Rng rng = Rng(seed).split(2);
  std::vector<Tensor<double>> inputs;
  for (auto& [name, e] : disc->params().entries()) inputs.push_back(e.value);
  std::vector<Tensor<double>> frames;
  for (int t = 0; t < 3; ++t) frames.push_back(random_tensor({1, 1, 16, 16}, rng, 0.0, 1.0));
  auto f = [disc, frames](const std::vector<Tensor<double>>&) {
    return sum(square(disc->discriminate(frames)));
  };
  return grad_check(f, inputs);
}

// Builds a miniature generator (+ actor) pair; the check perturbs every
// parameter of both networks through a 3-step free-running rollout with a
// smooth (squared) objective.
double check_rollout(std::uint64_t seed, bool coupled) {
  GeneratorConfig gcfg;
  gcfg.frame_h = 8;
  gcfg.frame_w = 8;
  gcfg.frame_channels = 2;
  gcfg.action_dim = 2;
  gcfg.enc_widths = {2, 2, 3};
  gcfg.lstm_hidden = 2;
  Rng grng = Rng(seed).split(1);
  auto gen = std::make_shared<Generator<double>>(gcfg, grng);

  ActorConfig acfg;
  acfg.action_dim = 2;
  acfg.lstm_hidden = 2;
  acfg.chi_channels = gcfg.latent_channels();
  acfg.chi_h = gcfg.latent_h();
  acfg.chi_w = gcfg.latent_w();
  acfg.chi_stages = 0;
  acfg.dense_hidden = 4;
  Rng arng = Rng(seed).split(2);
  auto actor = std::make_shared<Actor<double>>(acfg, arng);

  Rng drng = Rng(seed).split(3);
  const int n = 2, horizon = 3;
  auto data = std::make_shared<std::vector<Tensor<double>>>();
  // Layout: n past frames, n past flows, n past actions, horizon target
  // frames, horizon target actions.
  for (int k = 0; k < n; ++k) data->push_back(random_tensor({1, 2, 8, 8}, drng, 0.05, 0.95));
  for (int k = 0; k < n; ++k)
    data->push_back(k == 0 ? Tensor<double>::zeros({1, 2, 8, 8})
                           : random_tensor({1, 2, 8, 8}, drng, -0.5, 0.5));
  for (int k = 0; k < n; ++k) data->push_back(random_tensor({1, 2}, drng, -0.9, 0.9));
  for (int k = 0; k < horizon; ++k) data->push_back(random_tensor({1, 2, 8, 8}, drng, 0.05, 0.95));
  for (int k = 0; k < horizon; ++k) data->push_back(random_tensor({1, 2}, drng, -0.9, 0.9));

  std::vector<Tensor<double>> inputs;
  for (auto& [name, e] : gen->params().entries()) inputs.push_back(e.value);
  if (coupled)
    for (auto& [name, e] : actor->params().entries()) inputs.push_back(e.value);

  auto f = [gen, actor, data, coupled, n, horizon](const std::vector<Tensor<double>>&) {
    std::vector<Tensor<double>> past_frames(data->begin(), data->begin() + n);
    std::vector<Tensor<double>> past_flows(data->begin() + n, data->begin() + 2 * n);
    std::vector<Tensor<double>> past_actions(data->begin() + 2 * n, data->begin() + 3 * n);
    std::vector<Tensor<double>> target_frames(data->begin() + 3 * n,
                                              data->begin() + 3 * n + horizon);
    std::vector<Tensor<double>> target_actions(data->begin() + 3 * n + horizon, data->end());

    GeneratorState<double> st = gen->warmup(past_frames, past_flows, past_actions);
    RolloutResult<double> rr;
    Tensor<double> loss;
    if (coupled) {
      ActorActionProvider<double> prov(*actor, past_actions);
      rr = gen->rollout(st, past_frames.back(), past_flows.back(), prov, horizon);
      loss = add(recon_image_loss(target_frames, rr.frames, 2, 2),
                 action_loss(target_actions, prov.predicted()));
    } else {
      FixedActionProvider<double> prov(past_actions.back());
      rr = gen->rollout(st, past_frames.back(), past_flows.back(), prov, horizon);
      loss = recon_image_loss(target_frames, rr.frames, 2, 2);
    }
    return loss;
  };
  return grad_check(f, inputs);
}

// Test fixture with an intentionally wrong backward rule; proves the harness
// flags a broken gradient. Excluded from the "all" set.
double check_corrupt_fixture(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor<double>> inputs = {random_tensor({3, 3}, rng)};
  auto f = [](const std::vector<Tensor<double>>& in) {
    auto impl = std::make_shared<TensorImpl<double>>();
    impl->shape = {1};
    double acc = 0.0;
    for (double v : in[0].vec()) acc += v * v;
    impl->data = {acc};
    if (grad_enabled() && in[0].impl()->tracked()) {
      auto xi = in[0].impl();
      impl->parents = {xi};
      impl->backward_fn = [xi](TensorImpl<double>& o) {
        xi->ensure_grad();
        for (std::size_t i = 0; i < xi->grad.size(); ++i)
          xi->grad[i] += o.grad[0] * 3.0 * xi->data[i];  // should be 2x
      };
    }
    return Tensor<double>(impl);
  };
  return grad_check(f, inputs);
}

const std::map<std::string, CheckFn>& registry() {
  static const std::map<std::string, CheckFn> reg = {
      {"conv2d", check_conv2d},
      {"conv2d_transpose", check_conv2d_transpose},
      {"max_pool2d", check_max_pool2d},
      {"upsample_nearest2", check_upsample},
      {"dense", check_dense},
      {"sigmoid", check_sigmoid},
      {"tanh", check_tanh},
      {"leaky_relu", check_leaky_relu},
      {"conv_lstm_step", check_conv_lstm_step},
      {"lstm_step", check_lstm_step},
      {"recon_image_loss", [](std::uint64_t s) { return check_recon_loss(s, false); }},
      {"recon_flow_loss", [](std::uint64_t s) { return check_recon_loss(s, true); }},
      {"action_loss", check_action_loss},
      {"adversarial_losses", check_adversarial_losses},
      {"discriminate", check_discriminate},
      {"generator_rollout", [](std::uint64_t s) { return check_rollout(s, false); }},
      {"coupled_rollout", [](std::uint64_t s) { return check_rollout(s, true); }},
  };
  return reg;
}

}  // namespace

std::vector<std::string> grad_check_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

GradCheckResult run_grad_check(const std::string& name, std::uint64_t seed) {
  GradCheckResult res;
  res.op = name;
  if (name == "_corrupt_fixture") {
    res.max_rel_err = check_corrupt_fixture(seed);
  } else {
    auto it = registry().find(name);
    if (it == registry().end()) throw ConfigError("unknown grad-check op: " + name);
    res.max_rel_err = it->second(seed);
  }
  res.pass = res.max_rel_err < kGradCheckTolerance;
  return res;
}

std::vector<GradCheckResult> run_all_grad_checks(std::uint64_t seed) {
  std::vector<GradCheckResult> out;
  for (const auto& [name, fn] : registry()) out.push_back(run_grad_check(name, seed));
  return out;
}

}  // namespace acvg
