#include <doctest.h>

#include <cmath>

#include "acvg/actor.hpp"
#include "test_util.hpp"

using namespace acvg;
using testutil::rand_tensor;

namespace {

ActorConfig tiny_cfg() {
  ActorConfig cfg;
  cfg.action_dim = 2;
  cfg.lstm_hidden = 3;
  cfg.chi_channels = 8;
  cfg.chi_h = 4;
  cfg.chi_w = 4;
  cfg.chi_stages = 1;
  cfg.chi_widths = {4, 4};
  cfg.dense_hidden = 6;
  return cfg;
}

Actor<float> make_actor(std::uint64_t seed = 1) {
  Rng rng(seed);
  return Actor<float>(tiny_cfg(), rng);
}

void zero_params(ParamStore<float>& ps) {
  for (auto& [name, e] : ps.entries())
    for (auto& v : e.value.vec()) v = 0.0f;
}

}  // namespace

TEST_CASE("rec_step: zero parameters and zero state stay at zero") {
  Actor<float> actor = make_actor();
  zero_params(actor.params());
  ActorState<float> st = actor.initial_state(1);
  Rng rng(2);
  Tensor<float> alpha = actor.rec_step(rand_tensor<float>({1, 2}, rng), st);
  for (float v : alpha.vec()) CHECK(v == 0.0f);
  for (float v : st.c.vec()) CHECK(v == 0.0f);
}

TEST_CASE("rec_step is deterministic for a fixed input and state") {
  Actor<float> actor = make_actor();
  Rng rng(3);
  Tensor<float> a = rand_tensor<float>({1, 2}, rng);
  ActorState<float> s1 = actor.initial_state(1);
  ActorState<float> s2 = actor.initial_state(1);
  CHECK(testutil::bitwise_equal(actor.rec_step(a, s1), actor.rec_step(a, s2)));
}

TEST_CASE("rec_step rejects mismatched action dimensions") {
  Actor<float> actor = make_actor();
  ActorState<float> st = actor.initial_state(1);
  Rng rng(4);
  CHECK_THROWS_AS(actor.rec_step(rand_tensor<float>({1, 3}, rng), st), ShapeError);
}

TEST_CASE("decode: zero parameters give the zero action; outputs bounded by tanh") {
  Actor<float> actor = make_actor();
  Rng rng(5);
  Tensor<float> chi = rand_tensor<float>({1, 8, 4, 4}, rng, -3.0, 3.0);
  Tensor<float> alpha = rand_tensor<float>({1, 3}, rng);

  Actor<float> zeroed = make_actor();
  zero_params(zeroed.params());
  Tensor<float> zero_out = zeroed.decode(chi, alpha);
  for (float v : zero_out.vec()) CHECK(v == 0.0f);

  for (int trial = 0; trial < 10; ++trial) {
    Rng tr = rng.split(static_cast<std::uint64_t>(trial));
    Tensor<float> out = actor.decode(rand_tensor<float>({1, 8, 4, 4}, tr, -5.0, 5.0),
                                     rand_tensor<float>({1, 3}, tr, -5.0, 5.0));
    for (float v : out.vec()) {
      CHECK(v > -1.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("decode: gradient reaches both the latent and the recurrent state") {
  Actor<float> actor = make_actor(7);
  Rng rng(6);
  Tensor<float> chi = rand_tensor<float>({1, 8, 4, 4}, rng).set_requires_grad(true);
  Tensor<float> alpha = rand_tensor<float>({1, 3}, rng).set_requires_grad(true);
  backward(sum(square(actor.decode(chi, alpha))));
  double chi_norm = 0.0, alpha_norm = 0.0;
  for (float g : chi.grad()) chi_norm += std::abs(g);
  for (float g : alpha.grad()) alpha_norm += std::abs(g);
  CHECK(chi_norm > 0.0);
  CHECK(alpha_norm > 0.0);
}

TEST_CASE("provider rollout: bounded outputs, zero-parameter degenerate case, determinism") {
  Actor<float> actor = make_actor(8);
  Rng rng(9);
  std::vector<Tensor<float>> past;
  for (int k = 0; k < 4; ++k) past.push_back(rand_tensor<float>({1, 2}, rng, -0.9, 0.9));

  auto drive = [&](const Actor<float>& a) {
    ActorActionProvider<float> prov(a, past);
    std::vector<Tensor<float>> served;
    for (int t = 0; t < 5; ++t) {
      served.push_back(prov.action(t));
      Rng cr = rng.split(static_cast<std::uint64_t>(100 + t));
      // A fresh pseudo-latent per step; the provider only reads it in observe.
      prov.observe_chi(t, testutil::rand_tensor<float>({1, 8, 4, 4}, cr));
    }
    return std::make_pair(served, prov.predicted());
  };

  auto [served, predicted] = drive(actor);
  CHECK(served.size() == 5);
  CHECK(predicted.size() == 5);
  CHECK(testutil::bitwise_equal(served[0], past.back()));  // ground-truth first step
  for (const auto& a : predicted)
    for (float v : a.vec()) {
      CHECK(v > -1.0f);
      CHECK(v < 1.0f);
    }

  Actor<float> zeroed = make_actor(8);
  zero_params(zeroed.params());
  auto [served0, predicted0] = drive(zeroed);
  for (std::size_t t = 0; t < predicted0.size(); ++t)
    for (float v : predicted0[t].vec()) CHECK(v == 0.0f);

  auto [served_b, predicted_b] = drive(actor);
  for (std::size_t t = 0; t < served.size(); ++t)
    CHECK(testutil::bitwise_equal(served[t], served_b[t]));
}

TEST_CASE("provider causality: a later latent cannot change an earlier action") {
  Actor<float> actor = make_actor(10);
  Rng rng(11);
  std::vector<Tensor<float>> past;
  for (int k = 0; k < 3; ++k) past.push_back(rand_tensor<float>({1, 2}, rng, -0.9, 0.9));
  std::vector<Tensor<float>> latents;
  for (int t = 0; t < 4; ++t) latents.push_back(rand_tensor<float>({1, 8, 4, 4}, rng));

  auto run = [&](const std::vector<Tensor<float>>& chis) {
    ActorActionProvider<float> prov(actor, past);
    std::vector<Tensor<float>> served;
    for (int t = 0; t < 4; ++t) {
      served.push_back(prov.action(t));
      prov.observe_chi(t, chis[static_cast<std::size_t>(t)]);
    }
    return served;
  };

  std::vector<Tensor<float>> perturbed = latents;
  perturbed[3] = rand_tensor<float>({1, 8, 4, 4}, rng);  // only the last latent differs
  auto a = run(latents);
  auto b = run(perturbed);
  for (int t = 0; t <= 3; ++t)  // actions up to and including t=3 precede latent 3
    CHECK(testutil::bitwise_equal(a[static_cast<std::size_t>(t)], b[static_cast<std::size_t>(t)]));
}

TEST_CASE("provider enforces the serve/observe ordering") {
  Actor<float> actor = make_actor(12);
  Rng rng(13);
  std::vector<Tensor<float>> past = {rand_tensor<float>({1, 2}, rng),
                                     rand_tensor<float>({1, 2}, rng)};
  ActorActionProvider<float> prov(actor, past);
  CHECK_THROWS_AS(prov.observe_chi(0, rand_tensor<float>({1, 8, 4, 4}, rng)), ProviderError);
  prov.action(0);
  CHECK_THROWS_AS(prov.action(1), ProviderError);  // step 0 not yet observed
}
