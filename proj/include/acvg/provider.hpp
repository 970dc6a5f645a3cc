#pragma once

#include <vector>

#include "acvg/tensor.hpp"

namespace acvg {

// Supplies the normalized action consumed at each prediction step. The
// generator calls action(t) before step t and observe_chi(t, chi) after the
// step's latent has been formed, which is how an in-the-loop policy sees the
// latent it needs to produce the next action (one step delayed).
template <typename T>
struct ActionProvider {
  virtual ~ActionProvider() = default;
  virtual Tensor<T> action(int t) = 0;
  virtual void observe_chi(int /*t*/, const Tensor<T>& /*chi*/) {}
};

// Replays a recorded action sequence a_0..a_{T-1}.
template <typename T>
class ReplayActionProvider : public ActionProvider<T> {
 public:
  explicit ReplayActionProvider(std::vector<Tensor<T>> actions) : actions_(std::move(actions)) {}
  Tensor<T> action(int t) override {
    if (t < 0 || t >= static_cast<int>(actions_.size()))
      throw ProviderError("replay provider exhausted at step " + std::to_string(t) + " of " +
                          std::to_string(actions_.size()));
    return actions_[static_cast<std::size_t>(t)];
  }

 private:
  std::vector<Tensor<T>> actions_;
};

// Holds the last observed action for the whole horizon.
template <typename T>
class FixedActionProvider : public ActionProvider<T> {
 public:
  explicit FixedActionProvider(Tensor<T> a0) : a0_(std::move(a0)) {}
  Tensor<T> action(int) override { return a0_; }

 private:
  Tensor<T> a0_;
};

}  // namespace acvg
