#pragma once

// SGD with momentum and (optionally masked) decoupled-from-nothing classic
// weight decay: g <- grad + wd * param; v <- momentum * v + g;
// param <- param - lr * v.

#include <cstdint>
#include <vector>

#include "fsmb/errors.hpp"
#include "fsmb/tensor.hpp"

namespace fsmb {

template <class S>
struct SgdStateT {
  std::vector<std::vector<S>> velocity;  // aligned with the parameter list

  void ensure(const std::vector<TensorT<S>*>& params) {
    if (velocity.empty()) {
      velocity.reserve(params.size());
      for (auto* p : params) velocity.emplace_back(p->size(), S(0));
      return;
    }
    if (velocity.size() != params.size()) {
      throw ContractError("optimizer state does not match parameter list");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (velocity[i].size() != params[i]->size()) {
        throw ContractError("velocity buffer shape does not mirror parameter " + std::to_string(i));
      }
    }
  }
};

// apply_weight_decay is per-parameter; biases and temperatures pass false.
// An empty mask applies decay everywhere.
template <class S>
void sgd_step(const std::vector<TensorT<S>*>& params, SgdStateT<S>& state, double lr,
              double momentum, double weight_decay,
              const std::vector<std::uint8_t>& apply_weight_decay = {}) {
  if (!apply_weight_decay.empty() && apply_weight_decay.size() != params.size()) {
    throw ContractError("weight decay mask does not match parameter list");
  }
  state.ensure(params);
  const S lr_s = static_cast<S>(lr);
  const S mu = static_cast<S>(momentum);
  const S wd = static_cast<S>(weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    TensorT<S>& p = *params[i];
    const auto& grad = p.grad();
    if (grad.empty()) continue;  // parameter did not participate in this step
    auto& vals = p.mutable_values();
    auto& vel = state.velocity[i];
    const bool decay = wd != S(0) && (apply_weight_decay.empty() || apply_weight_decay[i]);
    for (std::size_t j = 0; j < vals.size(); ++j) {
      S g = grad[j];
      if (decay) g += wd * vals[j];
      vel[j] = mu * vel[j] + g;
      vals[j] -= lr_s * vel[j];
    }
  }
}

using SgdState = SgdStateT<float>;

}  // namespace fsmb
