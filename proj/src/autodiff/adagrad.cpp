#include "relmatch/autodiff/adagrad.hpp"

#include <cmath>

#include "relmatch/error.hpp"

namespace relmatch::ad {

Adagrad::Adagrad(std::vector<NamedParam> params, double learning_rate, double epsilon)
    : params_(std::move(params)), lr_(learning_rate), eps_(epsilon) {
  if (!(learning_rate >= 0.0)) throw Error("adagrad: learning rate must be non-negative");
  if (!(epsilon > 0.0)) throw Error("adagrad: epsilon must be positive");
  acc_.reserve(params_.size());
  for (const auto& p : params_) acc_.emplace_back(p.tensor.numel(), 0.0);
}

void Adagrad::step(Tape* tape) {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) throw Error("adagrad: parameter '" + p.name + "' has no gradient");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor t = params_[k].tensor;
    auto value = t.data();
    auto g = t.grad();
    auto& acc = acc_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (g[i] == 0.0) continue;
      acc[i] += g[i] * g[i];
      value[i] -= lr_ * g[i] / (std::sqrt(acc[i]) + eps_);
    }
    t.zero_grad();
  }
  if (tape) tape->reset();
}

}  // namespace relmatch::ad
