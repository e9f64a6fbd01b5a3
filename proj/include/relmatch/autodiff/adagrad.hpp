#pragma once

#include <string>
#include <vector>

#include "relmatch/autodiff/tape.hpp"
#include "relmatch/autodiff/tensor.hpp"

namespace relmatch::ad {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

/// Adagrad with per-coordinate squared-gradient accumulators:
///   acc += g^2;  p -= lr * g / (sqrt(acc) + eps)
class Adagrad {
 public:
  Adagrad(std::vector<NamedParam> params, double learning_rate, double epsilon = 1e-8);

  /// Applies one update, zeroes gradients and resets `tape` if given.
  /// Throws if a registered parameter carries no gradient.
  void step(Tape* tape = nullptr);

  double learning_rate() const { return lr_; }
  const std::vector<NamedParam>& params() const { return params_; }
  const std::vector<double>& accumulator(std::size_t i) const { return acc_.at(i); }

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> acc_;
  double lr_;
  double eps_;
};

}  // namespace relmatch::ad
