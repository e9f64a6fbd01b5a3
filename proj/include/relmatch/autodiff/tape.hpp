#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "relmatch/autodiff/tensor.hpp"

namespace relmatch::ad {

/// Ordered record of executed primitives, replayed in reverse by backward().
///
/// A non-recording tape turns every primitive into a plain forward function,
/// which is what frozen-model scoring uses.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return records_.size(); }

  /// True when an op over `inputs` must be recorded.
  bool wants(std::initializer_list<const Tensor*> inputs) const;
  bool wants(std::span<const Tensor> inputs) const;

  void record(std::string op, std::vector<Tensor> inputs, std::vector<Tensor> outputs,
              BackwardFn fn);

  /// Backpropagates from a scalar loss.
  void backward(const Tensor& loss);
  /// Backpropagates from an arbitrary output seeded with `seed` (same numel).
  void backward_from(const Tensor& output, std::span<const double> seed);
  /// Same, for several outputs at once.
  void backward_from(std::span<const Tensor> outputs, std::span<const std::vector<double>> seeds);

  void reset();

 private:
  struct Record {
    std::string op;
    std::vector<Tensor> inputs;
    std::vector<Tensor> outputs;
    BackwardFn fn;
  };

  bool recording_;
  bool consumed_ = false;
  std::vector<Record> records_;
};

}  // namespace relmatch::ad
