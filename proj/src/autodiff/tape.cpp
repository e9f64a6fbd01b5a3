#include "relmatch/autodiff/tape.hpp"

#include <algorithm>

#include "relmatch/error.hpp"

namespace relmatch::ad {

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

bool Tape::wants(std::span<const Tensor> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

void Tape::record(std::string op, std::vector<Tensor> inputs, std::vector<Tensor> outputs, BackwardFn fn) {
  if (consumed_) throw Error("tape: record after backward without reset");
  records_.push_back({std::move(op), std::move(inputs), std::move(outputs), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  const double one = 1.0;
  backward_from(loss, std::span<const double>(&one, 1));
}

void Tape::backward_from(const Tensor& output, std::span<const double> seed) {
  const Tensor outputs[] = {output};
  const std::vector<double> seeds[] = {std::vector<double>(seed.begin(), seed.end())};
  backward_from(outputs, seeds);
}

void Tape::backward_from(std::span<const Tensor> outputs, std::span<const std::vector<double>> seeds) {
  if (consumed_) throw Error("backward: tape already consumed; call reset() first");
  if (records_.empty()) throw Error("backward: tape is empty");
  if (outputs.size() != seeds.size()) throw Error("backward: one seed per output required");
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (seeds[k].size() != outputs[k].numel()) throw ShapeError("backward: seed size does not match output");
    Tensor out = outputs[k];
    auto g = out.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += seeds[k][i];
  }
  consumed_ = true;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    bool any_grad = std::any_of(it->outputs.begin(), it->outputs.end(),
                                [](const Tensor& t) { return t.has_grad(); });
    if (any_grad) it->fn();
  }
}

void Tape::reset() {
  records_.clear();
  consumed_ = false;
}

}  // namespace relmatch::ad
