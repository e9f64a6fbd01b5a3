#include "relmatch/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "relmatch/error.hpp"
#include "relmatch/rng.hpp"

namespace relmatch::ad {
namespace {

using Forward = std::function<std::vector<Tensor>(Tape&, std::vector<Tensor>&)>;

struct Case {
  std::vector<Tensor> inputs;
  Forward forward;
};

Tensor random_tensor(Rng& rng, const Shape& shape, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(shape, std::move(v));
}

// Keeps samples away from the relu kink so central differences stay valid.
Tensor away_from_zero(Rng& rng, const Shape& shape) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) {
    do x = rng.uniform(-1.0, 1.0);
    while (std::abs(x) < 0.05);
  }
  return Tensor::from(shape, std::move(v));
}

void expect_shapes(Primitive op, std::span<const Shape> shapes, std::size_t n) {
  if (shapes.size() < n) {
    throw ShapeError("grad_check(" + std::string(primitive_name(op)) + "): expected " + std::to_string(n) +
                     " shape(s), got " + std::to_string(shapes.size()));
  }
}

Case make_case(Primitive op, std::span<const Shape> shapes, Rng& rng) {
  switch (op) {
    case Primitive::matmul:
      expect_shapes(op, shapes, 2);
      return {{random_tensor(rng, shapes[0]), random_tensor(rng, shapes[1])},
              [](Tape& t, std::vector<Tensor>& in) { return std::vector{matmul(t, in[0], in[1])}; }};
    case Primitive::add:
      expect_shapes(op, shapes, 2);
      return {{random_tensor(rng, shapes[0]), random_tensor(rng, shapes[1])},
              [](Tape& t, std::vector<Tensor>& in) { return std::vector{add(t, in[0], in[1])}; }};
    case Primitive::relu:
      expect_shapes(op, shapes, 1);
      return {{away_from_zero(rng, shapes[0])},
              [](Tape& t, std::vector<Tensor>& in) { return std::vector{relu(t, in[0])}; }};
    case Primitive::tanh:
      expect_shapes(op, shapes, 1);
      return {{random_tensor(rng, shapes[0], -2.0, 2.0)},
              [](Tape& t, std::vector<Tensor>& in) { return std::vector{tanh(t, in[0])}; }};
    case Primitive::sigmoid:
      expect_shapes(op, shapes, 1);
      return {{random_tensor(rng, shapes[0], -3.0, 3.0)},
              [](Tape& t, std::vector<Tensor>& in) { return std::vector{sigmoid(t, in[0])}; }};
    case Primitive::sum:
      expect_shapes(op, shapes, 1);
      return {{random_tensor(rng, shapes[0])},
              [](Tape& t, std::vector<Tensor>& in) { return std::vector{sum(t, in[0])}; }};
    case Primitive::conv2d: {
      expect_shapes(op, shapes, 2);
      Shape bias_shape{shapes[1].at(0)};
      return {{random_tensor(rng, shapes[0]), random_tensor(rng, shapes[1]), random_tensor(rng, bias_shape)},
              [](Tape& t, std::vector<Tensor>& in) { return std::vector{conv2d(t, in[0], in[1], in[2])}; }};
    }
    case Primitive::dynamic_maxpool2d: {
      expect_shapes(op, shapes, 2);
      const std::size_t rows = shapes[1].at(0), cols = shapes[1].at(1);
      return {{random_tensor(rng, shapes[0])}, [rows, cols](Tape& t, std::vector<Tensor>& in) {
                return std::vector{dynamic_maxpool2d(t, in[0], rows, cols)};
              }};
    }
    case Primitive::concat: {
      expect_shapes(op, shapes, 2);
      std::size_t axis = 0;
      for (std::size_t d = 0; d < shapes[0].size(); ++d) {
        if (shapes[1].at(d) != shapes[0][d]) {
          axis = d;
          break;
        }
      }
      std::vector<Tensor> ins;
      for (const Shape& s : shapes) ins.push_back(random_tensor(rng, s));
      return {ins, [axis](Tape& t, std::vector<Tensor>& in) { return std::vector{concat(t, in, axis)}; }};
    }
    case Primitive::reshape: {
      expect_shapes(op, shapes, 2);
      Shape target = shapes[1];
      return {{random_tensor(rng, shapes[0])},
              [target](Tape& t, std::vector<Tensor>& in) { return std::vector{reshape(t, in[0], target)}; }};
    }
    case Primitive::embedding_gather: {
      expect_shapes(op, shapes, 2);
      std::vector<std::size_t> ids(shapes[1].at(0));
      for (auto& id : ids) id = rng.uniform_index(shapes[0].at(0));
      return {{random_tensor(rng, shapes[0])}, [ids](Tape& t, std::vector<Tensor>& in) {
                return std::vector{embedding_gather(t, in[0], ids)};
              }};
    }
    case Primitive::cosine_similarity:
      expect_shapes(op, shapes, 2);
      return {{random_tensor(rng, shapes[0]), random_tensor(rng, shapes[1])},
              [](Tape& t, std::vector<Tensor>& in) { return std::vector{cosine_similarity(t, in[0], in[1])}; }};
    case Primitive::lstm_cell: {
      expect_shapes(op, shapes, 2);
      const std::size_t in_dim = shapes[0].at(1), hidden = shapes[1].at(1);
      return {{random_tensor(rng, shapes[0]), random_tensor(rng, shapes[1]), random_tensor(rng, shapes[1]),
               random_tensor(rng, {in_dim + hidden, 4 * hidden}, -0.5, 0.5),
               random_tensor(rng, {4 * hidden}, -0.5, 0.5)},
              [](Tape& t, std::vector<Tensor>& in) {
                auto [h, c] = lstm_cell(t, in[0], in[1], in[2], in[3], in[4]);
                return std::vector{h, c};
              }};
    }
    case Primitive::affine_combine: {
      expect_shapes(op, shapes, 1);
      const std::size_t n = shapes[0].at(0);
      std::vector<Tensor> ins;
      for (std::size_t i = 0; i < 2 * n + 1; ++i) ins.push_back(random_tensor(rng, {1}));
      return {ins, [n](Tape& t, std::vector<Tensor>& in) {
                std::span<const Tensor> all(in);
                return std::vector{affine_combine(t, all.subspan(0, n), all.subspan(n, n), in[2 * n])};
              }};
    }
  }
  throw Error("grad_check: unknown primitive");
}

double weighted_loss(const std::vector<Tensor>& outputs, const std::vector<std::vector<double>>& weights) {
  double loss = 0.0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    auto y = outputs[k].data();
    for (std::size_t i = 0; i < y.size(); ++i) loss += weights[k][i] * y[i];
  }
  return loss;
}

}  // namespace

double grad_check(Primitive op, std::span<const Shape> shapes, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(op)}));
  Case c = make_case(op, shapes, rng);

  for (Tensor& t : c.inputs) t.set_requires_grad(true);
  Tape tape;
  std::vector<Tensor> outputs = c.forward(tape, c.inputs);
  std::vector<std::vector<double>> weights;
  for (const Tensor& out : outputs) {
    std::vector<double> w(out.numel());
    for (double& x : w) x = rng.uniform(-1.0, 1.0);
    weights.push_back(std::move(w));
  }
  tape.backward_from(outputs, weights);

  std::vector<std::vector<double>> analytic;
  for (Tensor& t : c.inputs) {
    analytic.emplace_back(t.grad().begin(), t.grad().end());
    t.set_requires_grad(false);
  }

  double worst = 0.0;
  Tape plain(false);
  for (std::size_t k = 0; k < c.inputs.size(); ++k) {
    auto x = c.inputs[k].data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double saved = x[i];
      x[i] = saved + kGradCheckStep;
      const double up = weighted_loss(c.forward(plain, c.inputs), weights);
      x[i] = saved - kGradCheckStep;
      const double down = weighted_loss(c.forward(plain, c.inputs), weights);
      x[i] = saved;
      const double numeric = (up - down) / (2.0 * kGradCheckStep);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

std::vector<std::vector<Shape>> standard_gradcheck_shapes(Primitive op) {
  switch (op) {
    case Primitive::matmul:
      return {{{4, 3}, {3, 5}}, {{1, 6}, {6, 1}}, {{2, 7}, {7, 3}}};
    case Primitive::add:
      return {{{3, 4}, {3, 4}}, {{3, 4}, {4}}, {{2, 3, 4}, {3, 4}}};
    case Primitive::relu:
    case Primitive::tanh:
    case Primitive::sigmoid:
    case Primitive::sum:
      return {{{5}}, {{3, 4}}, {{2, 3, 3}}};
    case Primitive::conv2d:
      return {{{1, 4, 4}, {1, 1, 1, 1}}, {{2, 6, 5}, {3, 2, 3, 3}}, {{2, 3, 7}, {2, 2, 2, 2}}};
    case Primitive::dynamic_maxpool2d:
      return {{{6, 6}, {2, 2}}, {{2, 7, 5}, {4, 4}}, {{3, 2, 9}, {4, 3}}};
    case Primitive::concat:
      return {{{2, 3}, {4, 3}}, {{2, 3}, {2, 5}}, {{2, 3, 4}, {2, 3, 4}, {2, 3, 4}}};
    case Primitive::reshape:
      return {{{2, 6}, {3, 4}}, {{12}, {2, 2, 3}}, {{2, 3, 4}, {24}}};
    case Primitive::embedding_gather:
      return {{{5, 3}, {4}}, {{3, 6}, {7}}, {{10, 2}, {1}}};
    case Primitive::cosine_similarity:
      return {{{6}, {6}}, {{3, 5}, {4, 5}}, {{1, 8}, {2, 8}}};
    case Primitive::lstm_cell:
      return {{{1, 3}, {1, 2}}, {{1, 5}, {1, 4}}, {{1, 1}, {1, 3}}};
    case Primitive::affine_combine:
      return {{{1}}, {{2}}, {{5}}};
  }
  return {};
}

std::vector<GradCheckRow> run_gradcheck_suite(std::size_t seeds, double tolerance) {
  std::vector<GradCheckRow> rows;
  for (Primitive op : all_primitives()) {
    GradCheckRow row{op};
    for (const auto& shapes : standard_gradcheck_shapes(op)) {
      for (std::size_t s = 0; s < seeds; ++s) {
        row.max_rel_error = std::max(row.max_rel_error, grad_check(op, shapes, s + 1));
        ++row.cases;
      }
    }
    row.passed = row.max_rel_error < tolerance;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace relmatch::ad
