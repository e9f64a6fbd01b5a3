#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relmatch/autodiff/ops.hpp"

namespace relmatch::ad {

inline constexpr double kGradCheckStep = 1e-5;

/// Compares backward() against central differences for one primitive.
///
/// `shapes` describes the operands; how it is read depends on the primitive:
///   matmul, add, cosine_similarity  {a, b}
///   relu, tanh, sigmoid, sum        {x}
///   conv2d                          {input [C,H,W], kernels [O,C,k,k]}; bias is [O]
///   dynamic_maxpool2d               {input, {rows, cols}}
///   concat                          {t0, t1, ...}; axis is the first differing dim
///   reshape                         {x, target}
///   embedding_gather                {table [V,d], {n}}; ids are drawn at random
///   lstm_cell                       {x [1,in], h [1,H]}
///   affine_combine                  {{n}} terms
///
/// Returns max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over
/// every differentiable input coordinate.
double grad_check(Primitive op, std::span<const Shape> shapes, std::uint64_t seed);

/// At least three shape configurations per primitive.
std::vector<std::vector<Shape>> standard_gradcheck_shapes(Primitive op);

struct GradCheckRow {
  Primitive op;
  std::size_t cases = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

std::vector<GradCheckRow> run_gradcheck_suite(std::size_t seeds, double tolerance);

}  // namespace relmatch::ad
