#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "relmatch/autodiff/tape.hpp"
#include "relmatch/autodiff/tensor.hpp"

namespace relmatch::ad {

/// The closed set of differentiable primitives.
enum class Primitive {
  matmul,
  add,
  relu,
  tanh,
  sigmoid,
  conv2d,
  dynamic_maxpool2d,
  concat,
  reshape,
  sum,
  embedding_gather,
  cosine_similarity,
  lstm_cell,
  affine_combine,
};

std::string_view primitive_name(Primitive op);
std::optional<Primitive> parse_primitive(std::string_view name);
std::span<const Primitive> all_primitives();

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// `b` is broadcast over the leading dims of `a`; its shape must equal a
/// trailing suffix of a's shape.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);

Tensor relu(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);

/// Valid-padding, stride-1 convolution (cross-correlation).
/// input [C,H,W], kernels [O,C,k,k], bias [O] -> [O, H-k+1, W-k+1].
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernels, const Tensor& bias);

/// Row band p of an H-row map covers [floor(p*H/P), max(start+1, floor((p+1)*H/P))).
/// The same rule applies to columns. Maps smaller than the grid repeat cells.
std::pair<std::size_t, std::size_t> pool_band(std::size_t p, std::size_t extent, std::size_t cells);

/// Max over each band cell. input [C,H,W] -> [C,rows,cols]; [H,W] -> [rows,cols].
/// Ties resolve to the first cell in row-major order.
Tensor dynamic_maxpool2d(Tape& tape, const Tensor& input, std::size_t rows, std::size_t cols);

/// Inputs share rank and all dims except `axis`.
Tensor concat(Tape& tape, std::span<const Tensor> inputs, std::size_t axis);

/// Relabels the shape of a contiguous tensor; numel must be preserved.
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

/// Sum of all entries -> [1].
Tensor sum(Tape& tape, const Tensor& x);

/// table [V,d], ids -> [n,d]. Gradient never reaches `frozen_row`.
Tensor embedding_gather(Tape& tape, const Tensor& table, std::span<const std::size_t> ids,
                        std::optional<std::size_t> frozen_row = std::nullopt);

/// Pairwise cosine between the rows of a [m,d] and b [n,d] -> [m,n].
/// A rank-1 operand counts as a single row. Zero-norm rows give 0.
Tensor cosine_similarity(Tape& tape, const Tensor& a, const Tensor& b);

/// Standard LSTM cell with gate blocks ordered (i, f, o, g).
/// x [1,in], h [1,H], c [1,H], weight [in+H, 4H], bias [4H] -> (h', c').
std::pair<Tensor, Tensor> lstm_cell(Tape& tape, const Tensor& x, const Tensor& h, const Tensor& c,
                                    const Tensor& weight, const Tensor& bias);

/// sum_i weights[i] * inputs[i] + bias, all single-element tensors -> [1].
Tensor affine_combine(Tape& tape, std::span<const Tensor> weights, std::span<const Tensor> inputs,
                      const Tensor& bias);

}  // namespace relmatch::ad
