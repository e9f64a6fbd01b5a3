#include "relmatch/autodiff/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include <spdlog/spdlog.h>

#include "relmatch/error.hpp"

namespace relmatch::ad {
namespace {

constexpr std::array<Primitive, 14> kPrimitives = {
    Primitive::matmul,          Primitive::add,          Primitive::relu,
    Primitive::tanh,            Primitive::sigmoid,      Primitive::conv2d,
    Primitive::dynamic_maxpool2d, Primitive::concat,     Primitive::reshape,
    Primitive::sum,             Primitive::embedding_gather, Primitive::cosine_similarity,
    Primitive::lstm_cell,       Primitive::affine_combine,
};

[[noreturn]] void shape_fail(std::string_view op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_rank(std::string_view op, const char* what, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    shape_fail(op, std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                       shape_str(t.shape()));
  }
}

void require_finite(std::string_view op, const Tensor& t) { t.check_finite(std::string(op)); }

double sigmoid_scalar(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F, typename D>
Tensor unary(Tape& tape, const Tensor& x, std::string_view name, F f, D dfdx_from_y) {
  require_finite(name, x);
  const bool rec = tape.wants({&x});
  Tensor out = Tensor::zeros(x.shape(), rec);
  auto in = x.data();
  auto y = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) y[i] = f(in[i]);
  if (rec) {
    tape.record(std::string(name), {x}, {out}, [x, out, dfdx_from_y]() mutable {
      if (!x.requires_grad()) return;
      auto gy = out.grad();
      auto gx = x.grad();
      auto xv = x.data();
      auto yv = out.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * dfdx_from_y(xv[i], yv[i]);
    });
  }
  return out;
}

}  // namespace

std::string_view primitive_name(Primitive op) {
  switch (op) {
    case Primitive::matmul: return "matmul";
    case Primitive::add: return "add";
    case Primitive::relu: return "relu";
    case Primitive::tanh: return "tanh";
    case Primitive::sigmoid: return "sigmoid";
    case Primitive::conv2d: return "conv2d";
    case Primitive::dynamic_maxpool2d: return "dynamic_maxpool2d";
    case Primitive::concat: return "concat";
    case Primitive::reshape: return "reshape";
    case Primitive::sum: return "sum";
    case Primitive::embedding_gather: return "embedding_gather";
    case Primitive::cosine_similarity: return "cosine_similarity";
    case Primitive::lstm_cell: return "lstm_cell";
    case Primitive::affine_combine: return "affine_combine";
  }
  return "unknown";
}

std::optional<Primitive> parse_primitive(std::string_view name) {
  for (Primitive p : kPrimitives) {
    if (primitive_name(p) == name) return p;
  }
  return std::nullopt;
}

std::span<const Primitive> all_primitives() { return kPrimitives; }

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  constexpr std::string_view op = "matmul";
  require_rank(op, "lhs", a, 2);
  require_rank(op, "rhs", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    shape_fail(op, "inner dims differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  require_finite(op, a);
  require_finite(op, b);
  const bool rec = tape.wants({&a, &b});
  Tensor out = Tensor::zeros({m, n}, rec);
  auto av = a.data();
  auto bv = b.data();
  auto y = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] += aip * bv[p * n + j];
    }
  }
  if (rec) {
    tape.record("matmul", {a, b}, {out}, [a, b, out, m, k, n]() mutable {
      auto gy = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        auto bv = b.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += gy[i * n + j] * bv[p * n + j];
            ga[i * k + p] += acc;
          }
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        auto av = a.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * gy[i * n + j];
          }
      }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  constexpr std::string_view op = "add";
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size() || !std::equal(sb.rbegin(), sb.rend(), sa.rbegin())) {
    shape_fail(op, "cannot broadcast " + shape_str(sb) + " onto " + shape_str(sa));
  }
  require_finite(op, a);
  require_finite(op, b);
  const bool rec = tape.wants({&a, &b});
  Tensor out = Tensor::zeros(sa, rec);
  const std::size_t inner = b.numel();
  auto av = a.data();
  auto bv = b.data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i % inner];
  if (rec) {
    tape.record("add", {a, b}, {out}, [a, b, out, inner]() mutable {
      auto gy = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i % inner] += gy[i];
      }
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, "sigmoid", [](double v) { return sigmoid_scalar(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  constexpr std::string_view op = "conv2d";
  require_rank(op, "input", input, 3);
  require_rank(op, "kernels", kernels, 4);
  require_rank(op, "bias", bias, 1);
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t O = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != C) {
    shape_fail(op, "kernel channels " + shape_str(kernels.shape()) + " vs input " + shape_str(input.shape()));
  }
  if (bias.dim(0) != O) shape_fail(op, "bias " + shape_str(bias.shape()) + " vs kernels " + shape_str(kernels.shape()));
  if (kh > H || kw > W) {
    shape_fail(op, "kernel " + shape_str(kernels.shape()) + " larger than input " + shape_str(input.shape()));
  }
  require_finite(op, input);
  require_finite(op, kernels);
  require_finite(op, bias);
  const std::size_t OH = H - kh + 1, OW = W - kw + 1;
  const bool rec = tape.wants({&input, &kernels, &bias});
  Tensor out = Tensor::zeros({O, OH, OW}, rec);
  auto x = input.data();
  auto w = kernels.data();
  auto bv = bias.data();
  auto y = out.data();
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < OH; ++i)
      for (std::size_t j = 0; j < OW; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t p = 0; p < kh; ++p)
            for (std::size_t q = 0; q < kw; ++q)
              acc += w[((o * C + c) * kh + p) * kw + q] * x[(c * H + i + p) * W + j + q];
        y[(o * OH + i) * OW + j] = acc + bv[o];
      }
  if (rec) {
    tape.record("conv2d", {input, kernels, bias}, {out},
                [input, kernels, bias, out, C, H, W, O, kh, kw, OH, OW]() mutable {
                  auto gy = out.grad();
                  auto x = input.data();
                  auto w = kernels.data();
                  const bool gi = input.requires_grad(), gk = kernels.requires_grad();
                  std::span<double> gx = gi ? input.grad() : std::span<double>{};
                  std::span<double> gw = gk ? kernels.grad() : std::span<double>{};
                  for (std::size_t o = 0; o < O; ++o)
                    for (std::size_t i = 0; i < OH; ++i)
                      for (std::size_t j = 0; j < OW; ++j) {
                        const double g = gy[(o * OH + i) * OW + j];
                        for (std::size_t c = 0; c < C; ++c)
                          for (std::size_t p = 0; p < kh; ++p)
                            for (std::size_t q = 0; q < kw; ++q) {
                              const std::size_t wi = ((o * C + c) * kh + p) * kw + q;
                              const std::size_t xi = (c * H + i + p) * W + j + q;
                              if (gk) gw[wi] += g * x[xi];
                              if (gi) gx[xi] += g * w[wi];
                            }
                      }
                  if (bias.requires_grad()) {
                    auto gb = bias.grad();
                    for (std::size_t o = 0; o < O; ++o) {
                      double acc = 0.0;
                      for (std::size_t k = 0; k < OH * OW; ++k) acc += gy[o * OH * OW + k];
                      gb[o] += acc;
                    }
                  }
                });
  }
  return out;
}

std::pair<std::size_t, std::size_t> pool_band(std::size_t p, std::size_t extent, std::size_t cells) {
  const std::size_t start = p * extent / cells;
  const std::size_t stop = std::max(start + 1, (p + 1) * extent / cells);
  return {start, std::min(stop, extent)};
}

Tensor dynamic_maxpool2d(Tape& tape, const Tensor& input, std::size_t rows, std::size_t cols) {
  constexpr std::string_view op = "dynamic_maxpool2d";
  if (input.rank() != 2 && input.rank() != 3) {
    shape_fail(op, "input must be [H,W] or [C,H,W], got " + shape_str(input.shape()));
  }
  if (rows == 0 || cols == 0) shape_fail(op, "output grid must be non-empty");
  const bool planar = input.rank() == 2;
  const std::size_t C = planar ? 1 : input.dim(0);
  const std::size_t H = input.dim(planar ? 0 : 1);
  const std::size_t W = input.dim(planar ? 1 : 2);
  if (H == 0 || W == 0) shape_fail(op, "empty input " + shape_str(input.shape()));
  require_finite(op, input);
  const bool rec = tape.wants({&input});
  Shape out_shape = planar ? Shape{rows, cols} : Shape{C, rows, cols};
  Tensor out = Tensor::zeros(out_shape, rec);
  std::vector<std::size_t> argmax(out.numel());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t pr = 0; pr < rows; ++pr) {
      const auto [r0, r1] = pool_band(pr, H, rows);
      for (std::size_t pc = 0; pc < cols; ++pc) {
        const auto [c0, c1] = pool_band(pc, W, cols);
        std::size_t best = (c * H + r0) * W + c0;
        for (std::size_t i = r0; i < r1; ++i)
          for (std::size_t j = c0; j < c1; ++j) {
            const std::size_t idx = (c * H + i) * W + j;
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t o = (c * rows + pr) * cols + pc;
        y[o] = x[best];
        argmax[o] = best;
      }
    }
  if (rec) {
    tape.record("dynamic_maxpool2d", {input}, {out}, [input, out, argmax = std::move(argmax)]() mutable {
      auto gy = out.grad();
      auto gx = input.grad();
      for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
    });
  }
  return out;
}

Tensor concat(Tape& tape, std::span<const Tensor> inputs, std::size_t axis) {
  constexpr std::string_view op = "concat";
  if (inputs.empty()) shape_fail(op, "no inputs");
  const Shape& first = inputs.front().shape();
  if (axis >= first.size()) shape_fail(op, "axis " + std::to_string(axis) + " out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& t : inputs) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) shape_fail(op, "incompatible " + shape_str(s) + " vs " + shape_str(first) + " on axis " + std::to_string(axis));
    require_finite(op, t);
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const bool rec = tape.wants(inputs);
  Tensor out = Tensor::zeros(out_shape, rec);
  auto y = out.data();
  const std::size_t row = out_shape[axis] * inner;
  std::size_t offset = 0;
  for (const Tensor& t : inputs) {
    const std::size_t chunk = t.dim(axis) * inner;
    auto x = t.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(x.begin() + o * chunk, chunk, y.begin() + o * row + offset);
    offset += chunk;
  }
  if (rec) {
    std::vector<Tensor> ins(inputs.begin(), inputs.end());
    tape.record("concat", ins, {out}, [ins, out, outer, inner, row, axis]() mutable {
      auto gy = out.grad();
      std::size_t offset = 0;
      for (Tensor& t : ins) {
        const std::size_t chunk = t.dim(axis) * inner;
        if (t.requires_grad()) {
          auto gx = t.grad();
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t k = 0; k < chunk; ++k) gx[o * chunk + k] += gy[o * row + offset + k];
        }
        offset += chunk;
      }
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    shape_fail("reshape", "cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  require_finite("reshape", x);
  const bool rec = tape.wants({&x});
  Tensor out = Tensor::from(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), rec);
  if (rec) {
    tape.record("reshape", {x}, {out}, [x, out]() mutable {
      auto gy = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  require_finite("sum", x);
  const bool rec = tape.wants({&x});
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc, rec);
  if (rec) {
    tape.record("sum", {x}, {out}, [x, out]() mutable {
      const double g = out.grad()[0];
      for (double& gx : x.grad()) gx += g;
    });
  }
  return out;
}

Tensor embedding_gather(Tape& tape, const Tensor& table, std::span<const std::size_t> ids,
                        std::optional<std::size_t> frozen_row) {
  constexpr std::string_view op = "embedding_gather";
  require_rank(op, "table", table, 2);
  const std::size_t V = table.dim(0), d = table.dim(1);
  const bool rec = tape.wants({&table});
  Tensor out = Tensor::zeros({ids.size(), d}, rec);
  auto t = table.data();
  auto y = out.data();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= V) shape_fail(op, "id " + std::to_string(ids[r]) + " outside table " + shape_str(table.shape()));
    std::copy_n(t.begin() + ids[r] * d, d, y.begin() + r * d);
  }
  require_finite(op, out);
  if (rec) {
    std::vector<std::size_t> rows(ids.begin(), ids.end());
    tape.record("embedding_gather", {table}, {out}, [table, out, rows, d, frozen_row]() mutable {
      auto gy = out.grad();
      auto gt = table.grad();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (frozen_row && rows[r] == *frozen_row) continue;
        for (std::size_t k = 0; k < d; ++k) gt[rows[r] * d + k] += gy[r * d + k];
      }
    });
  }
  return out;
}

Tensor cosine_similarity(Tape& tape, const Tensor& a, const Tensor& b) {
  constexpr std::string_view op = "cosine_similarity";
  if (a.rank() < 1 || a.rank() > 2 || b.rank() < 1 || b.rank() > 2) {
    shape_fail(op, "operands must be vectors or matrices, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.rank() == 2 ? a.dim(0) : 1;
  const std::size_t n = b.rank() == 2 ? b.dim(0) : 1;
  const std::size_t d = a.shape().back();
  if (b.shape().back() != d) {
    shape_fail(op, "feature dims differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  require_finite(op, a);
  require_finite(op, b);
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> na(m), nb(n);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += av[i * d + k] * av[i * d + k];
    na[i] = std::sqrt(s);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += bv[j * d + k] * bv[j * d + k];
    nb[j] = std::sqrt(s);
  }
  const bool rec = tape.wants({&a, &b});
  Tensor out = Tensor::zeros({m, n}, rec);
  auto y = out.data();
  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (na[i] == 0.0 || nb[j] == 0.0) {
        ++degenerate;
        continue;
      }
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += av[i * d + k] * bv[j * d + k];
      y[i * n + j] = std::clamp(dot / (na[i] * nb[j]), -1.0, 1.0);
    }
  if (degenerate) spdlog::debug("cosine_similarity: {} zero-norm pair(s) scored as 0", degenerate);
  if (rec) {
    tape.record("cosine_similarity", {a, b}, {out}, [a, b, out, m, n, d, na, nb]() mutable {
      auto gy = out.grad();
      auto av = a.data();
      auto bv = b.data();
      auto y = out.data();
      const bool ga_on = a.requires_grad(), gb_on = b.requires_grad();
      std::span<double> ga = ga_on ? a.grad() : std::span<double>{};
      std::span<double> gb = gb_on ? b.grad() : std::span<double>{};
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (na[i] == 0.0 || nb[j] == 0.0) continue;
          const double g = gy[i * n + j];
          const double c = y[i * n + j];
          const double inv = 1.0 / (na[i] * nb[j]);
          // d cos / da = b/(|a||b|) - cos * a/|a|^2
          for (std::size_t k = 0; k < d; ++k) {
            const double ak = av[i * d + k], bk = bv[j * d + k];
            if (ga_on) ga[i * d + k] += g * (bk * inv - c * ak / (na[i] * na[i]));
            if (gb_on) gb[j * d + k] += g * (ak * inv - c * bk / (nb[j] * nb[j]));
          }
        }
    });
  }
  return out;
}

std::pair<Tensor, Tensor> lstm_cell(Tape& tape, const Tensor& x, const Tensor& h, const Tensor& c,
                                    const Tensor& weight, const Tensor& bias) {
  constexpr std::string_view op = "lstm_cell";
  require_rank(op, "x", x, 2);
  require_rank(op, "h", h, 2);
  require_rank(op, "c", c, 2);
  require_rank(op, "weight", weight, 2);
  require_rank(op, "bias", bias, 1);
  const std::size_t in = x.dim(1), H = h.dim(1);
  if (x.dim(0) != 1 || h.dim(0) != 1 || c.shape() != h.shape()) {
    shape_fail(op, "expects single-row x/h/c, got " + shape_str(x.shape()) + ", " + shape_str(h.shape()) + ", " +
                       shape_str(c.shape()));
  }
  if (weight.dim(0) != in + H || weight.dim(1) != 4 * H || bias.dim(0) != 4 * H) {
    shape_fail(op, "weight " + shape_str(weight.shape()) + " / bias " + shape_str(bias.shape()) +
                       " inconsistent with input " + std::to_string(in) + " and hidden " + std::to_string(H));
  }
  for (const Tensor* t : {&x, &h, &c, &weight, &bias}) require_finite(op, *t);

  const std::size_t K = in + H, G = 4 * H;
  std::vector<double> xh(K);
  std::copy(x.data().begin(), x.data().end(), xh.begin());
  std::copy(h.data().begin(), h.data().end(), xh.begin() + in);
  std::vector<double> z(bias.data().begin(), bias.data().end());
  auto w = weight.data();
  for (std::size_t r = 0; r < K; ++r) {
    const double v = xh[r];
    for (std::size_t col = 0; col < G; ++col) z[col] += v * w[r * G + col];
  }
  // gates: [i | f | o | g]
  std::vector<double> gates(G);
  for (std::size_t u = 0; u < H; ++u) {
    gates[u] = sigmoid_scalar(z[u]);
    gates[H + u] = sigmoid_scalar(z[H + u]);
    gates[2 * H + u] = sigmoid_scalar(z[2 * H + u]);
    gates[3 * H + u] = std::tanh(z[3 * H + u]);
  }
  const bool rec = tape.wants({&x, &h, &c, &weight, &bias});
  Tensor h_out = Tensor::zeros({1, H}, rec);
  Tensor c_out = Tensor::zeros({1, H}, rec);
  auto cv = c.data();
  auto hn = h_out.data();
  auto cn = c_out.data();
  std::vector<double> tc(H);
  for (std::size_t u = 0; u < H; ++u) {
    cn[u] = gates[H + u] * cv[u] + gates[u] * gates[3 * H + u];
    tc[u] = std::tanh(cn[u]);
    hn[u] = gates[2 * H + u] * tc[u];
  }
  if (rec) {
    tape.record("lstm_cell", {x, h, c, weight, bias}, {h_out, c_out},
                [x, h, c, weight, bias, h_out, c_out, xh = std::move(xh), gates = std::move(gates),
                 tc = std::move(tc), in, H, K, G]() mutable {
                  std::vector<double> dh(H, 0.0), dc(H, 0.0);
                  if (h_out.has_grad()) std::copy(h_out.grad().begin(), h_out.grad().end(), dh.begin());
                  if (c_out.has_grad()) std::copy(c_out.grad().begin(), c_out.grad().end(), dc.begin());
                  auto cv = c.data();
                  std::vector<double> dz(G);
                  std::vector<double> dc_prev(H);
                  for (std::size_t u = 0; u < H; ++u) {
                    const double ig = gates[u], fg = gates[H + u], og = gates[2 * H + u], gg = gates[3 * H + u];
                    const double dct = dc[u] + dh[u] * og * (1.0 - tc[u] * tc[u]);
                    dz[u] = dct * gg * ig * (1.0 - ig);
                    dz[H + u] = dct * cv[u] * fg * (1.0 - fg);
                    dz[2 * H + u] = dh[u] * tc[u] * og * (1.0 - og);
                    dz[3 * H + u] = dct * ig * (1.0 - gg * gg);
                    dc_prev[u] = dct * fg;
                  }
                  if (c.requires_grad()) {
                    auto gc = c.grad();
                    for (std::size_t u = 0; u < H; ++u) gc[u] += dc_prev[u];
                  }
                  if (bias.requires_grad()) {
                    auto gb = bias.grad();
                    for (std::size_t col = 0; col < G; ++col) gb[col] += dz[col];
                  }
                  if (weight.requires_grad()) {
                    auto gw = weight.grad();
                    for (std::size_t r = 0; r < K; ++r)
                      for (std::size_t col = 0; col < G; ++col) gw[r * G + col] += xh[r] * dz[col];
                  }
                  if (x.requires_grad() || h.requires_grad()) {
                    auto w = weight.data();
                    std::vector<double> dxh(K, 0.0);
                    for (std::size_t r = 0; r < K; ++r) {
                      double acc = 0.0;
                      for (std::size_t col = 0; col < G; ++col) acc += w[r * G + col] * dz[col];
                      dxh[r] = acc;
                    }
                    if (x.requires_grad()) {
                      auto gx = x.grad();
                      for (std::size_t r = 0; r < in; ++r) gx[r] += dxh[r];
                    }
                    if (h.requires_grad()) {
                      auto gh = h.grad();
                      for (std::size_t u = 0; u < H; ++u) gh[u] += dxh[in + u];
                    }
                  }
                });
  }
  return {h_out, c_out};
}

Tensor affine_combine(Tape& tape, std::span<const Tensor> weights, std::span<const Tensor> inputs,
                      const Tensor& bias) {
  constexpr std::string_view op = "affine_combine";
  if (weights.size() != inputs.size()) {
    shape_fail(op, std::to_string(weights.size()) + " weights for " + std::to_string(inputs.size()) + " inputs");
  }
  if (bias.numel() != 1) shape_fail(op, "bias must be scalar, got " + shape_str(bias.shape()));
  require_finite(op, bias);
  double acc = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (weights[i].numel() != 1 || inputs[i].numel() != 1) {
      shape_fail(op, "term " + std::to_string(i) + " not scalar: " + shape_str(weights[i].shape()) + " * " +
                         shape_str(inputs[i].shape()));
    }
    require_finite(op, weights[i]);
    require_finite(op, inputs[i]);
    acc += weights[i].data()[0] * inputs[i].data()[0];
  }
  acc += bias.data()[0];
  const bool rec = tape.wants(weights) || tape.wants(inputs) || tape.wants({&bias});
  Tensor out = Tensor::scalar(acc, rec);
  if (rec) {
    std::vector<Tensor> ws(weights.begin(), weights.end());
    std::vector<Tensor> xs(inputs.begin(), inputs.end());
    std::vector<Tensor> all = ws;
    all.insert(all.end(), xs.begin(), xs.end());
    all.push_back(bias);
    tape.record("affine_combine", all, {out}, [ws, xs, bias, out]() mutable {
      const double g = out.grad()[0];
      for (std::size_t i = 0; i < ws.size(); ++i) {
        if (ws[i].requires_grad()) ws[i].grad()[0] += g * xs[i].data()[0];
        if (xs[i].requires_grad()) xs[i].grad()[0] += g * ws[i].data()[0];
      }
      if (bias.requires_grad()) bias.grad()[0] += g;
    });
  }
  return out;
}

}  // namespace relmatch::ad
