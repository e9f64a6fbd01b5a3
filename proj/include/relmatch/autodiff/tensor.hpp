#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace relmatch::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense float64 tensor with an attached, lazily allocated gradient buffer.
///
/// A Tensor is a handle: copies share storage, the way parameters are shared
/// between the model, the tape and the optimizer. Use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(impl_); }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t numel() const;

  /// Handle semantics: a const Tensor still exposes its shared buffers.
  std::span<double> data() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  /// Allocates a zero gradient on first access.
  std::span<double> grad() const;
  /// Empty span when no gradient has been allocated.
  std::span<const double> grad_view() const;
  void zero_grad();
  void drop_grad();

  Tensor clone() const;
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

  /// Throws NonFiniteError naming `context` if any value is NaN/Inf.
  void check_finite(const std::string& context) const;

 private:
  struct Storage {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> impl_;
};

}  // namespace relmatch::ad
