#pragma once

#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace shadowae {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_str(const Shape& shape);

/// Dense row-major array with an optional gradient slot of the same shape.
///
/// Image tensors use the (N, C, H, W) layout. A scalar is shape {1}.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw std::invalid_argument("tensor: shape " + shape_str(shape_) + " holds " +
                                  std::to_string(shape_numel(shape_)) + " values, got " +
                                  std::to_string(data_.size()));
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Element access for 4-d tensors.
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  bool has_grad() const noexcept { return grad_.has_value(); }
  std::span<T> grad() { return *grad_; }
  std::span<const T> grad() const { return *grad_; }
  /// Allocates a zeroed gradient buffer if none exists and returns it.
  std::span<T> ensure_grad() {
    if (!grad_) grad_.emplace(data_.size(), T{0});
    return *grad_;
  }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), T{0});
  }
  void clear_grad() noexcept { grad_.reset(); }

  /// Reshape without copying data; the element count must match.
  void reshape(Shape shape) {
    if (shape_numel(shape) != data_.size()) {
      throw std::invalid_argument("tensor: cannot reshape " + shape_str(shape_) + " to " +
                                  shape_str(shape));
    }
    shape_ = std::move(shape);
  }

  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
  std::optional<std::vector<T>> grad_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace shadowae
