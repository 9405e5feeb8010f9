#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "stv/error.hpp"

namespace stv {

class WorkerPool;

using Shape = std::vector<std::size_t>;

enum class DType { f32, f64 };

template <typename S>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<S, float> || std::is_same_v<S, double>, "f32 or f64 only");
  return std::is_same_v<S, float> ? DType::f32 : DType::f64;
}

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array. A rank-0 tensor (empty shape) holds one scalar.
template <typename S>
class Tensor {
 public:
  using value_type = S;

  Tensor() : data_(1, S(0)) {}
  explicit Tensor(Shape shape, S fill = S(0));
  Tensor(Shape shape, std::vector<S> data);

  static Tensor scalar(S v) { return Tensor(Shape{}, std::vector<S>{v}); }
  static Tensor vector(std::initializer_list<S> values) {
    return Tensor(Shape{values.size()}, std::vector<S>(values));
  }

  static constexpr DType dtype() { return dtype_of<S>(); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<S> data() noexcept { return data_; }
  std::span<const S> data() const noexcept { return data_; }
  const std::vector<S>& values() const noexcept { return data_; }

  S& operator[](std::size_t i) { return data_[i]; }
  const S& operator[](std::size_t i) const { return data_[i]; }

  /// Bounds-checked multi-index access.
  S& at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
  const S& at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

  S item() const;

  /// Copy with a new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;

  template <typename T>
  Tensor<T> cast() const {
    std::vector<T> out(data_.begin(), data_.end());
    return Tensor<T>(shape_, std::move(out));
  }

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<S> data_;
};

/// Throws Error("non_finite") naming `what` when t holds NaN or Inf.
template <typename S>
void require_finite(const Tensor<S>& t, const char* what);

/// Throws Error("shape_mismatch") unless the shapes are identical.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

// Softmax along one axis, max-subtracted.
template <typename S>
Tensor<S> softmax(const Tensor<S>& x, std::size_t axis);

/// Rank-2 product; rows of the output may be computed on `pool`.
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b, WorkerPool* pool = nullptr);

/// Zero-padded 2-D convolution of an H×W×Cin input with k×k×Cin×Cout kernels.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& kernels, std::size_t stride,
                 std::size_t padding, WorkerPool* pool = nullptr);

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding);

/// H×W×D → D: per-channel mean over the spatial positions.
template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x);

/// T×H×W×D → T×D: global_avg_pool applied to every frame.
template <typename S>
Tensor<S> frame_avg_pool(const Tensor<S>& x);

// Elementwise helpers; shapes must match exactly.
template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S>
Tensor<S> scale(const Tensor<S>& a, S factor);
template <typename S>
Tensor<S> transpose(const Tensor<S>& a);

template <typename S>
S max_abs_diff(const Tensor<S>& a, const Tensor<S>& b);

}  // namespace stv
