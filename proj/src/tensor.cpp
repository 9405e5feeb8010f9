#include "stv/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "stv/worker_pool.hpp"

namespace stv {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

namespace {

void check_dims(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw Error("bad_shape", "tensor dimensions must be >= 1, got " + shape_string(shape));
  }
}

}  // namespace

template <typename S>
Tensor<S>::Tensor(Shape shape, S fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_numel(shape_), fill);
}

template <typename S>
Tensor<S>::Tensor(Shape shape, std::vector<S> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw Error("bad_shape", "shape " + shape_string(shape_) + " needs " +
                                 std::to_string(shape_numel(shape_)) + " values, got " +
                                 std::to_string(data_.size()));
  }
}

template <typename S>
S Tensor<S>::item() const {
  if (data_.size() != 1) throw Error("shape_mismatch", "item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

template <typename S>
Tensor<S> Tensor<S>::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw Error("shape_mismatch", "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

template <typename S>
bool Tensor<S>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](S v) { return std::isfinite(v); });
}

template <typename S>
std::size_t Tensor<S>::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw Error("shape_mismatch", "index rank " + std::to_string(index.size()) + " for tensor " +
                                      shape_string(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw Error("out_of_range", "index out of range on axis " + std::to_string(axis));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

template <typename S>
void require_finite(const Tensor<S>& t, const char* what) {
  if (!t.all_finite()) throw Error("non_finite", std::string(what) + ": non-finite values");
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw Error("shape_mismatch", std::string(what) + ": shapes " + shape_string(a) + " and " + shape_string(b));
  }
}

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw Error("out_of_range", "softmax axis " + std::to_string(axis) + " on tensor " + shape_string(x.shape()));
  }
  require_finite(x, "softmax input");
  const Shape& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];

  Tensor<S> out(shape);
  auto in = x.data();
  auto y = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      S peak = in[base];
      for (std::size_t k = 1; k < n; ++k) peak = std::max(peak, in[base + k * inner]);
      S total = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const S e = std::exp(in[base + k * inner] - peak);
        y[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < n; ++k) y[base + k * inner] /= total;
    }
  }
  require_finite(out, "softmax");
  return out;
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b, WorkerPool* pool) {
  if (a.rank() != 2 || b.rank() != 2) throw Error("shape_mismatch", "matmul needs rank-2 operands");
  const std::size_t rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  if (b.dim(0) != inner) {
    throw Error("shape_mismatch", "matmul " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor<S> out(Shape{rows, cols});
  auto A = a.data();
  auto B = b.data();
  auto C = out.data();
  // Blocks of rows; each output row accumulates over k in a fixed order.
  constexpr std::size_t kRowBlock = 64;
  const std::size_t blocks = (rows + kRowBlock - 1) / kRowBlock;
  parallel_for(pool, blocks, [&](std::size_t blk) {
    const std::size_t r_end = std::min(rows, (blk + 1) * kRowBlock);
    for (std::size_t r = blk * kRowBlock; r < r_end; ++r) {
      S* c = C.data() + r * cols;
      const S* arow = A.data() + r * inner;
      for (std::size_t k = 0; k < inner; ++k) {
        const S av = arow[k];
        const S* brow = B.data() + k * cols;
        for (std::size_t j = 0; j < cols; ++j) c[j] += av * brow[j];
      }
    }
  });
  require_finite(out, "matmul");
  return out;
}

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (stride == 0) throw Error("bad_argument", "conv stride must be positive");
  if (kernel == 0 || kernel > in + 2 * padding) {
    throw Error("shape_mismatch", "kernel " + std::to_string(kernel) + " larger than padded input " +
                                      std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& kernels, std::size_t stride, std::size_t padding,
                 WorkerPool* pool) {
  if (input.rank() != 3 || kernels.rank() != 4) {
    throw Error("shape_mismatch", "conv2d expects H×W×Cin input and k×k×Cin×Cout kernels");
  }
  const std::size_t H = input.dim(0), W = input.dim(1), Cin = input.dim(2);
  const std::size_t k = kernels.dim(0), Cout = kernels.dim(3);
  if (kernels.dim(1) != k || kernels.dim(2) != Cin) {
    throw Error("shape_mismatch", "conv2d kernels " + shape_string(kernels.shape()) + " for input " +
                                      shape_string(input.shape()));
  }
  const std::size_t Ho = conv_output_size(H, k, stride, padding);
  const std::size_t Wo = conv_output_size(W, k, stride, padding);
  Tensor<S> out(Shape{Ho, Wo, Cout});
  auto X = input.data();
  auto K = kernels.data();
  auto Y = out.data();
  parallel_for(pool, Ho, [&](std::size_t oy) {
    for (std::size_t ox = 0; ox < Wo; ++ox) {
      S* y = Y.data() + (oy * Wo + ox) * Cout;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::ptrdiff_t ix =
              static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
          const S* x = X.data() + (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * Cin;
          const S* kk = K.data() + (ky * k + kx) * Cin * Cout;
          for (std::size_t ci = 0; ci < Cin; ++ci) {
            const S xv = x[ci];
            const S* kc = kk + ci * Cout;
            for (std::size_t co = 0; co < Cout; ++co) y[co] += xv * kc[co];
          }
        }
      }
    }
  });
  require_finite(out, "conv2d");
  return out;
}

template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
  if (x.rank() != 3) throw Error("shape_mismatch", "global_avg_pool expects rank 3, got " + shape_string(x.shape()));
  const std::size_t positions = x.dim(0) * x.dim(1), D = x.dim(2);
  Tensor<S> out(Shape{D});
  auto in = x.data();
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t d = 0; d < D; ++d) out[d] += in[p * D + d];
  }
  for (std::size_t d = 0; d < D; ++d) out[d] /= static_cast<S>(positions);
  return out;
}

template <typename S>
Tensor<S> frame_avg_pool(const Tensor<S>& x) {
  if (x.rank() != 4) throw Error("shape_mismatch", "frame_avg_pool expects rank 4, got " + shape_string(x.shape()));
  const std::size_t T = x.dim(0), positions = x.dim(1) * x.dim(2), D = x.dim(3);
  Tensor<S> out(Shape{T, D});
  auto in = x.data();
  for (std::size_t t = 0; t < T; ++t) {
    S* o = out.data().data() + t * D;
    const S* frame = in.data() + t * positions * D;
    for (std::size_t p = 0; p < positions; ++p) {
      for (std::size_t d = 0; d < D; ++d) o[d] += frame[p * D + d];
    }
    for (std::size_t d = 0; d < D; ++d) o[d] /= static_cast<S>(positions);
  }
  return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<S> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<S> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<S> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S factor) {
  Tensor<S> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  if (a.rank() != 2) throw Error("shape_mismatch", "transpose expects rank 2");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor<S> out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return out;
}

template <typename S>
S max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  S worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

#define STV_INSTANTIATE(S)                                                                   \
  template class Tensor<S>;                                                                  \
  template void require_finite(const Tensor<S>&, const char*);                               \
  template Tensor<S> softmax(const Tensor<S>&, std::size_t);                                 \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&, WorkerPool*);                \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, std::size_t, std::size_t,    \
                            WorkerPool*);                                                    \
  template Tensor<S> global_avg_pool(const Tensor<S>&);                                      \
  template Tensor<S> frame_avg_pool(const Tensor<S>&);                                       \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> scale(const Tensor<S>&, S);                                             \
  template Tensor<S> transpose(const Tensor<S>&);                                            \
  template S max_abs_diff(const Tensor<S>&, const Tensor<S>&);

STV_INSTANTIATE(float)
STV_INSTANTIATE(double)

#undef STV_INSTANTIATE

}  // namespace stv
