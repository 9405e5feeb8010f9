#pragma once

// Reverse-mode differentiation over the tensor_core operation set.
//
// A Var is a handle to a Node in a dynamically built graph. Every op that
// receives at least one gradient-requiring input records its inputs and an
// adjoint closure; ops on constants record nothing, so inference graphs are
// released as soon as intermediate values go out of scope.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stv/recurrence.hpp"
#include "stv/tensor.hpp"

namespace stv::ad {

template <typename S>
struct Node {
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  Tensor<S> value;
  Tensor<S> grad;  // same shape as value once has_grad is set
  bool has_grad = false;
  bool requires_grad = false;
  std::string param_name;  // set on parameter leaves only
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> adjoint;
};

template <typename S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<S>> node) : node_(std::move(node)) {}

  const Tensor<S>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  Node<S>& node() const { return *node_; }
  const std::shared_ptr<Node<S>>& ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<S>> node_;
};

template <typename S>
using Gradients = std::map<std::string, Tensor<S>>;

template <typename S>
Var<S> parameter(std::string name, Tensor<S> value, bool requires_grad = true) {
  auto n = std::make_shared<Node<S>>();
  n->op = "param";
  n->value = std::move(value);
  n->param_name = std::move(name);
  n->requires_grad = requires_grad;
  return Var<S>(std::move(n));
}

template <typename S>
Var<S> constant(Tensor<S> value) {
  auto n = std::make_shared<Node<S>>();
  n->op = "const";
  n->value = std::move(value);
  return Var<S>(std::move(n));
}

namespace detail {

template <typename S>
Tensor<S>& grad_of(Node<S>& n) {
  if (!n.has_grad) {
    n.grad = Tensor<S>(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename S>
Node<S>& in(Node<S>& n, std::size_t i) {
  return *n.inputs[i];
}

template <typename S>
Var<S> make(const char* op, Tensor<S> value, std::initializer_list<Var<S>> inputs,
            std::function<void(Node<S>&)> adjoint) {
  auto n = std::make_shared<Node<S>>();
  n->op = op;
  n->value = std::move(value);
  for (const auto& v : inputs) {
    if (v.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    for (const auto& v : inputs) n->inputs.push_back(v.ptr());
    n->adjoint = std::move(adjoint);
  }
  return Var<S>(std::move(n));
}

template <typename S>
void add_into(Tensor<S>& dst, const Tensor<S>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

/// Differentiates a scalar root. Returns d(root)/d(p) for every parameter
/// leaf reachable from the root, keyed by parameter name; leaves sharing a
/// name have their gradients summed.
template <typename S>
Gradients<S> backward(const Var<S>& root) {
  if (root.value().size() != 1) {
    throw Error("non_scalar_root", "backward needs a scalar root, got shape " + shape_string(root.shape()));
  }
  Gradients<S> grads;
  if (!root.requires_grad()) return grads;

  // Iterative DFS post-order; a grey node met again means a cycle.
  enum class Mark { grey, black };
  std::unordered_map<Node<S>*, Mark> marks;
  std::vector<Node<S>*> order;
  std::vector<std::pair<Node<S>*, std::size_t>> stack;
  stack.emplace_back(&root.node(), 0);
  marks[&root.node()] = Mark::grey;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<S>* child = node->inputs[next++].get();
      if (!child->requires_grad) continue;
      auto it = marks.find(child);
      if (it == marks.end()) {
        marks[child] = Mark::grey;
        stack.emplace_back(child, 0);
      } else if (it->second == Mark::grey) {
        throw Error("cycle", "computation graph contains a cycle at op '" + child->op + "'");
      }
    } else {
      marks[node] = Mark::black;
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    n->has_grad = false;
    n->grad = Tensor<S>();
  }
  root.node().grad = Tensor<S>(root.shape(), S(1));
  root.node().has_grad = true;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>& n = **it;
    if (n.has_grad && n.adjoint) n.adjoint(n);
  }
  for (auto* n : order) {
    if (n->param_name.empty()) continue;
    Tensor<S> g = n->has_grad ? n->grad : Tensor<S>(n->value.shape());
    auto [it, inserted] = grads.emplace(n->param_name, g);
    if (!inserted) detail::add_into(it->second, g);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  return detail::make<S>("add", stv::add(a.value(), b.value()), {a, b}, [](Node<S>& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (detail::in(n, k).requires_grad) detail::add_into(detail::grad_of(detail::in(n, k)), n.grad);
    }
  });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  return detail::make<S>("sub", stv::sub(a.value(), b.value()), {a, b}, [](Node<S>& n) {
    if (detail::in(n, 0).requires_grad) detail::add_into(detail::grad_of(detail::in(n, 0)), n.grad);
    if (detail::in(n, 1).requires_grad) {
      auto& g = detail::grad_of(detail::in(n, 1));
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  return detail::make<S>("mul", stv::mul(a.value(), b.value()), {a, b}, [](Node<S>& n) {
    auto& x = detail::in(n, 0);
    auto& y = detail::in(n, 1);
    if (x.requires_grad) {
      auto& g = detail::grad_of(x);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * y.value[i];
    }
    if (y.requires_grad) {
      auto& g = detail::grad_of(y);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * x.value[i];
    }
  });
}

template <typename S>
Var<S> scale(const Var<S>& a, S factor) {
  return detail::make<S>("scale", stv::scale(a.value(), factor), {a}, [factor](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * factor;
  });
}

/// x (N×M) plus bias (M) added to every row. Bias may also be shape {1}
/// when M == 1.
template <typename S>
Var<S> add_bias(const Var<S>& x, const Var<S>& bias) {
  if (x.value().rank() != 2 || bias.value().size() != x.value().dim(1)) {
    throw Error("shape_mismatch",
                "add_bias " + shape_string(x.shape()) + " with bias " + shape_string(bias.shape()));
  }
  const std::size_t rows = x.value().dim(0), cols = x.value().dim(1);
  Tensor<S> out = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bias.value()[c];
  return detail::make<S>("add_bias", std::move(out), {x, bias}, [rows, cols](Node<S>& n) {
    if (detail::in(n, 0).requires_grad) detail::add_into(detail::grad_of(detail::in(n, 0)), n.grad);
    if (detail::in(n, 1).requires_grad) {
      auto& g = detail::grad_of(detail::in(n, 1));
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g[c] += n.grad[r * cols + c];
    }
  });
}

template <typename S>
Var<S> relu(const Var<S>& x) {
  Tensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] > 0 ? x.value()[i] : S(0);
  return detail::make<S>("relu", std::move(out), {x}, [](Node<S>& n) {
    auto& src = detail::in(n, 0);
    auto& g = detail::grad_of(src);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (src.value[i] > 0) g[i] += n.grad[i];
    }
  });
}

template <typename S>
S logistic(S x) {
  return x >= 0 ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
}

template <typename S>
Var<S> sigmoid(const Var<S>& x) {
  Tensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logistic(x.value()[i]);
  return detail::make<S>("sigmoid", std::move(out), {x}, [](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.value[i] * (S(1) - n.value[i]);
  });
}

/// x · sigmoid(x), a smooth activation.
template <typename S>
Var<S> silu(const Var<S>& x) {
  Tensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * logistic(x.value()[i]);
  return detail::make<S>("silu", std::move(out), {x}, [](Node<S>& n) {
    auto& src = detail::in(n, 0);
    auto& g = detail::grad_of(src);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const S s = logistic(src.value[i]);
      g[i] += n.grad[i] * (s + src.value[i] * s * (S(1) - s));
    }
  });
}

template <typename S>
Var<S> exp(const Var<S>& x) {
  Tensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(x.value()[i]);
  require_finite(out, "exp");
  return detail::make<S>("exp", std::move(out), {x}, [](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.value[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions and layout

template <typename S>
Var<S> sum(const Var<S>& x) {
  S total = 0;
  for (auto v : x.value().data()) total += v;
  return detail::make<S>("sum", Tensor<S>::scalar(total), {x}, [](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    const S up = n.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up;
  });
}

template <typename S>
Var<S> mean(const Var<S>& x) {
  return scale(sum(x), S(1) / static_cast<S>(x.value().size()));
}

template <typename S>
Var<S> reshape(const Var<S>& x, Shape shape) {
  return detail::make<S>("reshape", x.value().reshaped(std::move(shape)), {x}, [](Node<S>& n) {
    detail::add_into(detail::grad_of(detail::in(n, 0)), n.grad);
  });
}

/// Stacks equally shaped tensors along a new leading axis.
template <typename S>
Var<S> stack(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw Error("shape_mismatch", "stack of zero tensors");
  const Shape& inner = parts.front().shape();
  const std::size_t block = parts.front().value().size();
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<S> data;
  data.reserve(block * parts.size());
  bool rg = false;
  for (const auto& p : parts) {
    require_same_shape(p.shape(), inner, "stack");
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    rg = rg || p.requires_grad();
  }
  auto n = std::make_shared<Node<S>>();
  n->op = "stack";
  n->value = Tensor<S>(std::move(shape), std::move(data));
  if (rg) {
    n->requires_grad = true;
    for (const auto& p : parts) n->inputs.push_back(p.ptr());
    n->adjoint = [block](Node<S>& self) {
      for (std::size_t k = 0; k < self.inputs.size(); ++k) {
        auto& src = *self.inputs[k];
        if (!src.requires_grad) continue;
        auto& g = detail::grad_of(src);
        for (std::size_t i = 0; i < block; ++i) g[i] += self.grad[k * block + i];
      }
    };
  }
  return Var<S>(std::move(n));
}

/// Sub-tensor at `index` along the leading axis.
template <typename S>
Var<S> slice(const Var<S>& x, std::size_t index) {
  const Shape& shape = x.shape();
  if (shape.empty() || index >= shape[0]) throw Error("out_of_range", "slice index out of range");
  Shape inner(shape.begin() + 1, shape.end());
  const std::size_t block = shape_numel(inner);
  std::vector<S> data(x.value().data().begin() + index * block, x.value().data().begin() + (index + 1) * block);
  return detail::make<S>("slice", Tensor<S>(std::move(inner), std::move(data)), {x}, [index, block](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    for (std::size_t i = 0; i < block; ++i) g[index * block + i] += n.grad[i];
  });
}

/// Columns [begin, end) of a rank-2 tensor.
template <typename S>
Var<S> columns(const Var<S>& x, std::size_t begin, std::size_t end) {
  if (x.value().rank() != 2 || begin >= end || end > x.value().dim(1)) {
    throw Error("out_of_range", "columns range invalid for " + shape_string(x.shape()));
  }
  const std::size_t rows = x.value().dim(0), cols = x.value().dim(1), width = end - begin;
  Tensor<S> out(Shape{rows, width});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = x.value()[r * cols + begin + c];
  return detail::make<S>("columns", std::move(out), {x}, [rows, cols, begin, width](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) g[r * cols + begin + c] += n.grad[r * width + c];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra, convolution, pooling, softmax

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b, WorkerPool* pool = nullptr) {
  return detail::make<S>("matmul", stv::matmul(a.value(), b.value(), pool), {a, b}, [](Node<S>& n) {
    auto& x = detail::in(n, 0);
    auto& y = detail::in(n, 1);
    if (x.requires_grad) detail::add_into(detail::grad_of(x), stv::matmul(n.grad, stv::transpose(y.value)));
    if (y.requires_grad) detail::add_into(detail::grad_of(y), stv::matmul(stv::transpose(x.value), n.grad));
  });
}

template <typename S>
Var<S> conv2d(const Var<S>& input, const Var<S>& kernels, std::size_t stride, std::size_t padding,
              WorkerPool* pool = nullptr) {
  Tensor<S> out = stv::conv2d(input.value(), kernels.value(), stride, padding, pool);
  return detail::make<S>("conv2d", std::move(out), {input, kernels}, [stride, padding](Node<S>& n) {
    auto& xn = detail::in(n, 0);
    auto& kn = detail::in(n, 1);
    const auto& X = xn.value;
    const auto& K = kn.value;
    const std::size_t H = X.dim(0), W = X.dim(1), Cin = X.dim(2);
    const std::size_t k = K.dim(0), Cout = K.dim(3);
    const std::size_t Ho = n.value.dim(0), Wo = n.value.dim(1);
    Tensor<S>* gx = xn.requires_grad ? &detail::grad_of(xn) : nullptr;
    Tensor<S>* gk = kn.requires_grad ? &detail::grad_of(kn) : nullptr;
    for (std::size_t oy = 0; oy < Ho; ++oy) {
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        const S* gy = n.grad.data().data() + (oy * Wo + ox) * Cout;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
            const std::size_t xoff = (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * Cin;
            const std::size_t koff = (ky * k + kx) * Cin * Cout;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
              const S* kc = K.data().data() + koff + ci * Cout;
              if (gx) {
                S acc = 0;
                for (std::size_t co = 0; co < Cout; ++co) acc += gy[co] * kc[co];
                (*gx)[xoff + ci] += acc;
              }
              if (gk) {
                const S xv = X[xoff + ci];
                S* gkc = gk->data().data() + koff + ci * Cout;
                for (std::size_t co = 0; co < Cout; ++co) gkc[co] += xv * gy[co];
              }
            }
          }
        }
      }
    }
  });
}

template <typename S>
Var<S> global_avg_pool(const Var<S>& x) {
  return detail::make<S>("global_avg_pool", stv::global_avg_pool(x.value()), {x}, [](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    const std::size_t D = n.value.size();
    const std::size_t positions = g.size() / D;
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t d = 0; d < D; ++d) g[p * D + d] += n.grad[d] / static_cast<S>(positions);
  });
}

template <typename S>
Var<S> frame_avg_pool(const Var<S>& x) {
  return detail::make<S>("frame_avg_pool", stv::frame_avg_pool(x.value()), {x}, [](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    const std::size_t T = n.value.dim(0), D = n.value.dim(1);
    const std::size_t positions = g.size() / (T * D);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t p = 0; p < positions; ++p)
        for (std::size_t d = 0; d < D; ++d)
          g[(t * positions + p) * D + d] += n.grad[t * D + d] / static_cast<S>(positions);
  });
}

template <typename S>
Var<S> softmax(const Var<S>& x, std::size_t axis) {
  return detail::make<S>("softmax", stv::softmax(x.value(), axis), {x}, [axis](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    const Shape& shape = n.value.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    const std::size_t len = shape[axis];
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        S dot = 0;
        for (std::size_t k = 0; k < len; ++k) dot += n.grad[base + k * inner] * n.value[base + k * inner];
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t idx = base + k * inner;
          g[idx] += n.value[idx] * (n.grad[idx] - dot);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Linear recurrence h_t = decay_t ⊙ h_{t-1} + input_t

struct RecurrenceOptions {
  bool parallel = false;  // chunked scan instead of the left-to-right loop
  std::size_t chunk = 1;  // block length for the scan
  WorkerPool* pool = nullptr;
};

namespace detail {

template <typename S>
Tensor<S> run_recurrence(const Tensor<S>& a, const Tensor<S>& b, const Tensor<S>& h0, const RecurrenceOptions& opt) {
  return opt.parallel ? linear_recurrence_scan(a, b, h0, opt.chunk, opt.pool) : linear_recurrence_sequential(a, b, h0);
}

}  // namespace detail

/// Differentiable recurrence. The adjoint is itself a linear recurrence run
/// backwards in time, λ_t = ∂L/∂h_t + decay_{t+1} ⊙ λ_{t+1}, evaluated with
/// the same strategy (loop or scan) as the forward pass.
template <typename S>
Var<S> linear_recurrence(const Var<S>& decay, const Var<S>& input, const Var<S>& h0, RecurrenceOptions opt) {
  Tensor<S> h = detail::run_recurrence(decay.value(), input.value(), h0.value(), opt);
  return detail::make<S>("linear_recurrence", std::move(h), {decay, input, h0}, [opt](Node<S>& n) {
    auto& an = detail::in(n, 0);
    auto& bn = detail::in(n, 1);
    auto& hn = detail::in(n, 2);
    const std::size_t T = n.value.dim(0), N = n.value.dim(1);
    Tensor<S> rev_decay(Shape{T, N});
    Tensor<S> rev_grad(Shape{T, N});
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = T - 1 - s;
      for (std::size_t i = 0; i < N; ++i) {
        rev_decay[s * N + i] = s == 0 ? S(0) : an.value[(t + 1) * N + i];
        rev_grad[s * N + i] = n.grad[t * N + i];
      }
    }
    const Tensor<S> rev_lambda = detail::run_recurrence(rev_decay, rev_grad, Tensor<S>(Shape{N}), opt);
    auto lambda = [&](std::size_t t, std::size_t i) { return rev_lambda[(T - 1 - t) * N + i]; };
    if (bn.requires_grad) {
      auto& g = detail::grad_of(bn);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < N; ++i) g[t * N + i] += lambda(t, i);
    }
    if (an.requires_grad) {
      auto& g = detail::grad_of(an);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < N; ++i) {
          const S prev = t == 0 ? hn.value[i] : n.value[(t - 1) * N + i];
          g[t * N + i] += lambda(t, i) * prev;
        }
    }
    if (hn.requires_grad) {
      auto& g = detail::grad_of(hn);
      for (std::size_t i = 0; i < N; ++i) g[i] += an.value[i] * lambda(0, i);
    }
  });
}

// ---------------------------------------------------------------------------
// Attention fuse

/// R_d = Σ_t beta_t Σ_p alpha_{t,p} G_{t,p,d} for G of shape T×H×W×D,
/// alpha T×H×W and beta T.
template <typename S>
Var<S> fuse(const Var<S>& g, const Var<S>& alpha, const Var<S>& beta) {
  const Tensor<S>& G = g.value();
  if (G.rank() != 4 || alpha.value().rank() != 3 || beta.value().rank() != 1) {
    throw Error("shape_mismatch", "fuse expects G T×H×W×D, alpha T×H×W, beta T");
  }
  const std::size_t T = G.dim(0), P = G.dim(1) * G.dim(2), D = G.dim(3);
  if (alpha.shape() != Shape{G.dim(0), G.dim(1), G.dim(2)} || beta.shape() != Shape{T}) {
    throw Error("shape_mismatch", "fuse maps " + shape_string(alpha.shape()) + "/" + shape_string(beta.shape()) +
                                      " do not match G " + shape_string(G.shape()));
  }
  Tensor<S> out(Shape{D});
  std::vector<S> frame(D);
  for (std::size_t t = 0; t < T; ++t) {
    std::fill(frame.begin(), frame.end(), S(0));
    for (std::size_t p = 0; p < P; ++p) {
      const S w = alpha.value()[t * P + p];
      for (std::size_t d = 0; d < D; ++d) frame[d] += w * G[(t * P + p) * D + d];
    }
    for (std::size_t d = 0; d < D; ++d) out[d] += beta.value()[t] * frame[d];
  }
  return detail::make<S>("fuse", std::move(out), {g, alpha, beta}, [T, P, D](Node<S>& n) {
    auto& gn = detail::in(n, 0);
    auto& an = detail::in(n, 1);
    auto& bn = detail::in(n, 2);
    const auto& R = n.grad;
    for (std::size_t t = 0; t < T; ++t) {
      const S b = bn.value[t];
      S beta_acc = 0;
      for (std::size_t p = 0; p < P; ++p) {
        const S a = an.value[t * P + p];
        S dot = 0;
        for (std::size_t d = 0; d < D; ++d) dot += gn.value[(t * P + p) * D + d] * R[d];
        beta_acc += a * dot;
        if (an.requires_grad) detail::grad_of(an)[t * P + p] += b * dot;
        if (gn.requires_grad) {
          auto& gg = detail::grad_of(gn);
          for (std::size_t d = 0; d < D; ++d) gg[(t * P + p) * D + d] += b * a * R[d];
        }
      }
      if (bn.requires_grad) detail::grad_of(bn)[t] += beta_acc;
    }
  });
}

// ---------------------------------------------------------------------------
// Losses

/// -log softmax(logits)[label] for a rank-1 logit vector.
template <typename S>
Var<S> cross_entropy(const Var<S>& logits, std::size_t label) {
  const auto& z = logits.value();
  if (z.rank() != 1) throw Error("shape_mismatch", "cross_entropy expects rank-1 logits");
  if (label >= z.size()) {
    throw Error("out_of_range", "label " + std::to_string(label) + " >= " + std::to_string(z.size()) + " classes");
  }
  const Tensor<S> p = stv::softmax(z, 0);
  S peak = z[0];
  for (auto v : z.data()) peak = std::max(peak, v);
  S total = 0;
  for (auto v : z.data()) total += std::exp(v - peak);
  const S loss = std::log(total) + peak - z[label];
  return detail::make<S>("cross_entropy", Tensor<S>::scalar(loss), {logits}, [p, label](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    const S up = n.grad[0];
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += up * (p[k] - (k == label ? S(1) : S(0)));
  });
}

/// Sum of per-row cross entropies of N×K logits; rows labelled -1 are skipped.
template <typename S>
Var<S> cross_entropy_rows(const Var<S>& logits, const std::vector<int>& labels) {
  const auto& z = logits.value();
  if (z.rank() != 2 || z.dim(0) != labels.size()) throw Error("shape_mismatch", "cross_entropy_rows shape");
  const std::size_t rows = z.dim(0), K = z.dim(1);
  const Tensor<S> p = stv::softmax(z, 1);
  S loss = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0) continue;
    if (static_cast<std::size_t>(labels[r]) >= K) throw Error("out_of_range", "row label out of range");
    const S* row = z.data().data() + r * K;
    S peak = *std::max_element(row, row + K);
    S total = 0;
    for (std::size_t k = 0; k < K; ++k) total += std::exp(row[k] - peak);
    loss += std::log(total) + peak - row[labels[r]];
  }
  return detail::make<S>("cross_entropy_rows", Tensor<S>::scalar(loss), {logits}, [p, labels, K](Node<S>& n) {
    auto& g = detail::grad_of(detail::in(n, 0));
    const S up = n.grad[0];
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] < 0) continue;
      for (std::size_t k = 0; k < K; ++k)
        g[r * K + k] += up * (p[r * K + k] - (static_cast<int>(k) == labels[r] ? S(1) : S(0)));
    }
  });
}

/// Σ w_i · (softplus(x_i) − t_i·x_i): binary cross entropy on logits.
template <typename S>
Var<S> bce_with_logits(const Var<S>& logits, const Tensor<S>& targets, const Tensor<S>& weights) {
  require_same_shape(logits.shape(), targets.shape(), "bce targets");
  require_same_shape(logits.shape(), weights.shape(), "bce weights");
  S loss = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const S x = logits.value()[i];
    const S softplus = std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
    loss += weights[i] * (softplus - targets[i] * x);
  }
  return detail::make<S>("bce_with_logits", Tensor<S>::scalar(loss), {logits}, [targets, weights](Node<S>& n) {
    auto& src = detail::in(n, 0);
    auto& g = detail::grad_of(src);
    const S up = n.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * weights[i] * (logistic(src.value[i]) - targets[i]);
  });
}

/// Σ mask_i · (sqrt((p_i − t_i)² + c²) − c): an everywhere-smooth L1.
template <typename S>
Var<S> charbonnier(const Var<S>& pred, const Tensor<S>& target, const Tensor<S>& mask, S c) {
  require_same_shape(pred.shape(), target.shape(), "charbonnier target");
  require_same_shape(pred.shape(), mask.shape(), "charbonnier mask");
  S loss = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const S r = pred.value()[i] - target[i];
    loss += mask[i] * (std::sqrt(r * r + c * c) - c);
  }
  return detail::make<S>("charbonnier", Tensor<S>::scalar(loss), {pred}, [target, mask, c](Node<S>& n) {
    auto& src = detail::in(n, 0);
    auto& g = detail::grad_of(src);
    const S up = n.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const S r = src.value[i] - target[i];
      g[i] += up * mask[i] * r / std::sqrt(r * r + c * c);
    }
  });
}

}  // namespace stv::ad
