#pragma once

#include <cstddef>

#include "stv/tensor.hpp"

namespace stv {

class WorkerPool;

/// Reference evaluation of h_t = decay_t ⊙ h_{t-1} + input_t, left to right,
/// starting from h0. decay and input are T×N, h0 is N; returns all h_t (T×N).
template <typename S>
Tensor<S> linear_recurrence_sequential(const Tensor<S>& decay, const Tensor<S>& input,
                                       const Tensor<S>& h0);

/// The same recurrence evaluated as a chunked scan over the associative
/// combine (a1, b1) ∘ (a2, b2) = (a1·a2, a2·b1 + b2).
///
/// Time is cut into blocks of `chunk` steps. Every block except the last is
/// reduced to a summary (∏a, folded b) independently; the summaries are then
/// stitched left to right into each block's starting state, and finally all
/// blocks are expanded independently. With a pool the reduce and expand
/// phases run concurrently across blocks. Within a block the combine order is
/// fixed, so the result does not depend on the thread count, and chunk >= T
/// reproduces linear_recurrence_sequential bit for bit.
template <typename S>
Tensor<S> linear_recurrence_scan(const Tensor<S>& decay, const Tensor<S>& input, const Tensor<S>& h0,
                                 std::size_t chunk, WorkerPool* pool = nullptr);

/// Default block length: ceil(T / workers).
std::size_t default_chunk(std::size_t steps, std::size_t workers);

}  // namespace stv
