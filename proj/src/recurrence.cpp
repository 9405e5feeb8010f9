#include "stv/recurrence.hpp"

#include <algorithm>
#include <vector>

#include "stv/worker_pool.hpp"

namespace stv {

namespace {

template <typename S>
void check_recurrence_shapes(const Tensor<S>& decay, const Tensor<S>& input, const Tensor<S>& h0) {
  if (decay.rank() != 2 || input.rank() != 2 || h0.rank() != 1) {
    throw Error("shape_mismatch", "recurrence expects T×N decay/input and N-vector h0");
  }
  require_same_shape(decay.shape(), input.shape(), "recurrence decay/input");
  if (h0.dim(0) != decay.dim(1)) {
    throw Error("shape_mismatch", "recurrence h0 has " + std::to_string(h0.dim(0)) + " entries, expected " +
                                      std::to_string(decay.dim(1)));
  }
}

// Runs steps [begin, end) starting from `state`, writing every h_t to out.
template <typename S>
void expand_block(const S* a, const S* b, const S* state, S* out, std::size_t begin, std::size_t end,
                  std::size_t n) {
  const S* prev = state;
  for (std::size_t t = begin; t < end; ++t) {
    const S* at = a + t * n;
    const S* bt = b + t * n;
    S* ht = out + t * n;
    for (std::size_t i = 0; i < n; ++i) ht[i] = at[i] * prev[i] + bt[i];
    prev = ht;
  }
}

}  // namespace

std::size_t default_chunk(std::size_t steps, std::size_t workers) {
  workers = std::max<std::size_t>(workers, 1);
  return std::max<std::size_t>(1, (steps + workers - 1) / workers);
}

template <typename S>
Tensor<S> linear_recurrence_sequential(const Tensor<S>& decay, const Tensor<S>& input, const Tensor<S>& h0) {
  check_recurrence_shapes(decay, input, h0);
  const std::size_t T = decay.dim(0), N = decay.dim(1);
  Tensor<S> out(Shape{T, N});
  expand_block(decay.data().data(), input.data().data(), h0.data().data(), out.data().data(), 0, T, N);
  return out;
}

template <typename S>
Tensor<S> linear_recurrence_scan(const Tensor<S>& decay, const Tensor<S>& input, const Tensor<S>& h0,
                                 std::size_t chunk, WorkerPool* pool) {
  check_recurrence_shapes(decay, input, h0);
  if (chunk == 0) throw Error("bad_argument", "scan chunk must be >= 1");
  const std::size_t T = decay.dim(0), N = decay.dim(1);
  const std::size_t blocks = (T + chunk - 1) / chunk;
  const S* a = decay.data().data();
  const S* b = input.data().data();
  Tensor<S> out(Shape{T, N});
  S* h = out.data().data();

  // Block 0 starts from h0 and is expanded directly; blocks 1..B-2 are
  // reduced to summaries. The last block's summary is never needed.
  std::vector<S> prod(blocks * N, S(1));
  std::vector<S> fold(blocks * N, S(0));
  parallel_for(pool, blocks > 1 ? blocks - 1 : 1, [&](std::size_t blk) {
    const std::size_t begin = blk * chunk, end = std::min(T, begin + chunk);
    if (blk == 0) {
      expand_block(a, b, h0.data().data(), h, begin, end, N);
      return;
    }
    S* A = prod.data() + blk * N;
    S* B = fold.data() + blk * N;
    for (std::size_t t = begin; t < end; ++t) {
      const S* at = a + t * N;
      const S* bt = b + t * N;
      for (std::size_t i = 0; i < N; ++i) {
        A[i] *= at[i];
        B[i] = at[i] * B[i] + bt[i];
      }
    }
  });
  if (blocks == 1) return out;

  // Stitch: starting state of block k+1 from the last h of block k.
  std::vector<S> starts(blocks * N);
  std::copy(h + (std::min(T, chunk) - 1) * N, h + std::min(T, chunk) * N, starts.begin() + N);
  for (std::size_t blk = 1; blk + 1 < blocks; ++blk) {
    const S* A = prod.data() + blk * N;
    const S* B = fold.data() + blk * N;
    const S* in = starts.data() + blk * N;
    S* next = starts.data() + (blk + 1) * N;
    for (std::size_t i = 0; i < N; ++i) next[i] = A[i] * in[i] + B[i];
  }

  parallel_for(pool, blocks - 1, [&](std::size_t k) {
    const std::size_t blk = k + 1;
    const std::size_t begin = blk * chunk, end = std::min(T, begin + chunk);
    expand_block(a, b, starts.data() + blk * N, h, begin, end, N);
  });
  return out;
}

template Tensor<float> linear_recurrence_sequential(const Tensor<float>&, const Tensor<float>&,
                                                    const Tensor<float>&);
template Tensor<double> linear_recurrence_sequential(const Tensor<double>&, const Tensor<double>&,
                                                     const Tensor<double>&);
template Tensor<float> linear_recurrence_scan(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                              std::size_t, WorkerPool*);
template Tensor<double> linear_recurrence_scan(const Tensor<double>&, const Tensor<double>&,
                                               const Tensor<double>&, std::size_t, WorkerPool*);

}  // namespace stv
