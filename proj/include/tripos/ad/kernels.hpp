// Copyright 2026 The tripos Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace tripos::ad::kern {

// Execution mode for the compute kernels. `serial` is the straightforward
// reference implementation kept for testing; `parallel` is the OpenMP path.
// Both must produce the same results (bit-identical for a fixed mode and
// worker count; gemm reassociates sums across modes, so cross-mode checks
// use a tolerance).
enum class Exec { serial, parallel };

Exec exec_mode();
void set_exec_mode(Exec e);

// 0 selects hardware concurrency. Setting workers to 1 switches to the
// serial reference path so single-worker runs are bit-reproducible.
void set_workers(int n);
int workers();

// C[M,N] = op(A) * op(B) (+= if accumulate), row-major, op = optional
// transpose. lda/ldb/ldc are the row strides of the *stored* matrices.
template <class T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          const T* a, int64_t lda, const T* b, int64_t ldb, T* c, int64_t ldc,
          bool accumulate);

template <class T>
void gemm_serial(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
                 const T* a, int64_t lda, const T* b, int64_t ldb, T* c,
                 int64_t ldc, bool accumulate);

template <class T>
void gemm_parallel(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
                   const T* a, int64_t lda, const T* b, int64_t ldb, T* c,
                   int64_t ldc, bool accumulate);

// x: [C,H,W] -> col: [C*kh*kw, oh*ow] for a single sample.
template <class T>
void im2col(const T* x, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, T* col);

// Accumulating inverse of im2col: dx[C,H,W] += fold(col).
template <class T>
void col2im_acc(const T* col, int64_t c, int64_t h, int64_t w, int64_t kh,
                int64_t kw, int64_t stride, int64_t pad, T* dx);

// Direct convolution, serial reference. y: [oc, oh, ow] for one sample.
template <class T>
void conv2d_direct_serial(const T* x, int64_t c, int64_t h, int64_t w,
                          const T* wgt, int64_t oc, int64_t kh, int64_t kw,
                          int64_t stride, int64_t pad, T* y);

// out[p, c] = bilinear lookup of plane[c, :, :] at uv[p] in [0,1]^2
// (border-clamped, align-corners grid: u=0 -> column 0, u=1 -> column r-1).
template <class T>
void bilinear_gather(const T* plane, int64_t c, int64_t r, const T* uv,
                     int64_t p, T* out);

// dplane[c,:,:] += scatter of dout[p,c] through the bilinear weights.
template <class T>
void bilinear_scatter_acc(T* dplane, int64_t c, int64_t r, const T* uv,
                          int64_t p, const T* dout);

// Simple index-parallel loop: f(i) for i in [0, n). The parallel path uses a
// static schedule so results are reproducible for a fixed worker count.
namespace detail {
bool use_parallel(int64_t n);
}

template <class F>
void parallel_for(int64_t n, F&& f) {
  if (detail::use_parallel(n)) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) f(i);
  } else {
    for (int64_t i = 0; i < n; ++i) f(i);
  }
}

}  // namespace tripos::ad::kern
