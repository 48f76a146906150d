// Copyright 2026 The tripos Authors
// SPDX-License-Identifier: Apache-2.0

#include "tripos/ad/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <thread>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tripos::ad::kern {

namespace {
Exec g_exec = Exec::parallel;
int g_workers = 0;
}  // namespace

Exec exec_mode() { return g_exec; }
void set_exec_mode(Exec e) { g_exec = e; }

void set_workers(int n) {
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  g_workers = n;
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
  g_exec = (n == 1) ? Exec::serial : Exec::parallel;
}

int workers() {
  if (g_workers > 0) return g_workers;
  return static_cast<int>(std::thread::hardware_concurrency());
}

namespace detail {
bool use_parallel(int64_t n) {
#ifdef _OPENMP
  if (g_exec != Exec::parallel) return false;
  if (omp_in_parallel()) return false;  // nested regions run in the caller's thread
  return n >= 2048;
#else
  (void)n;
  return false;
#endif
}
}  // namespace detail

// ---------------------------------------------------------------------------
// gemm, serial reference: textbook loops, no blocking.
// ---------------------------------------------------------------------------

template <class T>
void gemm_serial(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const T* a,
                 int64_t lda, const T* b, int64_t ldb, T* c, int64_t ldc,
                 bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * ldc + j] : T(0);
      for (int64_t p = 0; p < k; ++p) {
        const T av = ta ? a[p * lda + i] : a[i * lda + p];
        const T bv = tb ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      c[i * ldc + j] = acc;
    }
  }
}

// ---------------------------------------------------------------------------
// gemm, OpenMP path. Core kernel is NN with 4-row register blocking and a
// vectorizable 16-wide column tile; other transpose combinations either pack
// the small operand or use a dedicated rank-1 accumulation (TN, big K).
// ---------------------------------------------------------------------------

namespace {

template <class T>
void gemm_nn_omp(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
                 const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate) {
  constexpr int64_t RB = 4;   // rows per register block
  constexpr int64_t NB = 16;  // columns per vector tile
  const int64_t n_full = n / NB * NB;

  auto process_rows = [&](int64_t i, int64_t rows) {
    for (int64_t j = 0; j < n_full; j += NB) {
      T acc[RB][NB];
      for (int64_t r = 0; r < rows; ++r) {
        if (accumulate)
          std::memcpy(acc[r], c + (i + r) * ldc + j, NB * sizeof(T));
        else
          std::memset(acc[r], 0, NB * sizeof(T));
      }
      for (int64_t p = 0; p < k; ++p) {
        const T* brow = b + p * ldb + j;
        for (int64_t r = 0; r < rows; ++r) {
          const T av = a[(i + r) * lda + p];
#pragma omp simd
          for (int64_t v = 0; v < NB; ++v) acc[r][v] += av * brow[v];
        }
      }
      for (int64_t r = 0; r < rows; ++r)
        std::memcpy(c + (i + r) * ldc + j, acc[r], NB * sizeof(T));
    }
    // column remainder
    for (int64_t j = n_full; j < n; ++j) {
      for (int64_t r = 0; r < rows; ++r) {
        T acc = accumulate ? c[(i + r) * ldc + j] : T(0);
        for (int64_t p = 0; p < k; ++p) acc += a[(i + r) * lda + p] * b[p * ldb + j];
        c[(i + r) * ldc + j] = acc;
      }
    }
  };

  const int64_t blocks = (m + RB - 1) / RB;
  if (detail::use_parallel(m * n * k / 64)) {
#pragma omp parallel for schedule(static)
    for (int64_t blk = 0; blk < blocks; ++blk) {
      const int64_t i = blk * RB;
      process_rows(i, std::min<int64_t>(RB, m - i));
    }
  } else {
    for (int64_t blk = 0; blk < blocks; ++blk) {
      const int64_t i = blk * RB;
      process_rows(i, std::min<int64_t>(RB, m - i));
    }
  }
}

// C[M,N] (+)= A^T * B with A stored [K, M]: rank-1 accumulation over k. Used
// for weight gradients where K is the large dimension; C stays cache
// resident. Parallelized over k chunks with per-thread partials reduced in a
// fixed order.
template <class T>
void gemm_tn_omp(int64_t m, int64_t n, int64_t k, const T* a, int64_t lda,
                 const T* b, int64_t ldb, T* c, int64_t ldc, bool accumulate) {
  const int64_t cn = m * n;
  auto accumulate_chunk = [&](int64_t p0, int64_t p1, T* out) {
    for (int64_t p = p0; p < p1; ++p) {
      const T* arow = a + p * lda;
      const T* brow = b + p * ldb;
      for (int64_t i = 0; i < m; ++i) {
        const T av = arow[i];
        T* crow = out + i * n;
#pragma omp simd
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  };

  int nthreads = 1;
#ifdef _OPENMP
  if (detail::use_parallel(k * m * n / 64)) nthreads = workers();
#endif
  if (nthreads <= 1) {
    std::vector<T> part(static_cast<size_t>(cn), T(0));
    accumulate_chunk(0, k, part.data());
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        const T v = part[i * n + j];
        c[i * ldc + j] = accumulate ? c[i * ldc + j] + v : v;
      }
    return;
  }

  std::vector<std::vector<T>> partials(static_cast<size_t>(nthreads));
  const int64_t chunk = (k + nthreads - 1) / nthreads;
#pragma omp parallel num_threads(nthreads)
  {
#ifdef _OPENMP
    const int tid = omp_get_thread_num();
#else
    const int tid = 0;
#endif
    auto& part = partials[static_cast<size_t>(tid)];
    part.assign(static_cast<size_t>(cn), T(0));
    const int64_t p0 = std::min<int64_t>(k, tid * chunk);
    const int64_t p1 = std::min<int64_t>(k, p0 + chunk);
    accumulate_chunk(p0, p1, part.data());
  }
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      T v = accumulate ? c[i * ldc + j] : T(0);
      for (int t = 0; t < nthreads; ++t)
        if (!partials[static_cast<size_t>(t)].empty()) v += partials[static_cast<size_t>(t)][i * n + j];
      c[i * ldc + j] = v;
    }
}

template <class T>
std::vector<T> pack_transpose(const T* x, int64_t rows, int64_t cols, int64_t ld) {
  std::vector<T> out(static_cast<size_t>(rows * cols));
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) out[j * rows + i] = x[i * ld + j];
  return out;
}

}  // namespace

template <class T>
void gemm_parallel(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const T* a,
                   int64_t lda, const T* b, int64_t ldb, T* c, int64_t ldc,
                   bool accumulate) {
  if (!ta && !tb) {
    gemm_nn_omp(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  } else if (ta && !tb) {
    if (m * n <= 256 * 256) {
      gemm_tn_omp(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    } else {
      auto at = pack_transpose(a, k, m, lda);  // A stored [K,M] -> [M,K]
      gemm_nn_omp(m, n, k, at.data(), k, b, ldb, c, ldc, accumulate);
    }
  } else if (!ta && tb) {
    auto bt = pack_transpose(b, n, k, ldb);  // B stored [N,K] -> [K,N]
    gemm_nn_omp(m, n, k, a, lda, bt.data(), n, c, ldc, accumulate);
  } else {
    auto at = pack_transpose(a, k, m, lda);
    auto bt = pack_transpose(b, n, k, ldb);
    gemm_nn_omp(m, n, k, at.data(), k, bt.data(), n, c, ldc, accumulate);
  }
}

template <class T>
void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const T* a,
          int64_t lda, const T* b, int64_t ldb, T* c, int64_t ldc,
          bool accumulate) {
  if (g_exec == Exec::serial)
    gemm_serial(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  else
    gemm_parallel(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

// ---------------------------------------------------------------------------
// im2col / col2im
// ---------------------------------------------------------------------------

template <class T>
void im2col(const T* x, int64_t c, int64_t h, int64_t w, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, T* col) {
  const int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const int64_t ow = (w + 2 * pad - kw) / stride + 1;
  const int64_t ohw = oh * ow;
  parallel_for(c * kh * kw, [&](int64_t row) {
    const int64_t ci = row / (kh * kw);
    const int64_t ky = (row / kw) % kh;
    const int64_t kx = row % kw;
    T* dst = col + row * ohw;
    const T* src = x + ci * h * w;
    for (int64_t oy = 0; oy < oh; ++oy) {
      const int64_t iy = oy * stride + ky - pad;
      for (int64_t ox = 0; ox < ow; ++ox) {
        const int64_t ix = ox * stride + kx - pad;
        dst[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? src[iy * w + ix] : T(0);
      }
    }
  });
}

template <class T>
void col2im_acc(const T* col, int64_t c, int64_t h, int64_t w, int64_t kh,
                int64_t kw, int64_t stride, int64_t pad, T* dx) {
  const int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const int64_t ow = (w + 2 * pad - kw) / stride + 1;
  const int64_t ohw = oh * ow;
  // Parallel over channels: each channel's dx slab is written by one thread.
  parallel_for(c, [&](int64_t ci) {
    T* dst = dx + ci * h * w;
    for (int64_t ky = 0; ky < kh; ++ky) {
      for (int64_t kx = 0; kx < kw; ++kx) {
        const T* src = col + ((ci * kh + ky) * kw + kx) * ohw;
        for (int64_t oy = 0; oy < oh; ++oy) {
          const int64_t iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int64_t ox = 0; ox < ow; ++ox) {
            const int64_t ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) dst[iy * w + ix] += src[oy * ow + ox];
          }
        }
      }
    }
  });
}

template <class T>
void conv2d_direct_serial(const T* x, int64_t c, int64_t h, int64_t w,
                          const T* wgt, int64_t oc, int64_t kh, int64_t kw,
                          int64_t stride, int64_t pad, T* y) {
  const int64_t oh = (h + 2 * pad - kh) / stride + 1;
  const int64_t ow = (w + 2 * pad - kw) / stride + 1;
  for (int64_t o = 0; o < oc; ++o) {
    for (int64_t oy = 0; oy < oh; ++oy) {
      for (int64_t ox = 0; ox < ow; ++ox) {
        T acc = 0;
        for (int64_t ci = 0; ci < c; ++ci)
          for (int64_t ky = 0; ky < kh; ++ky)
            for (int64_t kx = 0; kx < kw; ++kx) {
              const int64_t iy = oy * stride + ky - pad;
              const int64_t ix = ox * stride + kx - pad;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += x[(ci * h + iy) * w + ix] * wgt[((o * c + ci) * kh + ky) * kw + kx];
            }
        y[(o * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// bilinear gather / scatter
// ---------------------------------------------------------------------------

namespace {
template <class T>
struct BilinearTap {
  int64_t x0, x1, y0, y1;
  T fx, fy;
};

template <class T>
BilinearTap<T> bilinear_tap(T u, T v, int64_t r) {
  u = std::min<T>(T(1), std::max<T>(T(0), u));
  v = std::min<T>(T(1), std::max<T>(T(0), v));
  const T gx = u * T(r - 1);
  const T gy = v * T(r - 1);
  BilinearTap<T> t;
  t.x0 = static_cast<int64_t>(gx);
  t.y0 = static_cast<int64_t>(gy);
  if (t.x0 > r - 2) t.x0 = std::max<int64_t>(0, r - 2);
  if (t.y0 > r - 2) t.y0 = std::max<int64_t>(0, r - 2);
  t.x1 = std::min<int64_t>(t.x0 + 1, r - 1);
  t.y1 = std::min<int64_t>(t.y0 + 1, r - 1);
  t.fx = gx - T(t.x0);
  t.fy = gy - T(t.y0);
  return t;
}
}  // namespace

template <class T>
void bilinear_gather(const T* plane, int64_t c, int64_t r, const T* uv,
                     int64_t p, T* out) {
  parallel_for(p, [&](int64_t i) {
    const auto t = bilinear_tap(uv[2 * i], uv[2 * i + 1], r);
    const T w00 = (T(1) - t.fx) * (T(1) - t.fy);
    const T w10 = t.fx * (T(1) - t.fy);
    const T w01 = (T(1) - t.fx) * t.fy;
    const T w11 = t.fx * t.fy;
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* pl = plane + ch * r * r;
      out[i * c + ch] = w00 * pl[t.y0 * r + t.x0] + w10 * pl[t.y0 * r + t.x1] +
                        w01 * pl[t.y1 * r + t.x0] + w11 * pl[t.y1 * r + t.x1];
    }
  });
}

template <class T>
void bilinear_scatter_acc(T* dplane, int64_t c, int64_t r, const T* uv,
                          int64_t p, const T* dout) {
  // Parallel over channels so each output plane has a single writer.
  parallel_for(c, [&](int64_t ch) {
    T* pl = dplane + ch * r * r;
    for (int64_t i = 0; i < p; ++i) {
      const auto t = bilinear_tap(uv[2 * i], uv[2 * i + 1], r);
      const T g = dout[i * c + ch];
      pl[t.y0 * r + t.x0] += (T(1) - t.fx) * (T(1) - t.fy) * g;
      pl[t.y0 * r + t.x1] += t.fx * (T(1) - t.fy) * g;
      pl[t.y1 * r + t.x0] += (T(1) - t.fx) * t.fy * g;
      pl[t.y1 * r + t.x1] += t.fx * t.fy * g;
    }
  });
}

// ---------------------------------------------------------------------------

#define TRIPOS_INSTANTIATE_KERNELS(T)                                          \
  template void gemm<T>(bool, bool, int64_t, int64_t, int64_t, const T*,       \
                        int64_t, const T*, int64_t, T*, int64_t, bool);        \
  template void gemm_serial<T>(bool, bool, int64_t, int64_t, int64_t,          \
                               const T*, int64_t, const T*, int64_t, T*,       \
                               int64_t, bool);                                 \
  template void gemm_parallel<T>(bool, bool, int64_t, int64_t, int64_t,        \
                                 const T*, int64_t, const T*, int64_t, T*,     \
                                 int64_t, bool);                               \
  template void im2col<T>(const T*, int64_t, int64_t, int64_t, int64_t,        \
                          int64_t, int64_t, int64_t, T*);                      \
  template void col2im_acc<T>(const T*, int64_t, int64_t, int64_t, int64_t,    \
                              int64_t, int64_t, int64_t, T*);                  \
  template void conv2d_direct_serial<T>(const T*, int64_t, int64_t, int64_t,   \
                                        const T*, int64_t, int64_t, int64_t,   \
                                        int64_t, int64_t, T*);                 \
  template void bilinear_gather<T>(const T*, int64_t, int64_t, const T*,       \
                                   int64_t, T*);                               \
  template void bilinear_scatter_acc<T>(T*, int64_t, int64_t, const T*,        \
                                        int64_t, const T*);

TRIPOS_INSTANTIATE_KERNELS(float)
TRIPOS_INSTANTIATE_KERNELS(double)

#undef TRIPOS_INSTANTIATE_KERNELS

}  // namespace tripos::ad::kern
