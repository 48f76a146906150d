// Copyright 2026 The tripos Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>

#include "tripos/ad/kernels.hpp"
#include "tripos/ad/ops.hpp"

namespace tripos::ad::ops::detail {

template <class T>
Tape<T>* common_tape(const char* op, std::initializer_list<const Tensor<T>*> ts) {
  Tape<T>* tape = nullptr;
  for (const Tensor<T>* t : ts) {
    if (!t->on_tape()) continue;
    if (tape && t->tape() != tape)
      throw std::invalid_argument(std::string(op) + ": inputs belong to different computation records");
    tape = t->tape();
  }
  return tape;
}

[[noreturn]] inline void shape_error(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

// Broadcast result shape; throws with the op name on mismatch.
inline Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  const size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (size_t i = 0; i < rank; ++i) {
    const int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      shape_error(op, "shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcastable");
    out[i] = std::max(da, db);
  }
  return out;
}

// Strides of `in` padded to `out` rank, 0 where broadcast.
inline Shape broadcast_strides(const Shape& in, const Shape& out) {
  Shape st(out.size(), 0);
  const Shape real = strides_of(in);
  const size_t off = out.size() - in.size();
  for (size_t i = 0; i < in.size(); ++i)
    st[off + i] = (in[i] == 1 && out[off + i] != 1) ? 0 : real[i];
  return st;
}

// Odometer walk over `out_shape`, calling f(out_flat, a_off, b_off).
template <class F>
void broadcast_walk(const Shape& out_shape, const Shape& sa, const Shape& sb, F&& f) {
  const int64_t n = numel(out_shape);
  const size_t rank = out_shape.size();
  Shape idx(rank, 0);
  int64_t ao = 0, bo = 0;
  for (int64_t flat = 0; flat < n; ++flat) {
    f(flat, ao, bo);
    for (size_t d = rank; d-- > 0;) {
      ++idx[d];
      ao += sa[d];
      bo += sb[d];
      if (idx[d] < out_shape[d]) break;
      ao -= sa[d] * out_shape[d];
      bo -= sb[d] * out_shape[d];
      idx[d] = 0;
    }
  }
}

// grad over `out_shape` summed down to `in_shape`, accumulated into `acc`.
template <class T>
void reduce_grad_to_shape(const std::vector<T>& grad, const Shape& out_shape,
                          const Shape& in_shape, std::vector<T>& acc) {
  if (in_shape == out_shape) {
    for (size_t i = 0; i < grad.size(); ++i) acc[i] += grad[i];
    return;
  }
  if (numel(in_shape) == 1) {
    T s = 0;
    for (const T& g : grad) s += g;
    acc[0] += s;
    return;
  }
  // Fast path: trailing-tail broadcast ([...,N] from [...,M,N,...]) where the
  // input occupies the last axes exactly.
  const Shape st = broadcast_strides(in_shape, out_shape);
  bool tail = true;
  {
    const size_t off = out_shape.size() - in_shape.size();
    for (size_t i = 0; i < in_shape.size(); ++i)
      if (in_shape[i] != out_shape[off + i]) tail = false;
  }
  if (tail) {
    const int64_t inner = numel(in_shape);
    const int64_t outer = numel(out_shape) / inner;
    for (int64_t o = 0; o < outer; ++o) {
      const T* g = grad.data() + o * inner;
      for (int64_t i = 0; i < inner; ++i) acc[static_cast<size_t>(i)] += g[i];
    }
    return;
  }
  Shape zero(out_shape.size(), 0);
  broadcast_walk(out_shape, st, zero, [&](int64_t flat, int64_t in_off, int64_t) {
    acc[static_cast<size_t>(in_off)] += grad[static_cast<size_t>(flat)];
  });
}

}  // namespace tripos::ad::ops::detail
