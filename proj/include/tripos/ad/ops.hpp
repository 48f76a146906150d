// Copyright 2026 The tripos Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tripos/ad/tape.hpp"
#include "tripos/ad/tensor.hpp"

// Differentiable primitives. Every op computes its value eagerly; when an
// input is attached to a tape the op also registers a reverse-pass rule.
// Shape violations throw std::invalid_argument naming the primitive and the
// offending shapes.
namespace tripos::ad::ops {

// -- elementwise binary (numpy-style right-aligned broadcasting) ------------
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

// -- elementwise unary -------------------------------------------------------
template <class T> Tensor<T> neg(const Tensor<T>& x);
template <class T> Tensor<T> exp(const Tensor<T>& x);
template <class T> Tensor<T> log(const Tensor<T>& x);
template <class T> Tensor<T> pow(const Tensor<T>& x, double exponent);
template <class T> Tensor<T> sigmoid(const Tensor<T>& x);
template <class T> Tensor<T> softplus(const Tensor<T>& x);
template <class T> Tensor<T> relu(const Tensor<T>& x);
template <class T> Tensor<T> silu(const Tensor<T>& x);

// out = c * x  /  out = x + c
template <class T> Tensor<T> scale(const Tensor<T>& x, double c);
template <class T> Tensor<T> add_scalar(const Tensor<T>& x, double c);

// -- reductions --------------------------------------------------------------
template <class T> Tensor<T> sum_all(const Tensor<T>& x);   // shape {1}
template <class T> Tensor<T> mean_all(const Tensor<T>& x);  // shape {1}
template <class T> Tensor<T> reduce_sum(const Tensor<T>& x, int axis, bool keepdim = false);

// Cumulative sum along an axis.
template <class T> Tensor<T> cumsum(const Tensor<T>& x, int axis);

// -- linear algebra ----------------------------------------------------------
// 2D [M,K]x[K,N] or batched 3D [B,M,K]x[B,K,N]; trans_* apply to the last
// two axes of the stored operand.
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false,
                 bool trans_b = false);

// x:[N,C,H,W] w:[OC,C,kh,kw] bias:[OC] (optional, pass undefined Tensor).
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int stride, int pad);

// Nearest-neighbor upsample of [N,C,H,W] by an integer factor.
template <class T> Tensor<T> upsample_nearest(const Tensor<T>& x, int factor);

// Group normalization over [N,C,H,W] with per-channel affine.
template <class T>
Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, int groups, double eps = 1e-5);

// Softmax over the last axis.
template <class T> Tensor<T> softmax(const Tensor<T>& x);

// Scaled dot-product attention over [B,L,C] with multi-head split; composed
// from matmul/softmax so the reverse pass reuses their rules.
template <class T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    int heads);

// -- shape ops ----------------------------------------------------------------
template <class T> Tensor<T> concat(std::span<const Tensor<T>> parts, int axis);
template <class T> Tensor<T> slice(const Tensor<T>& x, int axis, int64_t start, int64_t len);
template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <class T> Tensor<T> transpose(const Tensor<T>& x, std::vector<int> perm);

// -- tri-plane lookup ---------------------------------------------------------
// plane:[C,R,R], uv:[P,2] in [0,1]^2 (border-clamped). uv is treated as a
// constant: gradients propagate to the plane values only.
template <class T>
Tensor<T> bilinear_sample(const Tensor<T>& plane, const Tensor<T>& uv);

// -- composite helpers --------------------------------------------------------
// x:[...,K] w:[K,N] b:[N] (optional) -> [...,N]
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

}  // namespace tripos::ad::ops
