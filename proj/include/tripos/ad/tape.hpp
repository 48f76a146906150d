// Copyright 2026 The tripos Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tripos/ad/tensor.hpp"

namespace tripos::ad {

// Append-only record of executed primitives. Backward visits the records
// exactly once, in reverse execution order, which makes gradients a
// deterministic function of the record.
//
// Usage: watch() the tensors that need gradients (this returns a leaf handle
// sharing the same buffer), build the graph with the ops in ops.hpp, then
// call backward() on a scalar output and read grad() of each leaf handle.
template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `t` as a gradient leaf and returns the handle to build with.
  Tensor<T> watch(const Tensor<T>& t) {
    if (t.on_tape())
      throw std::invalid_argument("Tape::watch: tensor already participates in a computation record");
    Tensor<T> h = t;
    h.tape_ = this;
    h.node_ = add_node(t.shape(), /*needed=*/true);
    return h;
  }

  // Attaches an op output. Called by the ops layer.
  Tensor<T> attach_output(Tensor<T> value, const std::vector<int>& input_nodes) {
    bool needed = false;
    for (int n : input_nodes)
      if (n >= 0 && needed_[static_cast<size_t>(n)]) needed = true;
    value.tape_ = this;
    value.node_ = add_node(value.shape(), needed);
    return value;
  }

  void record(int out_node, std::string name, std::function<void(Tape&)> bw) {
    records_.push_back(Record{out_node, std::move(name), std::move(bw)});
  }

  // True if gradients w.r.t. this node contribute to any watched leaf.
  bool needs(int node) const { return node >= 0 && needed_[static_cast<size_t>(node)]; }

  size_t num_records() const { return records_.size(); }
  size_t num_nodes() const { return shapes_.size(); }

  // Reverse pass from a scalar output.
  void backward(const Tensor<T>& output) {
    if (output.numel() != 1)
      throw std::invalid_argument("Tape::backward: output must be scalar, got shape " + shape_str(output.shape()));
    backward_seeded(output, std::vector<T>{T(1)});
  }

  // Reverse pass with an explicit seed gradient (vector-Jacobian product).
  void backward_seeded(const Tensor<T>& output, const std::vector<T>& seed) {
    if (output.tape() != this || !output.on_tape())
      throw std::invalid_argument("Tape::backward: output is not attached to this tape");
    if (static_cast<int64_t>(seed.size()) != output.numel())
      throw std::invalid_argument("Tape::backward: seed size mismatch");
    grads_.assign(shapes_.size(), {});
    grads_[static_cast<size_t>(output.node())] = seed;
    for (size_t i = records_.size(); i-- > 0;) {
      const Record& r = records_[i];
      if (grads_[static_cast<size_t>(r.out)].empty()) continue;  // no downstream influence
      r.bw(*this);
    }
    ran_backward_ = true;
  }

  bool has_grad(int node) const {
    return node >= 0 && !grads_[static_cast<size_t>(node)].empty();
  }

  // Accumulation buffer for a node's gradient, zero-initialized on demand.
  std::vector<T>& grad_buf(int node) {
    auto& g = grads_[static_cast<size_t>(node)];
    if (g.empty()) g.assign(static_cast<size_t>(numel(shapes_[static_cast<size_t>(node)])), T(0));
    return g;
  }

  const std::vector<T>& grad_ref(int node) const { return grads_[static_cast<size_t>(node)]; }

  // Gradient of a watched leaf (or any attached tensor); zeros if the output
  // did not depend on it.
  Tensor<T> grad(const Tensor<T>& t) const {
    if (t.tape() != this || !t.on_tape())
      throw std::invalid_argument("Tape::grad: tensor is not attached to this tape");
    if (!ran_backward_) throw std::logic_error("Tape::grad: backward has not run");
    const auto& g = grads_[static_cast<size_t>(t.node())];
    if (g.empty()) return Tensor<T>(t.shape());
    return Tensor<T>(t.shape(), g);
  }

  const Shape& node_shape(int node) const { return shapes_[static_cast<size_t>(node)]; }

 private:
  struct Record {
    int out;
    std::string name;
    std::function<void(Tape&)> bw;
  };

  int add_node(const Shape& s, bool needed) {
    shapes_.push_back(s);
    needed_.push_back(needed);
    return static_cast<int>(shapes_.size()) - 1;
  }

  std::vector<Shape> shapes_;
  std::vector<bool> needed_;
  std::vector<Record> records_;
  std::vector<std::vector<T>> grads_;
  bool ran_backward_ = false;
};

}  // namespace tripos::ad
