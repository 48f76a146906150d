// Copyright 2026 The tripos Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "tripos/ad/shape.hpp"

namespace tripos::ad {

template <class T>
class Tape;

// A dense row-major tensor. Copies are shallow (shared buffer); buffers that
// participate in a live tape are treated as immutable until the tape is done.
// `node() >= 0` means this handle is attached to a tape, either as a watched
// leaf or as the output of a recorded primitive.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        buf_(std::make_shared<std::vector<T>>(static_cast<size_t>(ad::numel(shape_)), T(0))) {}

  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), buf_(std::make_shared<std::vector<T>>(std::move(values))) {
    if (static_cast<int64_t>(buf_->size()) != ad::numel(shape_))
      throw std::invalid_argument("Tensor: data length " + std::to_string(buf_->size()) +
                                  " does not match shape " + shape_str(shape_));
  }

  static Tensor full(Shape shape, T value) {
    Tensor t(std::move(shape));
    for (auto& v : *t.buf_) v = value;
    return t;
  }

  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  static Tensor from(Shape shape, std::initializer_list<T> values) {
    return Tensor(std::move(shape), std::vector<T>(values));
  }

  const Shape& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  int64_t numel() const { return buf_ ? static_cast<int64_t>(buf_->size()) : 0; }
  bool defined() const { return static_cast<bool>(buf_); }

  T* data() { return buf_->data(); }
  const T* data() const { return buf_->data(); }
  std::span<T> span() { return {buf_->data(), buf_->size()}; }
  std::span<const T> span() const { return {buf_->data(), buf_->size()}; }
  std::vector<T>& vec() { return *buf_; }
  const std::vector<T>& vec() const { return *buf_; }
  const std::shared_ptr<std::vector<T>>& buffer() const { return buf_; }

  T item() const {
    if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor is not scalar, shape " + shape_str(shape_));
    return (*buf_)[0];
  }

  T& at(std::initializer_list<int64_t> idx) {
    return (*buf_)[static_cast<size_t>(flat_index(idx))];
  }
  T at(std::initializer_list<int64_t> idx) const {
    return (*buf_)[static_cast<size_t>(flat_index(idx))];
  }

  // A deep copy detached from any tape.
  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.buf_ = std::make_shared<std::vector<T>>(*buf_);
    return t;
  }

  // Same buffer viewed with a different shape (numel must match).
  Tensor view(Shape shape) const {
    if (ad::numel(shape) != numel())
      throw std::invalid_argument("Tensor::view: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(buf_->size());
    for (size_t i = 0; i < buf_->size(); ++i) out[i] = static_cast<U>((*buf_)[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  bool on_tape() const { return node_ >= 0; }
  int node() const { return node_; }
  Tape<T>* tape() const { return tape_; }

  // Detached handle: same data, no tape attachment.
  Tensor detach() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    t.node_ = -1;
    return t;
  }

 private:
  int64_t flat_index(std::initializer_list<int64_t> idx) const {
    if (idx.size() != shape_.size()) throw std::invalid_argument("Tensor::at: index rank mismatch");
    int64_t flat = 0;
    size_t i = 0;
    for (int64_t v : idx) {
      flat = flat * shape_[i] + v;
      ++i;
    }
    return flat;
  }

  Shape shape_;
  std::shared_ptr<std::vector<T>> buf_;
  Tape<T>* tape_ = nullptr;
  int node_ = -1;

  friend class Tape<T>;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace tripos::ad
