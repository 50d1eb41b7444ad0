// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace avsr::ad {

using Shape = std::vector<std::size_t>;

/// Element count of a shape; the empty shape is a scalar. Throws SizeError
/// when the product overflows the addressable size.
std::size_t numel(const Shape& shape);

std::string shape_str(const Shape& shape);

/// Storage behind a Tensor handle. Owned through shared_ptr so tape records
/// can keep intermediates alive until backward has run.
struct TensorNode {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

/// Dense row-major array of doubles with optional gradient. Copies share
/// storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor full(Shape shape, double value);
  static Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }
  static Tensor scalar(double value) { return full({}, value); }
  /// Gaussian fill reproducible from `seed`.
  static Tensor normal(Shape shape, std::uint64_t seed, double stddev);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor from(Shape shape, std::initializer_list<double> values) {
    return from(std::move(shape), std::vector<double>(values));
  }

  bool defined() const { return node_ != nullptr; }
  std::uint64_t id() const { return node_->id; }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient values; zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  /// Deep copy without gradient or graph linkage.
  Tensor clone() const;

  TensorNode& node() const { return *node_; }
  const std::shared_ptr<TensorNode>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

/// Allocates a fresh node with a unique id.
std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> data);

}  // namespace avsr::ad
