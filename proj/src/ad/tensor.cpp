// SPDX-License-Identifier: Apache-2.0
#include "avsr/ad/tensor.hpp"

#include <atomic>
#include <limits>
#include <random>
#include <sstream>

#include "avsr/core/error.hpp"

namespace avsr::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e != 0 && n > std::numeric_limits<std::size_t>::max() / sizeof(double) / e) {
      throw SizeError("tensor extent product overflows addressable size: " + shape_str(shape));
    }
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> data) {
  static std::atomic<std::uint64_t> next_id{1};
  auto node = std::make_shared<TensorNode>();
  node->id = next_id.fetch_add(1, std::memory_order_relaxed);
  node->shape = std::move(shape);
  node->data = std::move(data);
  return node;
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::normal(Shape shape, std::uint64_t seed, double stddev) {
  const std::size_t n = numel(shape);
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(n);
  for (auto& v : values) v = dist(engine);
  return Tensor(make_node(std::move(shape), std::move(values)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  }
  return Tensor(make_node(std::move(shape), std::move(values)));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(node_->data.size(), 0.0);
  return node_->grad;
}

Tensor Tensor::clone() const { return Tensor(make_node(node_->shape, node_->data)); }

}  // namespace avsr::ad
