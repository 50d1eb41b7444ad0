// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avsr/ad/tensor.hpp"
#include "avsr/core/random.hpp"
#include "avsr/data/augment.hpp"
#include "avsr/data/dataset.hpp"

namespace avsr::data {

struct Batch {
  ad::Tensor video;  // [B,1,T,H,W]
  ad::Tensor audio;  // [B,1,L]
  std::vector<int> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return labels.size(); }
};

/// One epoch over a decoded split. Order is a permutation drawn from
/// `shuffle_seed` (manifest order when absent); the last batch may be short.
/// Augmentation runs per clip and only on the train split.
class BatchIterator {
 public:
  /// UsageError for batch_size 0, EmptyDatasetError for an empty set.
  BatchIterator(const ClipSet& set, std::size_t batch_size,
                std::optional<std::uint64_t> shuffle_seed = std::nullopt,
                const AugmentConfig& augment = {});

  bool done() const { return cursor_ >= order_.size(); }
  Batch next();

  const std::vector<std::size_t>& order() const { return order_; }
  std::size_t batch_count() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

 private:
  const ClipSet& set_;
  std::size_t batch_size_;
  AugmentConfig augment_;
  bool augmenting_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace avsr::data
