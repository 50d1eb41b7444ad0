// SPDX-License-Identifier: Apache-2.0
#include "avsr/data/batch.hpp"

#include <algorithm>
#include <numeric>

#include "avsr/core/error.hpp"

namespace avsr::data {

BatchIterator::BatchIterator(const ClipSet& set, std::size_t batch_size,
                             std::optional<std::uint64_t> shuffle_seed, const AugmentConfig& augment)
    : set_(set),
      batch_size_(batch_size),
      augment_(augment),
      augmenting_(augment.enabled && set.split == Split::kTrain),
      rng_(shuffle_seed.value_or(0) ^ 0x5eedull) {
  if (batch_size == 0) throw UsageError("batch size must be at least 1");
  if (set.empty()) throw EmptyDatasetError(std::string("the ") + split_name(set.split) + " split is empty");
  if (augmenting_) augment_.validate(set.extents.height, set.extents.width);
  order_.resize(set.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle_seed) {
    Rng shuffle(*shuffle_seed);
    std::shuffle(order_.begin(), order_.end(), shuffle.engine());
  }
}

Batch BatchIterator::next() {
  if (done()) throw UsageError("batch iterator is exhausted");
  const auto& e = set_.extents;
  const std::size_t n = std::min(batch_size_, order_.size() - cursor_);
  const std::size_t fv = e.frame_values(), av = e.audio_length;
  std::vector<double> video(n * fv), audio(n * av);
  Batch b;
  for (std::size_t i = 0; i < n; ++i) {
    const Clip& clip = set_.clips[order_[cursor_ + i]];
    if (clip.frames.size() != fv || clip.waveform.size() != av) {
      throw SizeError("clip " + clip.id + " does not match the declared extents");
    }
    if (augmenting_) {
      const auto f = augment_video(clip.frames, e.timesteps, e.height, e.width, augment_, rng_);
      const auto a = augment_audio(clip.waveform, augment_.audio_noise, rng_);
      std::copy(f.begin(), f.end(), video.begin() + static_cast<std::ptrdiff_t>(i * fv));
      std::copy(a.begin(), a.end(), audio.begin() + static_cast<std::ptrdiff_t>(i * av));
    } else {
      std::copy(clip.frames.begin(), clip.frames.end(), video.begin() + static_cast<std::ptrdiff_t>(i * fv));
      std::copy(clip.waveform.begin(), clip.waveform.end(), audio.begin() + static_cast<std::ptrdiff_t>(i * av));
    }
    b.labels.push_back(clip.label);
    b.ids.push_back(clip.id);
  }
  cursor_ += n;
  b.video = ad::Tensor::from({n, 1, e.timesteps, e.height, e.width}, std::move(video));
  b.audio = ad::Tensor::from({n, 1, av}, std::move(audio));
  return b;
}

}  // namespace avsr::data
