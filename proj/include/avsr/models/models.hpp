// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <utility>

#include "avsr/ad/gradcheck.hpp"
#include "avsr/models/config.hpp"
#include "avsr/nn/layers.hpp"
#include "avsr/nn/state_dict.hpp"

namespace avsr::models {

using ad::Tensor;

/// One batch of model inputs. `video` is [B,1,T,H,W], `audio` is [B,1,L];
/// a stream model reads only its own modality.
struct ModelInput {
  Tensor video;
  Tensor audio;
};

/// Common surface the training engine drives.
class SequenceModel : public nn::Module {
 public:
  explicit SequenceModel(ModelConfig cfg) : cfg_(std::move(cfg)) {}

  virtual Modality modality() const = 0;
  /// Per-timestep class probabilities [B,T,C].
  virtual Tensor probabilities(const ModelInput& in) = 0;
  /// Mean cross-entropy of the model's training objective. When
  /// `probabilities` is non-null it receives the [B,T,C] probabilities of
  /// the same forward pass (not recorded on the tape).
  virtual Tensor loss(const ModelInput& in, std::span<const int> labels,
                      Tensor* probabilities = nullptr) = 0;

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
};

/// Which head follows the stream's encoder.
enum class StreamHead { kTemporalConv, kBgru };

/// Audio or video stream: encoder (front-end + backbone) -> head. With the
/// BGRU head: BGRU -> attention -> per-timestep classifier. With the
/// temporal-conv head: attention -> temporal conv back-end. A headless
/// stream (inside the fused model) keeps only the encoder, BGRU and
/// attention.
class StreamModel : public SequenceModel {
 public:
  StreamModel(Modality modality, const ModelConfig& cfg, std::uint64_t seed,
              bool headless = false);

  Modality modality() const override { return modality_; }
  bool headless() const { return headless_; }

  /// Switches the active head. The inactive head is frozen so it never
  /// reaches the optimizer.
  void set_head(StreamHead head);
  StreamHead head() const { return head_; }

  /// Front-end and backbone: [B,T,F].
  Tensor encode(const Tensor& input);
  /// Encoder -> BGRU -> attention: [B,T,2H].
  Tensor features(const Tensor& input);
  /// Temporal-conv head: [B,C]. BGRU head: [B,T,C].
  Tensor logits(const Tensor& input);

  Tensor probabilities(const ModelInput& in) override;
  Tensor loss(const ModelInput& in, std::span<const int> labels,
              Tensor* probabilities = nullptr) override;

  const Tensor& input_of(const ModelInput& in) const;

  nn::TemporalAttention* attention() { return attention_.get(); }
  nn::BGRU& bgru() { return *bgru_; }
  nn::Classifier* classifier() { return classifier_.get(); }
  nn::TemporalConvBackend* backend() { return backend_.get(); }
  nn::ResNetBackbone& backbone() { return *backbone_; }
  nn::SpatiotemporalFrontend* frontend() { return frontend_.get(); }

 private:
  Tensor probabilities_from(const Tensor& logits) const;

  Modality modality_;
  bool headless_;
  StreamHead head_ = StreamHead::kBgru;
  std::unique_ptr<nn::SpatiotemporalFrontend> frontend_;
  std::unique_ptr<nn::ResNetBackbone> backbone_;
  std::unique_ptr<nn::TemporalConvBackend> backend_;
  std::unique_ptr<nn::BGRU> bgru_;
  std::unique_ptr<nn::TemporalAttention> attention_;
  std::unique_ptr<nn::Classifier> classifier_;
};

/// Late fusion: concat(video features, audio features) -> fusion BGRU ->
/// combined attention -> per-timestep classifier.
class FusedModel : public SequenceModel {
 public:
  FusedModel(const ModelConfig& cfg, std::uint64_t seed);

  Modality modality() const override { return Modality::kFused; }
  Tensor probabilities(const ModelInput& in) override;
  Tensor loss(const ModelInput& in, std::span<const int> labels,
              Tensor* probabilities = nullptr) override;
  Tensor logits(const ModelInput& in);

  /// Freezes or releases both streams.
  void set_streams_frozen(bool frozen);

  StreamModel& video() { return *video_; }
  StreamModel& audio() { return *audio_; }
  nn::BGRU& fusion() { return *fusion_; }
  nn::TemporalAttention* attention() { return attention_.get(); }
  nn::Classifier& classifier() { return *classifier_; }

 private:
  std::unique_ptr<StreamModel> video_;
  std::unique_ptr<StreamModel> audio_;
  std::unique_ptr<nn::BGRU> fusion_;
  std::unique_ptr<nn::TemporalAttention> attention_;
  std::unique_ptr<nn::Classifier> classifier_;
};

/// Builds the model for `modality` (streams start with the BGRU head).
std::unique_ptr<SequenceModel> make_model(Modality modality, const ModelConfig& cfg,
                                          std::uint64_t seed);

/// Label with the highest mean probability over timesteps and that mean.
/// probs is [T,C]; rows must be finite, non-negative and sum to 1 within
/// 1e-6 (ProbabilityError otherwise). Ties go to the lowest class index.
std::pair<int, double> classify_sequence(std::span<const double> probs, std::size_t timesteps,
                                         std::size_t classes);
std::pair<int, double> classify_sequence(const Tensor& probs);

/// Fused model whose streams are copied from trained stream states; the
/// fusion BGRU, combined attention and classifier are fresh from `seed`.
/// CheckpointError on missing or incompatible entries.
std::unique_ptr<FusedModel> init_fused_from_streams(const nn::StateDict& audio,
                                                    const nn::StateDict& video,
                                                    const ModelConfig& cfg, std::uint64_t seed);

/// Gradient check of the training loss of a whole model on a random batch.
/// Probes are spread evenly so at least `coordinates` are attempted; early
/// parameters whose every coordinate straddles a relu/max-pool switch are
/// reported as unverified rather than failed.
ad::GradCheckReport model_grad_check(SequenceModel& model, std::size_t batch,
                                     std::size_t coordinates, const ad::GradCheckOptions& opt);

}  // namespace avsr::models
