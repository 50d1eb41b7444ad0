// SPDX-License-Identifier: Apache-2.0
#include "avsr/models/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "avsr/ad/ops.hpp"
#include "avsr/ad/tape.hpp"
#include "avsr/core/error.hpp"
#include "avsr/core/random.hpp"

namespace avsr::models {

namespace {

std::vector<int> repeat_labels(std::span<const int> labels, std::size_t timesteps) {
  std::vector<int> out;
  out.reserve(labels.size() * timesteps);
  for (int y : labels) out.insert(out.end(), timesteps, y);
  return out;
}

Tensor per_timestep_loss(const Tensor& logits, std::span<const int> labels) {
  const std::size_t b = logits.dim(0), t = logits.dim(1), c = logits.dim(2);
  if (labels.size() != b) {
    throw ShapeError("got " + std::to_string(labels.size()) + " labels for a batch of " +
                     std::to_string(b));
  }
  const auto expanded = repeat_labels(labels, t);
  return ad::cross_entropy(ad::reshape(logits, {b * t, c}), expanded);
}

}  // namespace

// ---- StreamModel --------------------------------------------------------

StreamModel::StreamModel(Modality modality, const ModelConfig& cfg, std::uint64_t seed,
                         bool headless)
    : SequenceModel(cfg), modality_(modality), headless_(headless) {
  if (modality == Modality::kFused) throw UsageError("a stream is audio or video");
  cfg.validate();
  Rng rng(seed);
  const std::size_t f = cfg.feature_width();
  if (modality == Modality::kVideo) {
    frontend_ = std::make_unique<nn::SpatiotemporalFrontend>(cfg.frontend_channels, rng);
    backbone_ = std::make_unique<nn::ResNetBackbone>(2, cfg.video_depth, cfg.frontend_channels,
                                                     cfg.stage_widths, rng);
    register_module("frontend", *frontend_);
  } else {
    backbone_ = std::make_unique<nn::ResNetBackbone>(1, cfg.audio_depth, 1, cfg.stage_widths, rng);
  }
  register_module("backbone", *backbone_);
  if (!headless) {
    backend_ = std::make_unique<nn::TemporalConvBackend>(f, cfg.backend_width, cfg.classes, rng);
    register_module("backend", *backend_);
  }
  bgru_ = std::make_unique<nn::BGRU>(f, cfg.gru_hidden, cfg.gru_layers, rng);
  register_module("bgru", *bgru_);
  if (cfg.attention_at(modality)) {
    attention_ = std::make_unique<nn::TemporalAttention>(cfg.timesteps);
    register_module("attention", *attention_);
  }
  if (!headless) {
    classifier_ = std::make_unique<nn::Classifier>(bgru_->out_features(), cfg.classes, rng);
    register_module("classifier", *classifier_);
  }
  set_head(StreamHead::kBgru);
}

void StreamModel::set_head(StreamHead head) {
  if (head == StreamHead::kTemporalConv && headless_) {
    throw UsageError("a headless stream has no temporal-conv back-end");
  }
  head_ = head;
  const bool conv = head == StreamHead::kTemporalConv;
  if (backend_) backend_->set_frozen(!conv);
  bgru_->set_frozen(conv);
  if (classifier_) classifier_->set_frozen(conv);
}

const Tensor& StreamModel::input_of(const ModelInput& in) const {
  const Tensor& x = modality_ == Modality::kVideo ? in.video : in.audio;
  if (!x.defined()) {
    throw ShapeError(std::string("missing ") + modality_name(modality_) + " input");
  }
  return x;
}

Tensor StreamModel::encode(const Tensor& input) {
  const auto& cfg = config();
  if (modality_ == Modality::kVideo) {
    if (input.rank() != 5 || input.dim(1) != 1 || input.dim(2) != cfg.timesteps ||
        input.dim(3) != cfg.height || input.dim(4) != cfg.width) {
      throw ShapeError("video stream expects [B,1," + std::to_string(cfg.timesteps) + "," +
                       std::to_string(cfg.height) + "," + std::to_string(cfg.width) + "], got " +
                       ad::shape_str(input.shape()));
    }
    return backbone_->forward_per_timestep(frontend_->forward(input));
  }
  if (input.rank() != 3 || input.dim(1) != 1 || input.dim(2) != cfg.audio_length) {
    throw ShapeError("audio stream expects [B,1," + std::to_string(cfg.audio_length) + "], got " +
                     ad::shape_str(input.shape()));
  }
  return backbone_->forward_audio(input, cfg.timesteps);
}

Tensor StreamModel::features(const Tensor& input) {
  Tensor h = bgru_->forward(encode(input));
  return attention_ ? attention_->forward(h) : h;
}

Tensor StreamModel::logits(const Tensor& input) {
  if (headless_) throw UsageError("a headless stream has no classifier");
  if (head_ == StreamHead::kTemporalConv) {
    Tensor h = encode(input);
    if (attention_) h = attention_->forward(h);
    return backend_->forward(h);
  }
  return classifier_->logits(features(input));
}

Tensor StreamModel::probabilities_from(const Tensor& z) const {
  ad::NoGradGuard no_grad;
  if (head_ == StreamHead::kBgru) return ad::softmax(z, 2);
  // One decision per sequence, repeated at every timestep.
  Tensor p = ad::softmax(z, 1);
  const std::size_t b = p.dim(0), c = p.dim(1), t = config().timesteps;
  std::vector<double> rows(b * t * c);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < t; ++s)
      std::copy_n(p.data().begin() + i * c, c, rows.begin() + (i * t + s) * c);
  return Tensor::from({b, t, c}, std::move(rows));
}

Tensor StreamModel::probabilities(const ModelInput& in) {
  return probabilities_from(logits(input_of(in)));
}

Tensor StreamModel::loss(const ModelInput& in, std::span<const int> labels, Tensor* probabilities) {
  Tensor z = logits(input_of(in));
  if (probabilities) *probabilities = probabilities_from(z);
  if (head_ == StreamHead::kTemporalConv) {
    if (labels.size() != z.dim(0)) throw ShapeError("label count does not match the batch");
    return ad::cross_entropy(z, labels);
  }
  return per_timestep_loss(z, labels);
}

// ---- FusedModel ---------------------------------------------------------

FusedModel::FusedModel(const ModelConfig& cfg, std::uint64_t seed) : SequenceModel(cfg) {
  cfg.validate();
  Rng rng(seed);
  video_ = std::make_unique<StreamModel>(Modality::kVideo, cfg, rng.fork(), true);
  audio_ = std::make_unique<StreamModel>(Modality::kAudio, cfg, rng.fork(), true);
  const std::size_t in = video_->bgru().out_features() + audio_->bgru().out_features();
  fusion_ = std::make_unique<nn::BGRU>(in, cfg.gru_hidden, cfg.gru_layers, rng);
  register_module("video", *video_);
  register_module("audio", *audio_);
  register_module("fusion", *fusion_);
  if (cfg.attention.combined) {
    attention_ = std::make_unique<nn::TemporalAttention>(cfg.timesteps);
    register_module("attention", *attention_);
  }
  classifier_ = std::make_unique<nn::Classifier>(fusion_->out_features(), cfg.classes, rng);
  register_module("classifier", *classifier_);
}

void FusedModel::set_streams_frozen(bool frozen) {
  video_->set_frozen(frozen);
  audio_->set_frozen(frozen);
}

Tensor FusedModel::logits(const ModelInput& in) {
  Tensor v = video_->features(video_->input_of(in));
  Tensor a = audio_->features(audio_->input_of(in));
  if (v.dim(0) != a.dim(0) || v.dim(1) != a.dim(1)) {
    throw ShapeError("stream features disagree: video " + ad::shape_str(v.shape()) + ", audio " +
                     ad::shape_str(a.shape()));
  }
  Tensor h = fusion_->forward(ad::concat({v, a}, 2));
  if (attention_) h = attention_->forward(h);
  return classifier_->logits(h);
}

Tensor FusedModel::probabilities(const ModelInput& in) { return ad::softmax(logits(in), 2); }

Tensor FusedModel::loss(const ModelInput& in, std::span<const int> labels, Tensor* probabilities) {
  Tensor z = logits(in);
  if (probabilities) {
    ad::NoGradGuard no_grad;
    *probabilities = ad::softmax(z, 2);
  }
  return per_timestep_loss(z, labels);
}

std::unique_ptr<SequenceModel> make_model(Modality modality, const ModelConfig& cfg,
                                          std::uint64_t seed) {
  if (modality == Modality::kFused) return std::make_unique<FusedModel>(cfg, seed);
  return std::make_unique<StreamModel>(modality, cfg, seed);
}

// ---- sequence labelling -------------------------------------------------

std::pair<int, double> classify_sequence(std::span<const double> probs, std::size_t timesteps,
                                         std::size_t classes) {
  if (timesteps == 0 || classes == 0 || probs.size() != timesteps * classes) {
    throw ProbabilityError("probability grid has " + std::to_string(probs.size()) +
                           " entries, expected " + std::to_string(timesteps) + " x " +
                           std::to_string(classes));
  }
  std::vector<double> avg(classes, 0.0);
  for (std::size_t t = 0; t < timesteps; ++t) {
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = probs[t * classes + c];
      if (!std::isfinite(p) || p < 0.0) {
        throw ProbabilityError("row " + std::to_string(t) + " holds an invalid probability");
      }
      total += p;
      avg[c] += p;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw ProbabilityError("row " + std::to_string(t) + " sums to " + std::to_string(total));
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    if (avg[c] > avg[best]) best = c;
  }
  return {static_cast<int>(best), avg[best] / static_cast<double>(timesteps)};
}

std::pair<int, double> classify_sequence(const Tensor& probs) {
  if (probs.rank() != 2) throw ProbabilityError("expected [T,C], got " + ad::shape_str(probs.shape()));
  return classify_sequence(probs.data(), probs.dim(0), probs.dim(1));
}

// ---- initialization from streams ----------------------------------------

std::unique_ptr<FusedModel> init_fused_from_streams(const nn::StateDict& audio,
                                                    const nn::StateDict& video,
                                                    const ModelConfig& cfg, std::uint64_t seed) {
  auto fused = std::make_unique<FusedModel>(cfg, seed);
  auto load = [](StreamModel& stream, const nn::StateDict& dict, const char* which) {
    try {
      nn::load_state_dict(stream, dict, true);
    } catch (const CheckpointError& e) {
      throw CheckpointError(std::string(which) + " stream: " + e.what());
    }
  };
  load(fused->audio(), audio, "audio");
  load(fused->video(), video, "video");
  return fused;
}

// ---- model-level gradient check -----------------------------------------

ad::GradCheckReport model_grad_check(SequenceModel& model, std::size_t batch,
                                     std::size_t coordinates, const ad::GradCheckOptions& opt) {
  const auto& cfg = model.config();
  Rng rng(opt.seed + 17);
  ModelInput in;
  if (model.modality() != Modality::kAudio) {
    in.video = Tensor::zeros({batch, 1, cfg.timesteps, cfg.height, cfg.width});
    for (double& v : in.video.mutable_data()) v = rng.uniform();
  }
  if (model.modality() != Modality::kVideo) {
    in.audio = Tensor::zeros({batch, 1, cfg.audio_length});
    for (double& v : in.audio.mutable_data()) v = rng.normal(0.0, 0.3);
  }
  std::vector<int> labels(batch);
  for (auto& y : labels) y = static_cast<int>(rng.uniform_int(0, cfg.classes - 1));

  std::vector<ad::NamedTensor> params;
  for (const auto& e : model.parameters()) {
    if (e.tensor.requires_grad()) params.emplace_back(e.name, e.tensor);
  }
  if (params.empty()) throw UsageError("model has no trainable parameters");
  ad::GradCheckOptions o = opt;
  o.allow_unverified = true;
  o.probes = std::max<std::size_t>(1, (coordinates + params.size() - 1) / params.size());
  return ad::grad_check([&] { return model.loss(in, labels); }, params, o);
}

}  // namespace avsr::models
