// SPDX-License-Identifier: Apache-2.0
#include "avsr/nn/gradcheck_layers.hpp"

#include <memory>

#include "avsr/nn/layers.hpp"

namespace avsr::nn {

std::vector<ad::NamedTensor> named_parameters(const Module& m, const std::string& prefix) {
  std::vector<ad::NamedTensor> out;
  for (const auto& e : m.parameters(prefix)) out.emplace_back(e.name, e.tensor);
  return out;
}

namespace {

Tensor random_input(Shape shape, std::uint64_t seed) {
  Tensor t = Tensor::normal(std::move(shape), seed, 1.0);
  t.set_requires_grad(true);
  return t;
}

// Builds the layer once; the case keeps it alive and re-runs `body` on the
// same input for every perturbation.
template <typename Layer, typename Body>
ad::GradCheckCase layer_case(std::string name, std::shared_ptr<Layer> layer, Tensor input,
                             Body body) {
  return ad::GradCheckCase{name, [layer, input, body](const ad::GradCheckOptions& opt) {
                             auto params = named_parameters(*layer);
                             params.emplace_back("input", input);
                             return ad::grad_check(
                                 [&] { return ad::probe_objective(body(*layer, input)); }, params,
                                 opt);
                           }};
}

}  // namespace

std::vector<ad::GradCheckCase> layer_gradcheck_cases() {
  std::vector<ad::GradCheckCase> cases;
  Rng rng(2024);

  cases.push_back(layer_case("frontend", std::make_shared<SpatiotemporalFrontend>(2, rng),
                             random_input({1, 1, 3, 9, 9}, 1),
                             [](SpatiotemporalFrontend& l, const Tensor& x) { return l.forward(x); }));
  cases.push_back(layer_case("residual_block_2d",
                             std::make_shared<ResidualBlock>(2, 2, 3, 2, rng),
                             random_input({2, 2, 5, 5}, 2),
                             [](ResidualBlock& l, const Tensor& x) { return l.forward(x); }));
  cases.push_back(layer_case("residual_block_1d",
                             std::make_shared<ResidualBlock>(1, 2, 3, 2, rng),
                             random_input({2, 2, 9}, 3),
                             [](ResidualBlock& l, const Tensor& x) { return l.forward(x); }));
  cases.push_back(layer_case("resnet2d_per_timestep",
                             std::make_shared<ResNetBackbone>(2, 18, 2,
                                                              std::vector<std::size_t>{2, 2, 3, 3}, rng),
                             random_input({2, 2, 3, 8, 8}, 4),
                             [](ResNetBackbone& l, const Tensor& x) { return l.forward_per_timestep(x); }));
  cases.push_back(layer_case("resnet1d_audio",
                             std::make_shared<ResNetBackbone>(1, 18, 1,
                                                              std::vector<std::size_t>{2, 2, 3, 3}, rng),
                             random_input({2, 1, 300}, 5),
                             [](ResNetBackbone& l, const Tensor& x) { return l.forward_audio(x, 3); }));
  cases.push_back(layer_case("bgru", std::make_shared<BGRU>(3, 4, 2, rng), random_input({2, 4, 3}, 6),
                             [](BGRU& l, const Tensor& x) { return l.forward(x); }));
  {
    auto attn = std::make_shared<TemporalAttention>(4);
    Rng r(7);
    for (double& v : attn->raw().mutable_data()) v = r.normal(0.0, 1.0);
    cases.push_back(layer_case("temporal_attention", attn, random_input({2, 4, 3}, 8),
                               [](TemporalAttention& l, const Tensor& x) { return l.forward(x); }));
  }
  cases.push_back(layer_case("temporal_conv_backend",
                             std::make_shared<TemporalConvBackend>(3, 4, 5, rng),
                             random_input({3, 6, 3}, 9),
                             [](TemporalConvBackend& l, const Tensor& x) { return l.forward(x); }));
  {
    auto clf = std::make_shared<Classifier>(3, 4, rng);
    Rng r(10);
    for (double& v : clf->linear().bias().mutable_data()) v = r.normal(0.0, 0.5);
    cases.push_back(layer_case("classifier", clf, random_input({2, 3, 3}, 11),
                               [](Classifier& l, const Tensor& x) { return l.forward(x); }));
  }
  return cases;
}

}  // namespace avsr::nn
