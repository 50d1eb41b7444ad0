// SPDX-License-Identifier: Apache-2.0
#include "avsr/ad/gradcheck_suite.hpp"

#include <cmath>
#include <random>

#include "avsr/ad/ops.hpp"

namespace avsr::ad {

namespace {

Tensor param(Shape shape, std::uint64_t seed, double stddev = 1.0) {
  Tensor t = Tensor::normal(std::move(shape), seed, stddev);
  t.set_requires_grad(true);
  return t;
}

// Values bounded away from zero so kinks (relu, max) sit far from +-eps.
Tensor param_away_from_zero(Shape shape, std::uint64_t seed) {
  Tensor t = Tensor::normal(std::move(shape), seed, 1.0);
  for (double& v : t.mutable_data()) v = (v >= 0 ? 0.1 : -0.1) + v;
  t.set_requires_grad(true);
  return t;
}

GradCheckCase make_case(std::string name, std::function<Tensor(const std::vector<Tensor>&)> body,
                        std::vector<NamedTensor> params) {
  return GradCheckCase{std::move(name), [body = std::move(body), params = std::move(params)](
                                            const GradCheckOptions& opt) {
                         std::vector<Tensor> ts;
                         for (const auto& [n, t] : params) ts.push_back(t);
                         return grad_check([&] { return probe_objective(body(ts)); }, params, opt);
                       }};
}

}  // namespace

Tensor probe_objective(const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<double> w(out.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = dist(engine) * ((i % 2) ? -1.0 : 1.0);
  return dot_const(out, w);
}

std::vector<GradCheckCase> op_gradcheck_cases() {
  std::vector<GradCheckCase> cases;
  auto ab = [](std::uint64_t s, Shape shape) {
    return std::vector<NamedTensor>{{"a", param(shape, s)}, {"b", param(shape, s + 1)}};
  };
  cases.push_back(make_case("add", [](auto& t) { return add(t[0], t[1]); }, ab(1, {3, 4})));
  cases.push_back(make_case("sub", [](auto& t) { return sub(t[0], t[1]); }, ab(3, {3, 4})));
  cases.push_back(make_case("mul", [](auto& t) { return mul(t[0], t[1]); }, ab(5, {2, 3, 2})));
  cases.push_back(make_case("scale", [](auto& t) { return scale(t[0], -2.5); }, {{"x", param({5}, 7)}}));
  cases.push_back(make_case("sum", [](auto& t) { return sum(mul(t[0], t[0])); }, {{"x", param({4, 3}, 8)}}));
  cases.push_back(make_case("mean", [](auto& t) { return mean(mul(t[0], t[0])); }, {{"x", param({4, 3}, 9)}}));
  cases.push_back(make_case("reshape", [](auto& t) { return reshape(t[0], {6, 2}); }, {{"x", param({3, 4}, 10)}}));
  cases.push_back(make_case("permute", [](auto& t) { return permute(t[0], {2, 0, 1}); },
                            {{"x", param({2, 3, 4}, 11)}}));
  cases.push_back(make_case("concat", [](auto& t) { return concat({t[0], t[1]}, 2); },
                            {{"a", param({2, 3, 2}, 12)}, {"b", param({2, 3, 5}, 13)}}));
  cases.push_back(make_case("mean_axis", [](auto& t) { return mean_axis(t[0], 1); }, {{"x", param({2, 5, 3}, 14)}}));
  cases.push_back(make_case("relu", [](auto& t) { return relu(t[0]); }, {{"x", param_away_from_zero({4, 5}, 15)}}));
  cases.push_back(make_case("sigmoid", [](auto& t) { return sigmoid(t[0]); }, {{"x", param({4, 5}, 16, 2.0)}}));
  cases.push_back(make_case("tanh", [](auto& t) { return ad::tanh(t[0]); }, {{"x", param({4, 5}, 17)}}));
  cases.push_back(make_case("softmax", [](auto& t) { return softmax(t[0], 1); }, {{"x", param({3, 4, 2}, 18)}}));
  cases.push_back(make_case("cross_entropy",
                            [](auto& t) {
                              static const int labels[] = {0, 3, 1, 2, 3};
                              return cross_entropy(t[0], labels);
                            },
                            {{"logits", param({5, 4}, 19, 2.0)}}));
  cases.push_back(make_case("matmul", [](auto& t) { return matmul(t[0], t[1]); },
                            {{"a", param({3, 4}, 20)}, {"b", param({4, 5}, 21)}}));
  cases.push_back(make_case("affine", [](auto& t) { return affine(t[0], t[1], t[2]); },
                            {{"x", param({3, 4}, 22)}, {"w", param({4, 2}, 23)}, {"bias", param({2}, 24)}}));
  cases.push_back(make_case("add_channel_bias", [](auto& t) { return add_channel_bias(t[0], t[1]); },
                            {{"x", param({2, 3, 4}, 25)}, {"bias", param({3}, 26)}}));
  cases.push_back(make_case("conv1d", [](auto& t) { return conv1d(t[0], t[1], t[2], 2, 1); },
                            {{"input", param({2, 3, 9}, 27)},
                             {"weight", param({4, 3, 3}, 28)},
                             {"bias", param({4}, 29)}}));
  cases.push_back(make_case("conv2d", [](auto& t) { return conv2d(t[0], t[1], t[2], 2, 1); },
                            {{"input", param({2, 2, 5, 6}, 30)},
                             {"weight", param({3, 2, 3, 3}, 31)},
                             {"bias", param({3}, 32)}}));
  cases.push_back(make_case("conv3d",
                            [](auto& t) { return conv3d(t[0], t[1], t[2], {1, 2, 2}, {1, 1, 1}); },
                            {{"input", param({1, 2, 3, 5, 5}, 33)},
                             {"weight", param({2, 2, 3, 3, 3}, 34)},
                             {"bias", param({2}, 35)}}));
  cases.push_back(make_case("max_pool1d",
                            [](auto& t) { return max_pool(t[0], {3}, Window{{2}, {1}}); },
                            {{"x", param({2, 2, 9}, 36)}}));
  cases.push_back(make_case("max_pool2d",
                            [](auto& t) { return max_pool(t[0], {3, 3}, Window{{2, 2}, {1, 1}}); },
                            {{"x", param({2, 2, 5, 5}, 37)}}));
  cases.push_back(make_case("global_avg_pool", [](auto& t) { return global_avg_pool(t[0]); },
                            {{"x", param({2, 3, 4, 2}, 38)}}));
  cases.push_back(make_case("segment_mean", [](auto& t) { return segment_mean(t[0], 3); },
                            {{"x", param({2, 2, 10}, 39)}}));
  cases.push_back(make_case("replicate_pad", [](auto& t) { return replicate_pad(t[0], 3); },
                            {{"x", param({2, 2, 4}, 53)}}));
  {
    auto state = std::make_shared<BatchNormState>();
    state->running_mean = Tensor::zeros({3});
    state->running_var = Tensor::full({3}, 1.0);
    cases.push_back(make_case("batchnorm_train",
                              [state](auto& t) { return batchnorm(t[0], t[1], t[2], *state, true); },
                              {{"x", param({4, 3, 5}, 40)},
                               {"gamma", param({3}, 41)},
                               {"beta", param({3}, 42)}}));
  }
  {
    auto state = std::make_shared<BatchNormState>();
    state->running_mean = Tensor::normal({3}, 43, 0.3);
    state->running_var = Tensor::full({3}, 1.7);
    cases.push_back(make_case("batchnorm_eval",
                              [state](auto& t) { return batchnorm(t[0], t[1], t[2], *state, false); },
                              {{"x", param({4, 3, 5}, 44)},
                               {"gamma", param({3}, 45)},
                               {"beta", param({3}, 46)}}));
  }
  cases.push_back(make_case("temporal_gate", [](auto& t) { return temporal_gate(t[0], t[1]); },
                            {{"x", param({2, 4, 3}, 47)}, {"raw", param({4}, 48)}}));
  for (bool reverse : {false, true}) {
    cases.push_back(make_case(reverse ? "gru_sequence_reverse" : "gru_sequence",
                              [reverse](auto& t) { return gru_sequence(t[0], t[1], t[2], t[3], reverse); },
                              {{"x", param({2, 4, 3}, 49)},
                               {"w_ih", param({3, 15}, 50, 0.5)},
                               {"w_hh", param({5, 15}, 51, 0.5)},
                               {"bias", param({15}, 52, 0.5)}}));
  }
  return cases;
}

}  // namespace avsr::ad
