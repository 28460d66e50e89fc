#include "hevs/layers.hpp"

namespace hevs::nn {

ChannelLayerNormImpl::ChannelLayerNormImpl(int64_t channels, double eps) : eps_(eps) {
  weight = register_parameter("weight", torch::ones({channels}));
  bias = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor ChannelLayerNormImpl::forward(const torch::Tensor& x) {
  const auto mu = x.mean(1, /*keepdim=*/true);
  const auto var = (x - mu).pow(2).mean(1, /*keepdim=*/true);
  const auto y = (x - mu) / torch::sqrt(var + eps_);
  return y * weight.view({1, -1, 1, 1}) + bias.view({1, -1, 1, 1});
}

}  // namespace hevs::nn
