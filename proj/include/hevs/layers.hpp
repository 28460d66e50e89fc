#pragma once

#include <torch/torch.h>

namespace hevs::nn {

inline torch::nn::Conv2d conv2d(int64_t in, int64_t out, int64_t kernel, bool bias = true,
                                int64_t groups = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel)
                               .padding(kernel / 2)
                               .bias(bias)
                               .groups(groups));
}

// Layer normalization across channels at every pixel, with per-channel
// affine parameters. Input is NCHW.
class ChannelLayerNormImpl : public torch::nn::Module {
 public:
  explicit ChannelLayerNormImpl(int64_t channels, double eps = 1e-5);
  torch::Tensor forward(const torch::Tensor& x);

  torch::Tensor weight;
  torch::Tensor bias;

 private:
  double eps_;
};
TORCH_MODULE(ChannelLayerNorm);

}  // namespace hevs::nn
