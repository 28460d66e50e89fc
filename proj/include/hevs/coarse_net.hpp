#pragma once

#include <torch/torch.h>

#include <vector>

#include "hevs/layers.hpp"

namespace hevs {

struct CoarseNetConfig {
  int channels = 64;
  int n_rrg = 4;
  int n_dab = 8;
  int ca_reduction = 8;
  int sa_kernel = 7;

  void validate() const;
};

namespace nn {

// Squeeze-excitation style gate: GAP -> 1x1 (C/r) -> ReLU -> 1x1 (C) -> sigmoid.
class ChannelAttentionImpl : public torch::nn::Module {
 public:
  ChannelAttentionImpl(int64_t channels, int64_t reduction);
  torch::Tensor gates(const torch::Tensor& u);
  torch::Tensor forward(const torch::Tensor& u) { return u * gates(u); }

  torch::nn::Conv2d down{nullptr}, up{nullptr};
};
TORCH_MODULE(ChannelAttention);

// Per-position gate from [channel mean, channel max] through a k x k conv.
class SpatialAttentionImpl : public torch::nn::Module {
 public:
  explicit SpatialAttentionImpl(int64_t kernel);
  torch::Tensor gates(const torch::Tensor& u);
  torch::Tensor forward(const torch::Tensor& u) { return u * gates(u); }

  torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(SpatialAttention);

// Dual attention block: t + fuse(concat(CA(U), SA(U))), U = conv3x3(relu(conv3x3(t))).
class DabImpl : public torch::nn::Module {
 public:
  explicit DabImpl(const CoarseNetConfig& cfg);
  torch::Tensor forward(const torch::Tensor& t);

  torch::nn::Conv2d body1{nullptr}, body2{nullptr}, fuse{nullptr};
  ChannelAttention ca{nullptr};
  SpatialAttention sa{nullptr};
};
TORCH_MODULE(Dab);

// Recursive residual group: x + conv3x3(DAB_n(...DAB_1(x))).
class RrgImpl : public torch::nn::Module {
 public:
  explicit RrgImpl(const CoarseNetConfig& cfg);
  torch::Tensor forward(torch::Tensor x);

  std::vector<Dab> dabs;
  torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(Rrg);

class CoarseNetImpl : public torch::nn::Module {
 public:
  explicit CoarseNetImpl(const CoarseNetConfig& cfg = {});
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d head{nullptr}, tail{nullptr};
  std::vector<Rrg> rrgs;
};
TORCH_MODULE(CoarseNet);

}  // namespace nn
}  // namespace hevs
