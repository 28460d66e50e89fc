#include "hevs/coarse_net.hpp"

#include "hevs/error.hpp"

namespace hevs {

void CoarseNetConfig::validate() const {
  require(channels > 0 && n_rrg >= 0 && n_dab >= 0, ErrorCode::Config,
          "coarse net sizes must be non-negative");
  require(ca_reduction > 0 && channels % ca_reduction == 0, ErrorCode::Config,
          "coarse channels must be divisible by ca_reduction");
  require(sa_kernel > 0 && sa_kernel % 2 == 1, ErrorCode::Config, "sa_kernel must be odd");
}

namespace nn {

ChannelAttentionImpl::ChannelAttentionImpl(int64_t channels, int64_t reduction) {
  down = register_module("down", conv2d(channels, channels / reduction, 1));
  up = register_module("up", conv2d(channels / reduction, channels, 1));
}

torch::Tensor ChannelAttentionImpl::gates(const torch::Tensor& u) {
  auto pooled = u.mean({2, 3}, /*keepdim=*/true);
  return torch::sigmoid(up(torch::relu(down(pooled))));
}

SpatialAttentionImpl::SpatialAttentionImpl(int64_t kernel) {
  conv = register_module("conv", conv2d(2, 1, kernel));
}

torch::Tensor SpatialAttentionImpl::gates(const torch::Tensor& u) {
  auto pooled = torch::cat({u.mean(1, true), std::get<0>(u.max(1, true))}, 1);
  return torch::sigmoid(conv(pooled));
}

DabImpl::DabImpl(const CoarseNetConfig& cfg) {
  const int64_t c = cfg.channels;
  body1 = register_module("body1", conv2d(c, c, 3));
  body2 = register_module("body2", conv2d(c, c, 3));
  ca = register_module("ca", ChannelAttention(c, cfg.ca_reduction));
  sa = register_module("sa", SpatialAttention(cfg.sa_kernel));
  fuse = register_module("fuse", conv2d(2 * c, c, 1));
}

torch::Tensor DabImpl::forward(const torch::Tensor& t) {
  auto u = body2(torch::relu(body1(t)));
  return t + fuse(torch::cat({ca(u), sa(u)}, 1));
}

RrgImpl::RrgImpl(const CoarseNetConfig& cfg) {
  for (int j = 0; j < cfg.n_dab; ++j)
    dabs.push_back(register_module("dab" + std::to_string(j), Dab(cfg)));
  conv = register_module("conv", conv2d(cfg.channels, cfg.channels, 3));
}

torch::Tensor RrgImpl::forward(torch::Tensor x) {
  auto y = x;
  for (auto& dab : dabs) y = dab(y);
  return x + conv(y);
}

CoarseNetImpl::CoarseNetImpl(const CoarseNetConfig& cfg) {
  cfg.validate();
  head = register_module("head", conv2d(3, cfg.channels, 3));
  for (int i = 0; i < cfg.n_rrg; ++i)
    rrgs.push_back(register_module("rrg" + std::to_string(i), Rrg(cfg)));
  tail = register_module("tail", conv2d(cfg.channels, 3, 3));
}

torch::Tensor CoarseNetImpl::forward(const torch::Tensor& x) {
  require(x.dim() == 4 && x.size(1) == 3, ErrorCode::Shape, "coarse net expects N x 3 x H x W");
  require(x.size(2) % 4 == 0 && x.size(3) % 4 == 0, ErrorCode::Shape,
          "coarse net input dims must be multiples of 4");
  auto f = head(x);
  for (auto& rrg : rrgs) f = rrg(f);
  return x + tail(f);
}

}  // namespace nn
}  // namespace hevs
