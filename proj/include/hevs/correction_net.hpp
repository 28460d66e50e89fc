#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hevs/layers.hpp"

namespace hevs {

// How decoder skips are enriched with cross-scale encoder features.
enum class FusionMode { Msgm, SimpleConcat, SingleGate };

const char* fusion_name(FusionMode m) noexcept;
FusionMode parse_fusion(const std::string& s);

struct CorrectionNetConfig {
  int base_dim = 48;
  std::array<int, 4> blocks_per_level{4, 6, 6, 8};  // encoder levels 1-3, latent
  int refinement_blocks = 4;
  std::array<int, 4> heads_per_level{1, 2, 4, 8};
  double ffn_expansion = 2.66;
  FusionMode fusion = FusionMode::Msgm;
  // Evaluate the second MSGM gate from the already-gated first half instead
  // of the original one.
  bool sequential_gates = false;

  int level_dim(int level) const { return base_dim << (level - 1); }  // level in 1..4
  void validate() const;
};

// Multiply-accumulates spent forming the channel attention matrix and applying
// it to the values, for one image.
std::int64_t mdta_attention_macs(std::int64_t channels, std::int64_t heads, std::int64_t height,
                                 std::int64_t width);

namespace nn {

// Transposed (channel) self-attention with depth-wise conv projections:
// x + proj(attend(norm(x))).
class MdtaImpl : public torch::nn::Module {
 public:
  MdtaImpl(int64_t dim, int64_t heads);
  torch::Tensor forward(const torch::Tensor& x);
  // Softmax-normalized per-head C/heads x C/heads matrices, N x heads x c x c.
  torch::Tensor attention_map(const torch::Tensor& x);

  ChannelLayerNorm norm{nullptr};
  torch::nn::Conv2d qkv{nullptr}, qkv_dw{nullptr}, proj{nullptr};
  torch::Tensor temperature;

 private:
  std::array<torch::Tensor, 3> qkv_heads(const torch::Tensor& normed);
  int64_t heads_;
};
TORCH_MODULE(Mdta);

// Gated feed-forward: x + proj_out(GELU(p1) * p2), [p1, p2] = dw3x3(proj_in(norm(x))).
class GdfnImpl : public torch::nn::Module {
 public:
  GdfnImpl(int64_t dim, double expansion);
  torch::Tensor forward(const torch::Tensor& x);

  ChannelLayerNorm norm{nullptr};
  torch::nn::Conv2d proj_in{nullptr}, dw{nullptr}, proj_out{nullptr};
  int64_t hidden;
};
TORCH_MODULE(Gdfn);

class TransformerBlockImpl : public torch::nn::Module {
 public:
  TransformerBlockImpl(int64_t dim, int64_t heads, double expansion);
  torch::Tensor forward(const torch::Tensor& x) { return ffn(attn(x)); }

  Mdta attn{nullptr};
  Gdfn ffn{nullptr};
};
TORCH_MODULE(TransformerBlock);

class BlockStackImpl : public torch::nn::Module {
 public:
  BlockStackImpl(int count, int64_t dim, int64_t heads, double expansion);
  torch::Tensor forward(torch::Tensor x);

  std::vector<TransformerBlock> blocks;
};
TORCH_MODULE(BlockStack);

// conv3x3 halving channels, then 2x space-to-depth: C x H x W -> 2C x H/2 x W/2.
class DownsampleImpl : public torch::nn::Module {
 public:
  explicit DownsampleImpl(int64_t dim);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(Downsample);

// conv3x3 doubling channels, then 2x depth-to-space: C x H x W -> C/2 x 2H x 2W.
class UpsampleImpl : public torch::nn::Module {
 public:
  explicit UpsampleImpl(int64_t dim);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(Upsample);

// Resizes a feature map by a power-of-two factor: area averaging down,
// bilinear up. factor_log2 > 0 enlarges.
torch::Tensor resample_pow2(const torch::Tensor& x, int factor_log2);

// Cross-scale gated fusion for one decoder level. Takes the three encoder
// level outputs, brings them to the target level's resolution, and emits a
// feature map of the target level's width.
class MsgmImpl : public torch::nn::Module {
 public:
  MsgmImpl(std::array<int64_t, 3> level_dims, int target_level, bool single_gate = false,
           bool sequential_gates = false);

  torch::Tensor forward(const std::array<torch::Tensor, 3>& tb_outputs);
  // Same computation, resampling the inputs in the given order of level
  // indices (0-based). Exposed for order-independence checks.
  torch::Tensor forward_ordered(const std::array<torch::Tensor, 3>& tb_outputs,
                                const std::array<int, 3>& order);

  torch::nn::Conv2d fuse_in{nullptr}, dw{nullptr}, fuse_out{nullptr};
  int target_level;  // 1..3

 private:
  int64_t target_dim_;
  bool single_gate_;
  bool sequential_gates_;
};
TORCH_MODULE(Msgm);

class CorrectionNetImpl : public torch::nn::Module {
 public:
  explicit CorrectionNetImpl(const CorrectionNetConfig& cfg = {});
  torch::Tensor forward(const torch::Tensor& x);

  const CorrectionNetConfig& config() const { return cfg_; }

  torch::nn::Conv2d embed{nullptr}, output{nullptr};
  BlockStack enc1{nullptr}, enc2{nullptr}, enc3{nullptr}, latent{nullptr};
  BlockStack dec3{nullptr}, dec2{nullptr}, dec1{nullptr};
  std::vector<TransformerBlock> refine;
  Downsample down12{nullptr}, down23{nullptr}, down34{nullptr};
  Upsample up43{nullptr}, up32{nullptr}, up21{nullptr};
  torch::nn::Conv2d reduce3{nullptr}, reduce2{nullptr}, reduce1{nullptr};
  std::array<Msgm, 3> msgm{nullptr, nullptr, nullptr};

 private:
  CorrectionNetConfig cfg_;
};
TORCH_MODULE(CorrectionNet);

}  // namespace nn
}  // namespace hevs
