#include "hevs/correction_net.hpp"

#include <algorithm>

#include "hevs/error.hpp"

namespace hevs {

const char* fusion_name(FusionMode m) noexcept {
  switch (m) {
    case FusionMode::Msgm: return "msgm";
    case FusionMode::SimpleConcat: return "simple_concat";
    case FusionMode::SingleGate: return "single_gate";
  }
  return "?";
}

FusionMode parse_fusion(const std::string& s) {
  if (s == "msgm") return FusionMode::Msgm;
  if (s == "simple_concat") return FusionMode::SimpleConcat;
  if (s == "single_gate") return FusionMode::SingleGate;
  fail(ErrorCode::Config, "unknown fusion mode '" + s + "' (msgm, simple_concat, single_gate)");
}

void CorrectionNetConfig::validate() const {
  require(base_dim > 0 && refinement_blocks >= 0 && ffn_expansion > 0.0, ErrorCode::Config,
          "correction net sizes must be positive");
  for (int level = 1; level <= 4; ++level) {
    const int heads = heads_per_level[static_cast<std::size_t>(level - 1)];
    require(blocks_per_level[static_cast<std::size_t>(level - 1)] >= 0, ErrorCode::Config,
            "blocks_per_level entries must be non-negative");
    require(heads > 0 && level_dim(level) % heads == 0, ErrorCode::Config,
            "level " + std::to_string(level) + " width " + std::to_string(level_dim(level)) +
                " is not divisible by its " + std::to_string(heads) + " heads");
  }
  require(static_cast<int64_t>(2 * base_dim * ffn_expansion) >= 1, ErrorCode::Config,
          "ffn_expansion too small for base_dim");
}

std::int64_t mdta_attention_macs(std::int64_t channels, std::int64_t heads, std::int64_t height,
                                 std::int64_t width) {
  require(heads > 0 && channels % heads == 0, ErrorCode::Config,
          "channels must be divisible by heads");
  const std::int64_t c = channels / heads;
  const std::int64_t pixels = height * width;
  // q k^T plus attn v, each heads * c * c * pixels.
  return 2 * heads * c * c * pixels;
}

namespace nn {

namespace F = torch::nn::functional;

MdtaImpl::MdtaImpl(int64_t dim, int64_t heads) : heads_(heads) {
  require(heads > 0 && dim % heads == 0, ErrorCode::Config,
          "MDTA width " + std::to_string(dim) + " not divisible by " + std::to_string(heads) +
              " heads");
  norm = register_module("norm", ChannelLayerNorm(dim));
  qkv = register_module("qkv", conv2d(dim, 3 * dim, 1, false));
  qkv_dw = register_module("qkv_dw", conv2d(3 * dim, 3 * dim, 3, false, 3 * dim));
  proj = register_module("proj", conv2d(dim, dim, 1, false));
  temperature = register_parameter("temperature", torch::ones({heads, 1, 1}));
}

std::array<torch::Tensor, 3> MdtaImpl::qkv_heads(const torch::Tensor& normed) {
  const auto b = normed.size(0);
  const auto h = normed.size(2);
  const auto w = normed.size(3);
  torch::Tensor t = qkv(normed);
  t = qkv_dw(t);
  auto parts = t.chunk(3, 1);
  t.reset();
  std::array<torch::Tensor, 3> out;
  for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i)] = parts[static_cast<std::size_t>(i)].reshape({b, heads_, -1, h * w});
  out[0] = F::normalize(out[0], F::NormalizeFuncOptions().dim(-1));
  out[1] = F::normalize(out[1], F::NormalizeFuncOptions().dim(-1));
  return out;
}

torch::Tensor MdtaImpl::attention_map(const torch::Tensor& x) {
  auto [q, k, v] = qkv_heads(norm(x));
  return torch::softmax(torch::matmul(q, k.transpose(-2, -1)) * temperature, -1);
}

torch::Tensor MdtaImpl::forward(const torch::Tensor& x) {
  auto qkv_t = qkv_heads(norm(x));
  auto attn = torch::softmax(torch::matmul(qkv_t[0], qkv_t[1].transpose(-2, -1)) * temperature, -1);
  torch::Tensor v = std::move(qkv_t[2]);
  qkv_t = {};
  return x + proj(torch::matmul(attn, v).reshape(x.sizes()));
}

GdfnImpl::GdfnImpl(int64_t dim, double expansion)
    : hidden(static_cast<int64_t>(static_cast<double>(dim) * expansion)) {
  norm = register_module("norm", ChannelLayerNorm(dim));
  proj_in = register_module("proj_in", conv2d(dim, 2 * hidden, 1, false));
  dw = register_module("dw", conv2d(2 * hidden, 2 * hidden, 3, false, 2 * hidden));
  proj_out = register_module("proj_out", conv2d(hidden, dim, 1, false));
}

torch::Tensor GdfnImpl::forward(const torch::Tensor& x) {
  // Split statements so the wide intermediates are released early; the
  // hidden width is 2.66x the block width and dominates inference memory.
  torch::Tensor h = proj_in(norm(x));
  h = dw(h);
  auto paths = h.chunk(2, 1);
  h.reset();
  torch::Tensor gated = torch::GradMode::is_enabled() ? torch::gelu(paths[0]) * paths[1]
                                                      : torch::gelu(paths[0]).mul_(paths[1]);
  paths.clear();
  return x + proj_out(gated);
}

TransformerBlockImpl::TransformerBlockImpl(int64_t dim, int64_t heads, double expansion) {
  attn = register_module("attn", Mdta(dim, heads));
  ffn = register_module("ffn", Gdfn(dim, expansion));
}

BlockStackImpl::BlockStackImpl(int count, int64_t dim, int64_t heads, double expansion) {
  for (int j = 0; j < count; ++j)
    blocks.push_back(register_module("blk" + std::to_string(j), TransformerBlock(dim, heads, expansion)));
}

torch::Tensor BlockStackImpl::forward(torch::Tensor x) {
  for (auto& blk : blocks) x = blk(x);
  return x;
}

DownsampleImpl::DownsampleImpl(int64_t dim) {
  conv = register_module("conv", conv2d(dim, dim / 2, 3, false));
}

torch::Tensor DownsampleImpl::forward(const torch::Tensor& x) {
  return F::pixel_unshuffle(conv(x), 2);
}

UpsampleImpl::UpsampleImpl(int64_t dim) {
  conv = register_module("conv", conv2d(dim, dim * 2, 3, false));
}

torch::Tensor UpsampleImpl::forward(const torch::Tensor& x) {
  return F::pixel_shuffle(conv(x), 2);
}

torch::Tensor resample_pow2(const torch::Tensor& x, int factor_log2) {
  if (factor_log2 == 0) return x;
  if (factor_log2 < 0) {
    const int64_t k = int64_t{1} << (-factor_log2);
    return F::avg_pool2d(x, F::AvgPool2dFuncOptions(k).stride(k));
  }
  const int64_t s = int64_t{1} << factor_log2;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{x.size(2) * s, x.size(3) * s})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

MsgmImpl::MsgmImpl(std::array<int64_t, 3> level_dims, int target, bool single_gate,
                   bool sequential_gates)
    : target_level(target),
      target_dim_(level_dims[static_cast<std::size_t>(target - 1)]),
      single_gate_(single_gate),
      sequential_gates_(sequential_gates) {
  require(target >= 1 && target <= 3, ErrorCode::Config, "MSGM target level must be 1..3");
  const int64_t in = level_dims[0] + level_dims[1] + level_dims[2];
  fuse_in = register_module("fuse_in", conv2d(in, 2 * target_dim_, 1));
  dw = register_module("dw", conv2d(2 * target_dim_, 2 * target_dim_, 3, true, 2 * target_dim_));
  fuse_out = register_module("fuse_out", conv2d(single_gate ? target_dim_ : 2 * target_dim_, target_dim_, 1));
}

torch::Tensor MsgmImpl::forward(const std::array<torch::Tensor, 3>& tb_outputs) {
  return forward_ordered(tb_outputs, {0, 1, 2});
}

torch::Tensor MsgmImpl::forward_ordered(const std::array<torch::Tensor, 3>& tb,
                                        const std::array<int, 3>& order) {
  for (std::size_t i = 1; i < 3; ++i) {
    require(tb[i].dim() == 4 && tb[i].size(2) * 2 == tb[i - 1].size(2) &&
                tb[i].size(3) * 2 == tb[i - 1].size(3),
            ErrorCode::Shape,
            "MSGM pyramid level " + std::to_string(i + 1) + " is not half the size of level " +
                std::to_string(i));
  }
  std::array<int, 3> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  require(sorted == std::array<int, 3>{0, 1, 2}, ErrorCode::Config,
          "MSGM resample order must be a permutation of 0,1,2");

  std::array<torch::Tensor, 3> resized;
  for (int level : order)
    resized[static_cast<std::size_t>(level)] =
        resample_pow2(tb[static_cast<std::size_t>(level)], level - (target_level - 1));

  auto f = fuse_in(torch::cat({resized[0], resized[1], resized[2]}, 1));
  auto halves = dw(f).chunk(2, 1);
  const auto& f1 = halves[0];
  const auto& f2 = halves[1];
  if (single_gate_) return fuse_out(torch::sigmoid(f1) * f2);
  auto g1 = torch::sigmoid(f1) * f2;
  auto g2 = sequential_gates_ ? torch::sigmoid(f2) * g1 : torch::sigmoid(f2) * f1;
  return fuse_out(torch::cat({g1, g2}, 1));
}

CorrectionNetImpl::CorrectionNetImpl(const CorrectionNetConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const int64_t d1 = cfg.level_dim(1), d2 = cfg.level_dim(2), d3 = cfg.level_dim(3),
                d4 = cfg.level_dim(4);
  const auto& nb = cfg.blocks_per_level;
  const auto& nh = cfg.heads_per_level;
  const double ex = cfg.ffn_expansion;
  const bool enriched = cfg.fusion != FusionMode::SimpleConcat;
  const int64_t skip_parts = enriched ? 3 : 2;

  embed = register_module("embed", conv2d(3, d1, 3, false));
  enc1 = register_module("enc1", BlockStack(nb[0], d1, nh[0], ex));
  down12 = register_module("down12", Downsample(d1));
  enc2 = register_module("enc2", BlockStack(nb[1], d2, nh[1], ex));
  down23 = register_module("down23", Downsample(d2));
  enc3 = register_module("enc3", BlockStack(nb[2], d3, nh[2], ex));
  down34 = register_module("down34", Downsample(d3));
  latent = register_module("latent", BlockStack(nb[3], d4, nh[3], ex));

  if (enriched) {
    const std::array<int64_t, 3> dims{d1, d2, d3};
    const bool single = cfg.fusion == FusionMode::SingleGate;
    for (int k = 1; k <= 3; ++k)
      msgm[static_cast<std::size_t>(k - 1)] = register_module(
          "msgm" + std::to_string(k), Msgm(dims, k, single, cfg.sequential_gates));
  }

  up43 = register_module("up43", Upsample(d4));
  reduce3 = register_module("reduce3", conv2d(skip_parts * d3, d3, 1, false));
  dec3 = register_module("dec3", BlockStack(nb[2], d3, nh[2], ex));
  up32 = register_module("up32", Upsample(d3));
  reduce2 = register_module("reduce2", conv2d(skip_parts * d2, d2, 1, false));
  dec2 = register_module("dec2", BlockStack(nb[1], d2, nh[1], ex));
  up21 = register_module("up21", Upsample(d2));
  // Level 1 keeps the concatenated width (2 * d1) through decoding.
  if (enriched) reduce1 = register_module("reduce1", conv2d(3 * d1, 2 * d1, 1, false));
  dec1 = register_module("dec1", BlockStack(nb[0], 2 * d1, nh[0], ex));
  for (int j = 0; j < cfg.refinement_blocks; ++j)
    refine.push_back(register_module("refine" + std::to_string(j), TransformerBlock(2 * d1, nh[0], ex)));
  output = register_module("output", conv2d(2 * d1, 3, 3, false));
}

torch::Tensor CorrectionNetImpl::forward(const torch::Tensor& x) {
  require(x.dim() == 4 && x.size(1) == 3, ErrorCode::Shape, "correction net expects N x 3 x H x W");
  require(x.size(2) % 8 == 0 && x.size(3) % 8 == 0, ErrorCode::Shape,
          "correction net input dims must be multiples of 8, got " + std::to_string(x.size(2)) +
              "x" + std::to_string(x.size(3)));
  const bool enriched = cfg_.fusion != FusionMode::SimpleConcat;

  auto e1 = enc1(embed(x));
  auto e2 = enc2(down12(e1));
  auto e3 = enc3(down23(e2));
  auto lat = latent(down34(e3));

  auto skip = [&](const torch::Tensor& up, const torch::Tensor& enc, int level) {
    if (!enriched) return torch::cat({up, enc}, 1);
    auto m = msgm[static_cast<std::size_t>(level - 1)]->forward({e1, e2, e3});
    return torch::cat({up, enc, m}, 1);
  };

  auto d3 = dec3(reduce3(skip(up43(lat), e3, 3)));
  auto d2 = dec2(reduce2(skip(up32(d3), e2, 2)));
  auto d1in = skip(up21(d2), e1, 1);
  auto d1 = dec1(enriched ? reduce1(d1in) : d1in);
  for (auto& blk : refine) d1 = blk(d1);
  return x + output(d1);
}

}  // namespace nn
}  // namespace hevs
