#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>

#include "hevs/coarse_net.hpp"
#include "hevs/correction_net.hpp"
#include "hevs/image.hpp"

namespace hevs {

enum class StageOrder { CoarseFirst, CorrectFirst, Parallel };

const char* order_name(StageOrder o) noexcept;
StageOrder parse_order(const std::string& s);

struct PipelineVariant {
  StageOrder order = StageOrder::CoarseFirst;
  FusionMode fusion = FusionMode::Msgm;

  // "<order>/<fusion>", e.g. "coarse_first/msgm".
  std::string name() const;
  static PipelineVariant parse(const std::string& name);

  friend bool operator==(const PipelineVariant&, const PipelineVariant&) = default;
};

struct DemosaicFormerConfig {
  CoarseNetConfig coarse;
  CorrectionNetConfig correction;
  PipelineVariant variant;
  int pad_multiple = 8;

  void validate() const;
};

// Weight initialization.
//   Default      - libtorch's per-layer defaults everywhere.
//   ResidualZero - defaults, with the stage output convolutions zeroed so the
//                  untrained pipeline is the identity on its input.
//   Zero         - every learnable scalar set to 0.
enum class InitScheme { Default, ResidualZero, Zero };

InitScheme parse_init(const std::string& s);

namespace nn {

struct StageOutputs {
  torch::Tensor output;        // final RGB estimate
  torch::Tensor intermediate;  // first-stage result (coarse output for coarse_first)
};

class DemosaicFormerImpl : public torch::nn::Module {
 public:
  explicit DemosaicFormerImpl(const DemosaicFormerConfig& cfg = {});

  // x: N x 3 x H x W extended input, H and W multiples of 8.
  StageOutputs forward_stages(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x) { return forward_stages(x).output; }

  const DemosaicFormerConfig& config() const { return cfg_; }

  CoarseNet coarse{nullptr};
  CorrectionNet pc{nullptr};
  torch::nn::Conv2d merge{nullptr};  // parallel variant only

 private:
  DemosaicFormerConfig cfg_;
};
TORCH_MODULE(DemosaicFormer);

}  // namespace nn

using nn::DemosaicFormer;

DemosaicFormer build_variant(const DemosaicFormerConfig& cfg);

void init_weights(torch::nn::Module& model, InitScheme scheme, std::uint64_t seed);

std::int64_t count_params(const torch::nn::Module& model);

torch::Tensor to_tensor(const RgbImage& img);           // 1 x 3 x H x W float
RgbImage from_tensor(const torch::Tensor& t);           // accepts 3 x H x W or 1 x 3 x H x W
torch::Tensor extend_tensor(const RawImage& raw);       // 1 x 3 x H x W

// Full-image inference: reflection pad to pad_multiple, run, crop, clamp.
RgbImage forward(DemosaicFormer& model, const RawImage& raw);
RgbImage forward_rgb(DemosaicFormer& model, const RgbImage& extended);

struct TileOptions {
  int tile = 512;
  int overlap = 32;
};

// Overlapping tiles with a linear feather across each overlap band. Tile
// origins sit on multiples of 4 so every tile sees the same CFA phase.
RgbImage forward_tiled(DemosaicFormer& model, const RawImage& raw, const TileOptions& opts = {});
RgbImage forward_tiled_rgb(DemosaicFormer& model, const RgbImage& extended,
                           const TileOptions& opts = {});

}  // namespace hevs
