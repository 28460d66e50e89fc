#include "hevs/model.hpp"

#include <algorithm>
#include <vector>

#include "hevs/error.hpp"

namespace hevs {

const char* order_name(StageOrder o) noexcept {
  switch (o) {
    case StageOrder::CoarseFirst: return "coarse_first";
    case StageOrder::CorrectFirst: return "correct_first";
    case StageOrder::Parallel: return "parallel";
  }
  return "?";
}

StageOrder parse_order(const std::string& s) {
  if (s == "coarse_first") return StageOrder::CoarseFirst;
  if (s == "correct_first") return StageOrder::CorrectFirst;
  if (s == "parallel") return StageOrder::Parallel;
  fail(ErrorCode::Config, "unknown stage order '" + s + "' (coarse_first, correct_first, parallel)");
}

std::string PipelineVariant::name() const {
  return std::string(order_name(order)) + "/" + fusion_name(fusion);
}

PipelineVariant PipelineVariant::parse(const std::string& name) {
  const auto slash = name.find('/');
  require(slash != std::string::npos, ErrorCode::Config,
          "variant '" + name + "' must look like <order>/<fusion>");
  return {parse_order(name.substr(0, slash)), parse_fusion(name.substr(slash + 1))};
}

void DemosaicFormerConfig::validate() const {
  coarse.validate();
  correction.validate();
  require(pad_multiple >= 8 && (pad_multiple & (pad_multiple - 1)) == 0, ErrorCode::Config,
          "pad_multiple must be a power of two >= 8");
}

InitScheme parse_init(const std::string& s) {
  if (s == "default") return InitScheme::Default;
  if (s == "residual_zero") return InitScheme::ResidualZero;
  if (s == "zero") return InitScheme::Zero;
  fail(ErrorCode::Config, "unknown init scheme '" + s + "' (default, residual_zero, zero)");
}

namespace nn {

DemosaicFormerImpl::DemosaicFormerImpl(const DemosaicFormerConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  CorrectionNetConfig pc_cfg = cfg.correction;
  pc_cfg.fusion = cfg.variant.fusion;
  cfg_.correction.fusion = cfg.variant.fusion;
  coarse = register_module("coarse", CoarseNet(cfg.coarse));
  pc = register_module("pc", CorrectionNet(pc_cfg));
  if (cfg.variant.order == StageOrder::Parallel)
    merge = register_module("merge", conv2d(6, 3, 1));
}

StageOutputs DemosaicFormerImpl::forward_stages(const torch::Tensor& x) {
  switch (cfg_.variant.order) {
    case StageOrder::CoarseFirst: {
      auto rest = coarse(x);
      return {pc(rest), rest};
    }
    case StageOrder::CorrectFirst: {
      auto mid = pc(x);
      return {coarse(mid), mid};
    }
    case StageOrder::Parallel: {
      auto a = coarse(x);
      auto b = pc(x);
      return {x + merge(torch::cat({a - x, b - x}, 1)), a};
    }
  }
  fail(ErrorCode::Config, "invalid stage order");
}

}  // namespace nn

DemosaicFormer build_variant(const DemosaicFormerConfig& cfg) { return DemosaicFormer(cfg); }

void init_weights(torch::nn::Module& model, InitScheme scheme, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  torch::manual_seed(seed);
  for (auto& m : model.modules(/*include_self=*/true)) {
    if (auto* conv = m->as<torch::nn::Conv2dImpl>()) conv->reset_parameters();
    if (auto* ln = m->as<nn::ChannelLayerNormImpl>()) {
      ln->weight.fill_(1.0);
      ln->bias.zero_();
    }
    if (auto* attn = m->as<nn::MdtaImpl>()) attn->temperature.fill_(1.0);
  }
  if (scheme == InitScheme::Zero) {
    for (auto& p : model.parameters()) p.zero_();
    return;
  }
  auto* full = dynamic_cast<nn::DemosaicFormerImpl*>(&model);
  if (!full) return;
  if (full->merge) {
    full->merge->weight.zero_();
    full->merge->bias.zero_();
    for (int c = 0; c < 3; ++c) {
      full->merge->weight[c][c][0][0] = 0.5;
      full->merge->weight[c][c + 3][0][0] = 0.5;
    }
  }
  if (scheme == InitScheme::ResidualZero) {
    full->coarse->tail->weight.zero_();
    full->coarse->tail->bias.zero_();
    full->pc->output->weight.zero_();
  }
}

std::int64_t count_params(const torch::nn::Module& model) {
  std::int64_t n = 0;
  for (const auto& p : model.parameters()) n += p.numel();
  return n;
}

torch::Tensor to_tensor(const RgbImage& img) {
  auto hwc = torch::from_blob(const_cast<float*>(img.values.data()), {img.height, img.width, 3},
                              torch::kFloat);
  return hwc.permute({2, 0, 1}).contiguous().unsqueeze(0);
}

RgbImage from_tensor(const torch::Tensor& t) {
  auto chw = t.detach().to(torch::kFloat);
  if (chw.dim() == 4) {
    require(chw.size(0) == 1, ErrorCode::Shape, "from_tensor expects a single image");
    chw = chw.squeeze(0);
  }
  require(chw.dim() == 3 && chw.size(0) == 3, ErrorCode::Shape, "from_tensor expects 3 x H x W");
  auto hwc = chw.permute({1, 2, 0}).contiguous();
  RgbImage out(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)));
  std::copy_n(hwc.data_ptr<float>(), out.values.size(), out.values.data());
  return out;
}

torch::Tensor extend_tensor(const RawImage& raw) { return to_tensor(extend_to_rgb(raw)); }

namespace {

torch::Tensor pad_to_multiple(const torch::Tensor& x, int multiple) {
  namespace F = torch::nn::functional;
  const int64_t h = x.size(2);
  const int64_t w = x.size(3);
  const int64_t ph = (multiple - h % multiple) % multiple;
  const int64_t pw = (multiple - w % multiple) % multiple;
  if (ph == 0 && pw == 0) return x;
  const bool reflect = ph < h && pw < w;
  F::PadFuncOptions opts({0, pw, 0, ph});
  if (reflect) {
    opts.mode(torch::kReflect);
  } else {
    opts.mode(torch::kReplicate);
  }
  return F::pad(x, opts);
}

// 1-D feather weights for tile [begin, end) given its overlap with the
// previous and next tiles.
std::vector<float> feather(int begin, int end, int overlap_prev, int overlap_next) {
  std::vector<float> w(static_cast<std::size_t>(end - begin), 1.0f);
  for (int i = begin; i < end; ++i) {
    float v = 1.0f;
    if (overlap_prev > 0 && i < begin + overlap_prev)
      v = std::min(v, (static_cast<float>(i - begin) + 0.5f) / static_cast<float>(overlap_prev));
    if (overlap_next > 0 && i >= end - overlap_next)
      v = std::min(v, (static_cast<float>(end - i) - 0.5f) / static_cast<float>(overlap_next));
    w[static_cast<std::size_t>(i - begin)] = v;
  }
  return w;
}

struct Span {
  int begin;
  int end;
};

std::vector<Span> tile_spans(int length, int tile, int overlap) {
  std::vector<Span> spans;
  if (length <= tile) return {{0, length}};
  const int stride = tile - overlap;
  int last = ((length - tile) / 4) * 4;
  for (int o = 0; o < last; o += stride) spans.push_back({o, o + tile});
  spans.push_back({last, length});
  return spans;
}

}  // namespace

RgbImage forward_rgb(DemosaicFormer& model, const RgbImage& extended) {
  torch::NoGradGuard no_grad;
  auto x = to_tensor(extended);
  auto y = model->forward(pad_to_multiple(x, model->config().pad_multiple));
  y = y.index({torch::indexing::Slice(), torch::indexing::Slice(),
               torch::indexing::Slice(0, extended.height), torch::indexing::Slice(0, extended.width)});
  return from_tensor(y.clamp(0.0, 1.0));
}

RgbImage forward(DemosaicFormer& model, const RawImage& raw) {
  raw.validate();
  return forward_rgb(model, extend_to_rgb(raw));
}

RgbImage forward_tiled_rgb(DemosaicFormer& model, const RgbImage& extended, const TileOptions& opts) {
  require(opts.tile > 0 && opts.tile % 4 == 0 && opts.overlap >= 0 && opts.overlap % 4 == 0 &&
              opts.overlap < opts.tile,
          ErrorCode::Config, "tile and overlap must be multiples of 4 with overlap < tile");
  if (extended.height <= opts.tile && extended.width <= opts.tile) return forward_rgb(model, extended);

  const auto rows = tile_spans(extended.height, opts.tile, opts.overlap);
  const auto cols = tile_spans(extended.width, opts.tile, opts.overlap);
  std::vector<float> acc(extended.values.size(), 0.0f);
  std::vector<float> wsum(static_cast<std::size_t>(extended.height) * extended.width, 0.0f);

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int ov_top = i > 0 ? rows[i - 1].end - rows[i].begin : 0;
    const int ov_bot = i + 1 < rows.size() ? rows[i].end - rows[i + 1].begin : 0;
    const auto wy = feather(rows[i].begin, rows[i].end, ov_top, ov_bot);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const int ov_left = j > 0 ? cols[j - 1].end - cols[j].begin : 0;
      const int ov_right = j + 1 < cols.size() ? cols[j].end - cols[j + 1].begin : 0;
      const auto wx = feather(cols[j].begin, cols[j].end, ov_left, ov_right);

      const int th = rows[i].end - rows[i].begin;
      const int tw = cols[j].end - cols[j].begin;
      RgbImage tile(th, tw);
      for (int r = 0; r < th; ++r)
        std::copy_n(&extended.values[(static_cast<std::size_t>(rows[i].begin + r) * extended.width + cols[j].begin) * 3],
                    tw * 3, &tile.values[static_cast<std::size_t>(r) * tw * 3]);
      const RgbImage out = forward_rgb(model, tile);
      for (int r = 0; r < th; ++r)
        for (int c = 0; c < tw; ++c) {
          const float w = wy[static_cast<std::size_t>(r)] * wx[static_cast<std::size_t>(c)];
          const std::size_t px = static_cast<std::size_t>(rows[i].begin + r) * extended.width + cols[j].begin + c;
          wsum[px] += w;
          for (int ch = 0; ch < 3; ++ch) acc[px * 3 + ch] += w * out.at(r, c, ch);
        }
    }
  }
  RgbImage result(extended.height, extended.width);
  for (std::size_t px = 0; px < wsum.size(); ++px)
    for (int ch = 0; ch < 3; ++ch) result.values[px * 3 + ch] = acc[px * 3 + ch] / wsum[px];
  return clamp01(std::move(result));
}

RgbImage forward_tiled(DemosaicFormer& model, const RawImage& raw, const TileOptions& opts) {
  raw.validate();
  return forward_tiled_rgb(model, extend_to_rgb(raw), opts);
}

}  // namespace hevs
