#include <doctest.h>

#include <fstream>

#include "hevs/checkpoint.hpp"
#include "hevs/error.hpp"
#include "hevs/model.hpp"
#include "support.hpp"

using namespace hevs;
using hevs::testing::random_raw;
using hevs::testing::TempDir;

namespace {

DemosaicFormerConfig small(PipelineVariant v = {}) {
  DemosaicFormerConfig c;
  c.coarse = CoarseNetConfig{8, 1, 2, 4, 7};
  c.correction.base_dim = 8;
  c.correction.blocks_per_level = {1, 1, 1, 1};
  c.correction.refinement_blocks = 1;
  c.correction.heads_per_level = {1, 2, 2, 4};
  c.variant = v;
  return c;
}

std::vector<PipelineVariant> all_variants() {
  std::vector<PipelineVariant> out;
  for (auto o : {StageOrder::CoarseFirst, StageOrder::CorrectFirst, StageOrder::Parallel})
    for (auto f : {FusionMode::Msgm, FusionMode::SimpleConcat, FusionMode::SingleGate}) out.push_back({o, f});
  return out;
}

float max_abs_diff(const RgbImage& a, const RgbImage& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST_CASE("variant names") {
  CHECK(PipelineVariant{}.name() == "coarse_first/msgm");
  CHECK(PipelineVariant::parse("parallel/single_gate") ==
        PipelineVariant{StageOrder::Parallel, FusionMode::SingleGate});
  CHECK_THROWS_AS(PipelineVariant::parse("sideways/msgm"), Error);
  CHECK_THROWS_AS(PipelineVariant::parse("coarse_first"), Error);
  CHECK(parse_init("residual_zero") == InitScheme::ResidualZero);
  CHECK_THROWS_AS(parse_init("xavier"), Error);
}

TEST_CASE("pad multiple must be a power of two of at least 8") {
  DemosaicFormerConfig c = small();
  c.pad_multiple = 12;
  CHECK_THROWS_AS(c.validate(), Error);
  c.pad_multiple = 4;
  CHECK_THROWS_AS(c.validate(), Error);
  c.pad_multiple = 16;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("zero-initialized pipeline reproduces the extended input") {
  for (const auto& v : all_variants()) {
    auto model = build_variant(small(v));
    init_weights(*model, InitScheme::Zero, 0);
    for (std::uint64_t s = 0; s < 3; ++s) {
      const RawImage raw = random_raw(64, 64, s);
      const RgbImage want = clamp01(extend_to_rgb(raw));
      INFO(v.name());
      CHECK(forward(model, raw).values == want.values);
    }
  }
}

TEST_CASE("residual-zero init is the identity while the rest stays random") {
  for (const auto& v : all_variants()) {
    auto model = build_variant(small(v));
    init_weights(*model, InitScheme::ResidualZero, 1);
    const RawImage raw = random_raw(32, 32, 7);
    INFO(v.name());
    CHECK(forward(model, raw).values == clamp01(extend_to_rgb(raw)).values);
    CHECK(model->coarse->head->weight.abs().sum().item<float>() > 0.0f);
  }
}

TEST_CASE("all six order x fusion variants run at 64x64") {
  for (auto o : {StageOrder::CoarseFirst, StageOrder::CorrectFirst, StageOrder::Parallel})
    for (auto f : {FusionMode::Msgm, FusionMode::SimpleConcat}) {
      auto model = build_variant(small({o, f}));
      init_weights(*model, InitScheme::Default, 2);
      const RgbImage out = forward(model, random_raw(64, 64, 1));
      CHECK(out.height == 64);
      CHECK(out.width == 64);
      for (float x : out.values) REQUIRE((x >= 0.0f && x <= 1.0f));
    }
}

TEST_CASE("stage composition follows the variant order") {
  torch::manual_seed(0);
  auto model = build_variant(small({StageOrder::CoarseFirst, FusionMode::Msgm}));
  init_weights(*model, InitScheme::Default, 3);
  torch::NoGradGuard ng;
  const auto x = torch::rand({1, 3, 16, 16});
  CHECK(torch::equal(model->forward(x), model->pc(model->coarse(x))));
  auto swapped = build_variant(small({StageOrder::CorrectFirst, FusionMode::Msgm}));
  init_weights(*swapped, InitScheme::Default, 3);
  CHECK(torch::equal(swapped->forward(x), swapped->coarse(swapped->pc(x))));
  auto par = build_variant(small({StageOrder::Parallel, FusionMode::Msgm}));
  init_weights(*par, InitScheme::Default, 3);
  const auto a = par->coarse(x), b = par->pc(x);
  CHECK(torch::allclose(par->forward(x), 0.5 * (a + b), 1e-6, 1e-6));
}

TEST_CASE("parameter accounting") {
  CHECK(count_params(*torch::nn::Conv2d(torch::nn::Conv2dOptions(3, 16, 3).bias(true))) == 448);
  auto full = build_variant(DemosaicFormerConfig{});
  const auto n = count_params(*full);
  CHECK(n >= 27'000'000);
  CHECK(n <= 33'000'000);
  CHECK(count_params(*full) == count_params(*full->coarse) + count_params(*full->pc));
}

TEST_CASE("pad and crop handle sizes that are not multiples of 8") {
  auto model = build_variant(small());
  init_weights(*model, InitScheme::Default, 4);
  const RgbImage in = hevs::testing::smooth_image(1283, 719, 3);
  const RgbImage out = forward_rgb(model, in);
  CHECK(out.height == 1283);
  CHECK(out.width == 719);
  // Inputs smaller than the pad fall back from reflection to replication.
  const RgbImage tiny = forward(model, random_raw(4, 4, 2));
  CHECK(tiny.height == 4);
  CHECK(tiny.width == 4);
}

TEST_CASE("inference is deterministic") {
  auto model = build_variant(small());
  init_weights(*model, InitScheme::Default, 5);
  const RawImage raw = random_raw(32, 48, 3);
  CHECK(forward(model, raw).values == forward(model, raw).values);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("ckpt");
  auto model = build_variant(small());
  init_weights(*model, InitScheme::Default, 6);
  Checkpoint ck;
  ck.config_snapshot = "[model]\norder = coarse_first\n";
  add_module_state(ck, *model);
  ck.tensors["state.iter"] = torch::tensor({int64_t{17}}, torch::kLong);
  ck.tensors["optim.m.x"] = torch::rand({3, 2}, torch::kDouble);
  save_checkpoint(ck, dir / "a.ckpt");

  const Checkpoint back = load_checkpoint(dir / "a.ckpt");
  CHECK(back.config_snapshot == ck.config_snapshot);
  CHECK(back.at("state.iter").item<int64_t>() == 17);
  CHECK(torch::equal(back.at("optim.m.x"), ck.at("optim.m.x")));
  CHECK(back.contains("coarse.rrg0.dab1.body1.weight"));
  CHECK(back.contains("pc.enc1.blk0.attn.qkv.weight"));

  auto fresh = build_variant(small());
  init_weights(*fresh, InitScheme::Default, 99);
  const LoadReport rep = load_module_state(*fresh, back, /*strict=*/true);
  CHECK(rep.clean());
  const RawImage raw = random_raw(32, 32, 1);
  CHECK(forward(fresh, raw).values == forward(model, raw).values);
}

TEST_CASE("incompatible checkpoints name the offending keys") {
  TempDir dir("mismatch");
  auto model = build_variant(small());
  Checkpoint ck;
  add_module_state(ck, *model);
  save_checkpoint(ck, dir / "a.ckpt");
  const Checkpoint back = load_checkpoint(dir / "a.ckpt");

  auto other = build_variant(small({StageOrder::CoarseFirst, FusionMode::SimpleConcat}));
  try {
    load_module_state(*other, back, /*strict=*/true);
    FAIL("expected a key mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::KeyMismatch);
    CHECK(std::string(e.what()).find("pc.msgm1.fuse_in.weight") != std::string::npos);
    CHECK(std::string(e.what()).find("pc.reduce3.weight") != std::string::npos);
  }
  // Shared submodules still load when not strict.
  const LoadReport rep = load_module_state(*other, back, /*strict=*/false);
  CHECK_FALSE(rep.clean());
  CHECK(rep.loaded > 0);
  CHECK(torch::equal(other->coarse->head->weight, model->coarse->head->weight));
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir("corrupt");
  {
    std::ofstream(dir / "bad.ckpt") << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), Error);
  auto model = build_variant(small());
  Checkpoint ck;
  add_module_state(ck, *model);
  save_checkpoint(ck, dir / "a.ckpt");
  std::filesystem::resize_file(dir / "a.ckpt", std::filesystem::file_size(dir / "a.ckpt") - 9);
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt"), Error);
}

TEST_CASE("tiling") {
  auto model = build_variant(small());
  SUBCASE("identity model blends tiles back exactly") {
    init_weights(*model, InitScheme::ResidualZero, 0);
    const RawImage raw = random_raw(200, 136, 4);
    const RgbImage tiled = forward_tiled(model, raw, {64, 16});
    CHECK(max_abs_diff(tiled, clamp01(extend_to_rgb(raw))) < 1e-6f);
  }
  SUBCASE("one tile covering the image equals whole-image inference") {
    init_weights(*model, InitScheme::Default, 1);
    const RawImage raw = random_raw(64, 96, 5);
    CHECK(forward_tiled(model, raw, {128, 32}).values == forward(model, raw).values);
  }
  SUBCASE("output dims are preserved for ragged sizes") {
    init_weights(*model, InitScheme::Default, 2);
    const RgbImage out = forward_tiled(model, random_raw(148, 92, 6), {64, 16});
    CHECK(out.height == 148);
    CHECK(out.width == 92);
  }
  SUBCASE("bad tile options") {
    CHECK_THROWS_AS(forward_tiled(model, random_raw(16, 16, 0), {30, 8}), Error);
    CHECK_THROWS_AS(forward_tiled(model, random_raw(16, 16, 0), {32, 32}), Error);
  }
}
