#include <doctest.h>

#include "hevs/correction_net.hpp"
#include "hevs/error.hpp"
#include "hevs/model.hpp"
#include "support.hpp"

using namespace hevs;
using hevs::testing::gradcheck;
using torch::indexing::Slice;

namespace {

void zero_all(torch::nn::Module& m) {
  torch::NoGradGuard ng;
  for (auto& p : m.parameters()) p.zero_();
}

CorrectionNetConfig small(FusionMode fusion) {
  CorrectionNetConfig c;
  c.base_dim = 8;
  c.blocks_per_level = {1, 1, 1, 1};
  c.refinement_blocks = 1;
  c.heads_per_level = {1, 2, 2, 4};
  c.fusion = fusion;
  return c;
}

std::array<torch::Tensor, 3> pyramid(std::array<int64_t, 3> dims, int64_t size) {
  return {torch::randn({1, dims[0], size, size}), torch::randn({1, dims[1], size / 2, size / 2}),
          torch::randn({1, dims[2], size / 4, size / 4})};
}

}  // namespace

TEST_CASE("config validation") {
  CorrectionNetConfig c;
  CHECK_NOTHROW(c.validate());
  c.heads_per_level = {1, 2, 4, 7};
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(nn::Mdta(6, 4), Error);
  CHECK(parse_fusion("single_gate") == FusionMode::SingleGate);
  CHECK_THROWS_AS(parse_fusion("sum"), Error);
}

TEST_CASE("attention rows are softmax distributions") {
  torch::manual_seed(0);
  nn::Mdta m(8, 2);
  const auto a = m->attention_map(torch::randn({2, 8, 6, 6}));
  CHECK(a.sizes() == torch::IntArrayRef({2, 2, 4, 4}));
  CHECK(torch::allclose(a.sum(-1), torch::ones({2, 2, 4}), 1e-6, 1e-6));
  CHECK((a >= 0).all().item<bool>());
}

TEST_CASE("residual identities") {
  torch::manual_seed(1);
  const auto x = torch::randn({1, 8, 8, 8});
  SUBCASE("mdta with zero output projection") {
    nn::Mdta m(8, 2);
    torch::NoGradGuard ng;
    m->proj->weight.zero_();
    CHECK(torch::equal(m->forward(x), x));
  }
  SUBCASE("gdfn with zero output projection") {
    nn::Gdfn g(8, 2.66);
    torch::NoGradGuard ng;
    g->proj_out->weight.zero_();
    CHECK(torch::equal(g->forward(x), x));
  }
  SUBCASE("gdfn with a silent gelu path") {
    nn::Gdfn g(8, 2.66);
    torch::NoGradGuard ng;
    g->dw->weight.index_put_({Slice(0, g->hidden)}, 0.0);
    CHECK(torch::equal(g->forward(x), x));
  }
  SUBCASE("zeroed msgm emits zeros") {
    nn::Msgm m(std::array<int64_t, 3>{8, 16, 32}, 1);
    zero_all(*m);
    auto out = m->forward(pyramid({8, 16, 32}, 8));
    CHECK(out.abs().max().item<float>() == 0.0f);
  }
  SUBCASE("zeroed correction net") {
    for (auto f : {FusionMode::Msgm, FusionMode::SimpleConcat, FusionMode::SingleGate}) {
      nn::CorrectionNet net(small(f));
      zero_all(*net);
      const auto img = torch::rand({1, 3, 16, 16});
      CHECK(torch::equal(net->forward(img), img));
    }
  }
}

TEST_CASE("gdfn keeps shape for any expansion") {
  torch::NoGradGuard ng;
  for (double e : {1.0, 2.0, 2.66, 3.3}) {
    nn::Gdfn g(6, e);
    CHECK(g->forward(torch::randn({1, 6, 5, 7})).sizes() == torch::IntArrayRef({1, 6, 5, 7}));
  }
}

TEST_CASE("attention cost is linear in pixels and quadratic in channels") {
  const auto base = mdta_attention_macs(48, 1, 64, 64);
  CHECK(mdta_attention_macs(48, 1, 128, 64) == 2 * base);
  CHECK(mdta_attention_macs(96, 1, 64, 64) == 4 * base);
  CHECK(mdta_attention_macs(48, 2, 64, 64) * 2 == base);
  CHECK_THROWS_AS(mdta_attention_macs(48, 5, 8, 8), Error);
}

TEST_CASE("down/up sampling round trip shapes") {
  torch::NoGradGuard ng;
  nn::Downsample d(16);
  nn::Upsample u(32);
  const auto x = torch::randn({1, 16, 12, 20});
  const auto y = d->forward(x);
  CHECK(y.sizes() == torch::IntArrayRef({1, 32, 6, 10}));
  CHECK(u->forward(y).sizes() == x.sizes());
}

TEST_CASE("msgm output matches the target level and ignores resample order") {
  torch::manual_seed(2);
  torch::NoGradGuard ng;
  const std::array<int64_t, 3> dims{8, 16, 32};
  const auto in = pyramid(dims, 16);
  for (int target = 1; target <= 3; ++target) {
    for (bool single : {false, true}) {
      nn::Msgm m(dims, target, single);
      const auto out = m->forward(in);
      const int64_t s = 16 >> (target - 1);
      CHECK(out.sizes() == torch::IntArrayRef({1, dims[static_cast<std::size_t>(target - 1)], s, s}));
      CHECK(torch::equal(out, m->forward_ordered(in, {2, 0, 1})));
      CHECK(torch::equal(out, m->forward_ordered(in, {1, 2, 0})));
    }
  }
  nn::Msgm m(dims, 1);
  auto bad = in;
  bad[2] = torch::randn({1, 32, 3, 3});
  CHECK_THROWS_AS(m->forward(bad), Error);
}

TEST_CASE("sequential gate flag changes the computation") {
  torch::manual_seed(3);
  torch::NoGradGuard ng;
  const std::array<int64_t, 3> dims{4, 8, 16};
  nn::Msgm par(dims, 1, false, false);
  nn::Msgm seq(dims, 1, false, true);
  auto src = par->named_parameters();
  for (auto& it : seq->named_parameters()) it.value().copy_(src[it.key()]);
  const auto in = pyramid(dims, 8);
  CHECK_FALSE(torch::equal(par->forward(in), seq->forward(in)));
}

TEST_CASE("fusion variants are drop-in interchangeable") {
  torch::NoGradGuard ng;
  const auto x = torch::rand({1, 3, 32, 24});
  for (auto f : {FusionMode::Msgm, FusionMode::SimpleConcat, FusionMode::SingleGate}) {
    nn::CorrectionNet net(small(f));
    CHECK(net->forward(x).sizes() == x.sizes());
  }
  nn::CorrectionNet net(small(FusionMode::Msgm));
  CHECK_THROWS_AS(net->forward(torch::rand({1, 3, 12, 16})), Error);
}

TEST_CASE("128x128 shape and default parameter count") {
  nn::CorrectionNet plain(CorrectionNetConfig{.fusion = FusionMode::SimpleConcat});
  const auto n = count_params(*plain);
  CHECK(n >= 21'000'000);
  CHECK(n <= 31'000'000);
  torch::NoGradGuard ng;
  nn::CorrectionNet net(small(FusionMode::Msgm));
  CHECK(net->forward(torch::rand({1, 3, 128, 128})).sizes() == torch::IntArrayRef({1, 3, 128, 128}));
}

TEST_CASE("checkpoint key names") {
  nn::CorrectionNet net(small(FusionMode::Msgm));
  auto params = net->named_parameters();
  CHECK(params.contains("enc1.blk0.attn.qkv.weight"));
  CHECK(params.contains("msgm1.fuse_in.weight"));
  CHECK(params.contains("dec2.blk0.ffn.proj_out.weight"));
  CHECK(params.contains("refine0.attn.temperature"));
}

TEST_CASE("gradients match central differences") {
  SUBCASE("mdta") {
    torch::manual_seed(10);
    nn::Mdta m(4, 2);
    auto r = gradcheck(*m, [&](const torch::Tensor& x) { return m->forward(x); },
                       torch::randn({1, 4, 4, 4}), 1);
    INFO(r.worst);
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("gdfn") {
    torch::manual_seed(11);
    nn::Gdfn g(4, 2.66);
    auto r = gradcheck(*g, [&](const torch::Tensor& x) { return g->forward(x); },
                       torch::randn({1, 4, 4, 4}), 2);
    INFO(r.worst);
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("msgm") {
    torch::manual_seed(12);
    nn::Msgm m(std::array<int64_t, 3>{2, 4, 8}, 1);
    const auto mid = torch::randn({1, 4, 2, 2}, torch::kDouble);
    const auto low = torch::randn({1, 8, 1, 1}, torch::kDouble);
    auto r = gradcheck(*m, [&](const torch::Tensor& x) { return m->forward({x, mid, low}); },
                       torch::randn({1, 2, 4, 4}), 3);
    INFO(r.worst);
    CHECK(r.max_rel_error < 1e-4);
  }
}
