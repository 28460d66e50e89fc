#include <doctest.h>

#include <cmath>
#include <fstream>

#include "hevs/checkpoint.hpp"
#include "hevs/error.hpp"
#include "hevs/training.hpp"
#include "support.hpp"

using namespace hevs;
using hevs::testing::TempDir;

namespace {

DemosaicFormerConfig tiny_model() {
  DemosaicFormerConfig c;
  c.coarse = CoarseNetConfig{8, 1, 1, 4, 7};
  c.correction.base_dim = 8;
  c.correction.blocks_per_level = {1, 1, 1, 1};
  c.correction.refinement_blocks = 1;
  c.correction.heads_per_level = {1, 2, 2, 4};
  return c;
}

RunConfig smoke_config(const std::filesystem::path& root, std::int64_t iters) {
  RunConfig rc;
  rc.model = tiny_model();
  rc.schedule.stages = {{16, 2, iters / 2}, {24, 2, iters - iters / 2}};
  rc.schedule.base_lr = 1e-3;
  rc.schedule.final_lr = 1e-6;
  rc.train_dir = root / "train";
  rc.output_dir = root / "run";
  rc.val_every = 0;
  rc.ckpt_every = 0;
  rc.seed = 3;
  return rc;
}

std::vector<double> losses(const TrainResult& r) {
  std::vector<double> out;
  for (const auto& l : r.log) out.push_back(l.loss);
  return out;
}

double max_param_diff(const torch::nn::Module& a, const torch::nn::Module& b) {
  double m = 0.0;
  auto pb = b.named_parameters();
  for (const auto& it : a.named_parameters())
    m = std::max(m, (it.value() - pb[it.key()]).abs().max().item<double>());
  return m;
}

std::int64_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::int64_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("l1 loss") {
  RgbImage a(2, 2, 0.25f), b(2, 2, 0.75f);
  CHECK(l1_loss(a, a) == 0.0);
  CHECK(l1_loss(a, b) == doctest::Approx(0.5));
  CHECK_THROWS_AS(l1_loss(a, RgbImage(1, 2)), Error);
  CHECK(l1_loss_tensor(torch::zeros({1, 3, 2, 2}), torch::ones({1, 3, 2, 2})).item<double>() == 1.0);
}

TEST_CASE("training modes") {
  CHECK(parse_train_mode("A") == TrainMode::IndivThenJointFt);
  CHECK(parse_train_mode("joint_with_stage1_supervision") == TrainMode::JointWithStage1Supervision);
  CHECK(std::string(train_mode_name(TrainMode::Joint)) == "C");
  CHECK_THROWS_AS(parse_train_mode("D"), Error);
  RunConfig rc;
  CHECK(run_length(rc) == 142000);
  rc.mode.mode = TrainMode::IndivThenJointFt;
  CHECK(run_length(rc) == 142000 + 42600);
}

TEST_CASE("progressive schedule boundaries") {
  const auto s = ProgressiveSchedule::initial_training();
  CHECK(s.total() == 142000);
  const std::pair<std::int64_t, std::pair<int, int>> expect[] = {
      {0, {80, 84}}, {57999, {80, 84}}, {58000, {128, 30}}, {93999, {128, 30}},
      {94000, {160, 18}}, {117999, {160, 18}}, {118000, {192, 12}}, {141999, {192, 12}}};
  for (const auto& [it, pb] : expect) {
    CHECK(stage_at(s, it).patch_size == pb.first);
    CHECK(stage_at(s, it).batch_size == pb.second);
  }
  CHECK_THROWS_AS(stage_at(s, 142000), Error);
  CHECK_THROWS_AS(lr_at(s, -1), Error);
}

TEST_CASE("learning rate endpoints, continuity and monotonicity") {
  const auto s = ProgressiveSchedule::initial_training();
  CHECK(lr_at(s, 0) == 5e-4);
  CHECK(lr_at(s, 57999) == 5e-4);
  CHECK(lr_at(s, 58000) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(std::abs(lr_at(s, 141999) - 1e-7) <= 1e-12 * 1e-7);
  double prev = lr_at(s, 58000);
  for (std::int64_t i = 58001; i < 142000; i += 7) {
    const double v = lr_at(s, i);
    REQUIRE(v <= prev);
    prev = v;
  }
  const auto f = ProgressiveSchedule::fine_tuning();
  CHECK(f.total() == 20000);
  CHECK(stage_at(f, 0).patch_size == 192);
  CHECK(stage_at(f, 0).batch_size == 12);
  CHECK(lr_at(f, 0) == 1e-4);
  CHECK(std::abs(lr_at(f, 19999) - 1e-7) <= 1e-12 * 1e-7);
}

TEST_CASE("cosine midpoint is the mean of the endpoints") {
  ProgressiveSchedule s;
  s.stages = {{8, 4, 10}, {16, 2, 21}};  // cosine span 20, midpoint at 10 + 10
  s.base_lr = 1e-3;
  s.final_lr = 1e-5;
  CHECK(lr_at(s, 20) == doctest::Approx((1e-3 + 1e-5) / 2).epsilon(1e-12));
}

TEST_CASE("schedule parsing and validation") {
  const auto st = ProgressiveSchedule::parse_stages("80x84x58000, 128x30x36000");
  REQUIRE(st.size() == 2);
  CHECK(st[1] == TrainStage{128, 30, 36000});
  CHECK(ProgressiveSchedule::format_stages(st) == "80x84x58000,128x30x36000");
  CHECK_THROWS_AS(ProgressiveSchedule::parse_stages("80x84"), Error);
  ProgressiveSchedule s;
  s.stages = {{84, 2, 10}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.stages = {{64, 2, 10}, {32, 2, 10}};
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("ema update") {
  NamedParams p{{"w", torch::full({2}, 2.0)}};
  EmaState z = EmaState::from_params({{"w", torch::zeros({2})}}, 0.0);
  CHECK(torch::equal(ema_update(z, p).shadow[0].second, p[0].second));
  z.decay = 1.0;
  CHECK(torch::equal(ema_update(z, p).shadow[0].second, torch::zeros({2})));
  z.decay = 0.5;
  CHECK(torch::equal(ema_update(z, p).shadow[0].second, torch::ones({2})));
  CHECK_THROWS_AS(ema_update(z, {{"w", torch::zeros({3})}}), Error);
}

TEST_CASE("adam matches the closed-form first step") {
  auto w = torch::tensor({1.0, -2.0}, torch::kDouble).requires_grad_(true);
  NamedParams p{{"w", w}};
  OptimConfig cfg;
  Adam opt(p, cfg);
  (w * torch::tensor({3.0, -0.5}, torch::kDouble)).sum().backward();
  opt.step(0.1);
  // First bias-corrected step is lr * g / (|g| + eps') = lr * sign(g).
  CHECK(w[0].item<double>() == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(w[1].item<double>() == doctest::Approx(-1.9).epsilon(1e-7));
  CHECK(opt.steps(0) == 1);
}

TEST_CASE("gradient clipping") {
  auto w = torch::zeros({2}, torch::kDouble).requires_grad_(true);
  w.mutable_grad() = torch::tensor({3.0, 4.0}, torch::kDouble);
  NamedParams p{{"w", w}};
  CHECK(clip_grad_norm(p, 1.0) == doctest::Approx(5.0));
  CHECK(w.grad().norm().item<double>() == doctest::Approx(1.0));
  CHECK(clip_grad_norm(p, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("smoke run logs one row per iteration") {
  TempDir dir("smoke");
  hevs::testing::write_gt_set(dir / "train", 8, 128, 128, 1);
  hevs::testing::write_gt_set(dir / "val", 2, 64, 64, 2);
  RunConfig rc = smoke_config(dir.path(), 50);
  rc.val_dir = dir / "val";
  rc.val_every = 25;
  rc.ckpt_every = 25;
  const TrainResult r = train(rc);
  REQUIRE(r.log.size() == 50);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    CHECK(r.log[i].iter == static_cast<std::int64_t>(i));
    CHECK(r.log[i].lr == lr_at(rc.schedule, r.log[i].iter));
    CHECK(r.log[i].patch == (i < 25 ? 16 : 24));
    CHECK(std::isfinite(r.log[i].loss));
  }
  CHECK(count_lines(dir / "run/train_log.tsv") == 51);
  CHECK(r.val_history.size() == 2);
  CHECK(std::filesystem::exists(dir / "run/iter_25.ckpt"));
  CHECK(std::filesystem::exists(dir / "run/best.ckpt"));
  CHECK(std::filesystem::exists(dir / "run/last.ckpt"));
  CHECK(r.augment_invocations == 100);
}

TEST_CASE("mode B with zero weight reproduces mode C") {
  TempDir dir("modes");
  hevs::testing::write_gt_set(dir / "train", 4, 64, 64, 3);
  RunConfig c = smoke_config(dir.path(), 12);
  RunConfig b = c;
  b.mode.mode = TrainMode::JointWithStage1Supervision;
  b.mode.stage1_loss_weight = 0.0;
  b.output_dir = dir / "run_b";
  const auto lc = losses(train(c));
  const auto lb = losses(train(b));
  CHECK(lb == lc);
  b.mode.stage1_loss_weight = 0.5;
  b.output_dir = dir / "run_b2";
  CHECK(losses(train(b)) != lc);
}

TEST_CASE("mode A trains the first stage alone before joint training") {
  TempDir dir("modea");
  hevs::testing::write_gt_set(dir / "train", 4, 64, 64, 4);
  RunConfig rc = smoke_config(dir.path(), 10);
  rc.mode.mode = TrainMode::IndivThenJointFt;
  rc.mode.mode_a_fraction = 0.3;
  CHECK(run_length(rc) == 13);
  rc.stop_after = 3;
  auto init = build_variant(rc.model);
  init_weights(*init, rc.init, derive_seed(rc.seed, 2));
  const TrainResult r = train(rc);
  CHECK(r.iterations_done == 3);
  CHECK(max_param_diff(*r.model->pc, *init->pc) == 0.0);
  CHECK(max_param_diff(*r.model->coarse, *init->coarse) > 0.0);
  CHECK(r.log[2].lr == rc.schedule.base_lr);
}

TEST_CASE("resuming from a checkpoint reproduces an uninterrupted run") {
  TempDir dir("resume");
  hevs::testing::write_gt_set(dir / "train", 4, 64, 64, 5);
  RunConfig full = smoke_config(dir.path(), 100);
  full.ema.enabled = true;
  full.ema.decay = 0.9;
  full.output_dir = dir / "full";
  const TrainResult a = train(full);

  RunConfig first = full;
  first.output_dir = dir / "split";
  first.stop_after = 50;
  const TrainResult h1 = train(first);
  REQUIRE(h1.iterations_done == 50);
  RunConfig second = full;
  second.output_dir = dir / "split";
  second.resume = h1.last_checkpoint;
  const TrainResult h2 = train(second);
  CHECK(h2.iterations_done == 100);
  CHECK(max_param_diff(*a.model, *h2.model) == 0.0);
  CHECK(h2.log.front().iter == 50);
  CHECK(h2.log.back().loss == a.log.back().loss);
  CHECK(count_lines(dir / "split/train_log.tsv") == 101);
}

TEST_CASE("fine-tuning: lr endpoints, no augmentation, strict init") {
  TempDir dir("ft");
  hevs::testing::write_gt_set(dir / "train", 4, 64, 64, 6);
  RunConfig base = smoke_config(dir.path(), 6);
  const TrainResult pre = train(base);

  RunConfig ft = base;
  ft.schedule = ProgressiveSchedule::fine_tuning();
  ft.schedule.stages = {{32, 2, 10}};
  ft.output_dir = dir / "ft";
  const TrainResult r = finetune(ft, pre.last_checkpoint);
  REQUIRE(r.log.size() == 10);
  CHECK(r.log.front().lr == 1e-4);
  CHECK(std::abs(r.log.back().lr - 1e-7) <= 1e-19);
  CHECK(r.augment_invocations == 0);

  RunConfig wrong = ft;
  wrong.model.variant.fusion = FusionMode::SimpleConcat;
  wrong.output_dir = dir / "ft_wrong";
  try {
    finetune(wrong, pre.last_checkpoint);
    FAIL("expected a key mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::KeyMismatch);
    CHECK(std::string(e.what()).find("msgm") != std::string::npos);
  }
}

TEST_CASE("batches are a pure function of seed and iteration") {
  TempDir dir("batch");
  hevs::testing::write_gt_set(dir / "train", 3, 64, 64, 7);
  RunConfig rc = smoke_config(dir.path(), 4);
  const TrainingData data = load_training_data(rc);
  std::int64_t calls = 0;
  auto [x1, y1] = make_batch(rc, data, 7, 32, 3, &calls);
  auto [x2, y2] = make_batch(rc, data, 7, 32, 3, &calls);
  auto [x3, y3] = make_batch(rc, data, 8, 32, 3, &calls);
  CHECK(calls == 9);
  CHECK(x1.sizes() == torch::IntArrayRef({3, 3, 32, 32}));
  CHECK(torch::equal(x1, x2));
  CHECK(torch::equal(y1, y2));
  CHECK_FALSE(torch::equal(y1, y3));
  rc.augment_enabled = false;
  calls = 0;
  make_batch(rc, data, 1, 32, 2, &calls);
  CHECK(calls == 0);
  CHECK_THROWS_AS(make_batch(rc, data, 1, 128, 2, &calls), Error);
}

TEST_CASE("harvested source needs stored raw or defect files") {
  TempDir dir("harv");
  hevs::testing::write_gt_set(dir / "train", 2, 32, 32, 8);
  RunConfig rc = smoke_config(dir.path(), 2);
  rc.augment.defect_source = DefectSource::Harvested;
  CHECK_THROWS_AS(load_training_data(rc), Error);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  TempDir dir("nan");
  hevs::testing::write_gt_set(dir / "train", 2, 32, 32, 9);
  RunConfig rc = smoke_config(dir.path(), 4);
  rc.schedule.base_lr = 1e30;  // blows the weights up after the first step
  rc.schedule.final_lr = 1e30;
  rc.optim.grad_clip = 0.0;
  rc.init = InitScheme::Default;
  try {
    train(rc);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Numeric);
    CHECK(std::filesystem::exists(dir / "run/nonfinite_diagnostics.txt"));
    CHECK(std::filesystem::exists(dir / "run/nonfinite.ckpt"));
  }
}
