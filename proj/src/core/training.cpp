#include "hevs/training.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "hevs/checkpoint.hpp"
#include "hevs/error.hpp"
#include "hevs/evaluation.hpp"

namespace hevs {
namespace {

constexpr std::uint64_t kStreamBatch = 1;
constexpr std::uint64_t kStreamInit = 2;

RgbImage crop_rgb(const RgbImage& img, int y0, int x0, int size) {
  RgbImage out(size, size);
  for (int r = 0; r < size; ++r)
    std::copy_n(&img.values[(static_cast<std::size_t>(y0 + r) * img.width + x0) * 3], size * 3,
                &out.values[static_cast<std::size_t>(r) * size * 3]);
  return out;
}

torch::Tensor first_stage(DemosaicFormer& model, const torch::Tensor& x) {
  return model->config().variant.order == StageOrder::CorrectFirst ? model->pc(x) : model->coarse(x);
}

struct Snapshot {
  NamedParams values;
};

Snapshot backup(const NamedParams& params) {
  Snapshot s;
  for (const auto& [n, p] : params) s.values.emplace_back(n, p.detach().clone());
  return s;
}

void restore(const NamedParams& params, const Snapshot& s) {
  torch::NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) params[i].second.copy_(s.values[i].second);
}

}  // namespace

TrainMode parse_train_mode(const std::string& s) {
  if (s == "A" || s == "indiv_then_joint_ft") return TrainMode::IndivThenJointFt;
  if (s == "B" || s == "joint_with_stage1_supervision") return TrainMode::JointWithStage1Supervision;
  if (s == "C" || s == "joint") return TrainMode::Joint;
  fail(ErrorCode::Config, "unknown training mode '" + s + "' (A, B, C)");
}

const char* train_mode_name(TrainMode m) noexcept {
  switch (m) {
    case TrainMode::IndivThenJointFt: return "A";
    case TrainMode::JointWithStage1Supervision: return "B";
    case TrainMode::Joint: return "C";
  }
  return "?";
}

double l1_loss(const RgbImage& pred, const RgbImage& gt) {
  require(pred.height == gt.height && pred.width == gt.width, ErrorCode::Shape,
          "l1_loss: shape mismatch");
  require(!pred.values.empty(), ErrorCode::Shape, "l1_loss of empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i)
    s += std::abs(static_cast<double>(pred.values[i]) - gt.values[i]);
  return s / static_cast<double>(pred.values.size());
}

torch::Tensor l1_loss_tensor(const torch::Tensor& pred, const torch::Tensor& gt) {
  require(pred.sizes() == gt.sizes(), ErrorCode::Shape, "l1_loss: shape mismatch");
  return (pred - gt).abs().mean();
}

TrainingData load_training_data(const RunConfig& cfg) {
  TrainingData data;
  data.dataset = load_dataset(cfg.train_dir, cfg.pattern);
  require(!data.dataset.items.empty(), ErrorCode::Config,
          "training set " + cfg.train_dir.string() + " holds no images");
  if (cfg.augment_enabled && cfg.augment.defect_source == DefectSource::Harvested) {
    data.library = data.dataset.harvest(cfg.pattern, cfg.harvest_tau);
    require(!data.library.empty(), ErrorCode::Config,
            "harvested defect source selected but " + cfg.train_dir.string() +
                " has no raw/ or defects/ files to harvest from");
    data.library.validate(cfg.pattern);
  }
  return data;
}

std::pair<torch::Tensor, torch::Tensor> make_batch(const RunConfig& cfg, const TrainingData& data,
                                                   std::int64_t iter, int patch, int batch,
                                                   std::int64_t* augment_calls) {
  Rng rng(derive_seed(cfg.seed, kStreamBatch, static_cast<std::uint64_t>(iter)));
  std::vector<torch::Tensor> inputs, targets;
  const auto& items = data.dataset.items;
  for (int b = 0; b < batch; ++b) {
    const auto& item = items[uniform_index(rng, items.size())];
    require(item.gt.height >= patch && item.gt.width >= patch, ErrorCode::Bounds,
            "image '" + item.id + "' is smaller than patch size " + std::to_string(patch));
    SamplePair pair;
    if (cfg.augment_enabled) {
      // Cropping before the geometric transform draws from the same patch
      // distribution as transforming the whole image and cropping after.
      const int y0 = 4 * static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>((item.gt.height - patch) / 4 + 1)));
      const int x0 = 4 * static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>((item.gt.width - patch) / 4 + 1)));
      pair = synthesize_pair(crop_rgb(item.gt, y0, x0, patch), cfg.augment, data.library,
                             cfg.pattern, rng);
      if (augment_calls) ++*augment_calls;
      pair = crop_aligned_patch(pair, patch, rng);
    } else {
      SamplePair full{item.raw ? *item.raw : mosaic(item.gt, cfg.pattern), item.gt};
      pair = crop_aligned_patch(full, patch, rng);
    }
    inputs.push_back(extend_tensor(pair.input));
    targets.push_back(to_tensor(pair.target));
  }
  return {torch::cat(inputs, 0), torch::cat(targets, 0)};
}

double validation_psnr(DemosaicFormer& model, const Dataset& val, const PatternSpec& pattern) {
  require(!val.items.empty(), ErrorCode::Config, "validation set is empty");
  double total = 0.0;
  for (const auto& item : val.items) {
    const RawImage raw = item.raw ? *item.raw : mosaic(item.gt, pattern);
    total += psnr(forward(model, raw), item.gt);
  }
  return total / static_cast<double>(val.items.size());
}

std::int64_t run_length(const RunConfig& cfg) {
  const std::int64_t t = cfg.schedule.total();
  if (cfg.mode.mode != TrainMode::IndivThenJointFt) return t;
  return t + std::llround(cfg.mode.mode_a_fraction * static_cast<double>(t));
}

void write_train_log(const std::vector<LogRecord>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  out << "iter\tloss\tlr\tpatch\tbatch\n" << std::setprecision(9);
  for (const auto& r : log)
    out << r.iter << '\t' << r.loss << '\t' << r.lr << '\t' << r.patch << '\t' << r.batch << '\n';
}

TrainResult train(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.schedule.validate();
  cfg.model.validate();
  cfg.optim.validate();
  cfg.augment.validate();
  require(cfg.mode.mode_a_fraction >= 0.0 && cfg.mode.stage1_loss_weight >= 0.0, ErrorCode::Config,
          "mode_a_fraction and stage1_loss_weight must be non-negative");
  require(!cfg.output_dir.empty(), ErrorCode::Config, "training needs an output directory");
  if (cfg.deterministic) {
    torch::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, false);
  }
  fs::create_directories(cfg.output_dir);

  const TrainingData data = load_training_data(cfg);
  std::optional<Dataset> val;
  if (!cfg.val_dir.empty()) val = load_dataset(cfg.val_dir, cfg.pattern);

  TrainResult result;
  result.model = build_variant(cfg.model);
  DemosaicFormer& model = result.model;
  init_weights(*model, cfg.init, derive_seed(cfg.seed, kStreamInit));
  if (!cfg.init_checkpoint.empty())
    load_module_state(*model, load_checkpoint(cfg.init_checkpoint), /*strict=*/true);

  const NamedParams params = named_params(*model);
  Adam opt(params, cfg.optim);
  std::optional<EmaState> ema;
  if (cfg.ema.enabled) ema = EmaState::from_params(params, cfg.ema.decay);

  std::int64_t start = 0;
  result.best_val_psnr = -std::numeric_limits<double>::infinity();
  if (!cfg.resume.empty()) {
    const Checkpoint ck = load_checkpoint(cfg.resume);
    load_module_state(*model, ck, /*strict=*/true);
    opt.load(ck);
    if (ema) ema->load(ck);
    start = ck.at("state.iter").item<std::int64_t>();
    result.best_val_psnr = ck.at("state.best_psnr").item<double>();
    result.best_iter = ck.at("state.best_iter").item<std::int64_t>();
    result.augment_invocations = ck.at("state.augment_calls").item<std::int64_t>();
  }

  auto save = [&](const fs::path& path, std::int64_t done, bool evaluated_weights) {
    Checkpoint ck;
    ck.config_snapshot = cfg.config_snapshot;
    Snapshot live;
    if (evaluated_weights && ema) {
      live = backup(params);
      ema->copy_to(params);
    }
    add_module_state(ck, *model);
    if (evaluated_weights && ema) restore(params, live);
    opt.save(ck);
    if (ema) ema->save(ck);
    ck.tensors["state.iter"] = torch::tensor({done}, torch::kLong);
    ck.tensors["state.best_psnr"] = torch::tensor({result.best_val_psnr}, torch::kDouble);
    ck.tensors["state.best_iter"] = torch::tensor({result.best_iter}, torch::kLong);
    ck.tensors["state.augment_calls"] = torch::tensor({result.augment_invocations}, torch::kLong);
    save_checkpoint(ck, path);
  };

  auto evaluate = [&]() {
    Snapshot live;
    if (ema) {
      live = backup(params);
      ema->copy_to(params);
    }
    const double p = validation_psnr(model, *val, cfg.pattern);
    if (ema) restore(params, live);
    return p;
  };

  const fs::path log_path = cfg.output_dir / "train_log.tsv";
  const bool fresh_log = start == 0 || !fs::exists(log_path);
  std::ofstream log_file(log_path, fresh_log ? std::ios::trunc : std::ios::app);
  require(static_cast<bool>(log_file), ErrorCode::Io, "cannot write " + log_path.string());
  if (fresh_log) log_file << "iter\tloss\tlr\tpatch\tbatch\n";
  log_file << std::setprecision(9);

  const std::int64_t sched_total = cfg.schedule.total();
  const std::int64_t total = run_length(cfg);
  const std::int64_t phase1 = total - sched_total;
  std::deque<double> recent;
  std::int64_t done = start;

  for (std::int64_t k = start; k < total; ++k) {
    const bool first_only = k < phase1;
    const std::int64_t sk = first_only ? 0 : k - phase1;
    const StageInfo st = stage_at(cfg.schedule, sk);
    const double lr = first_only ? cfg.schedule.base_lr : lr_at(cfg.schedule, sk);
    auto [x, y] = make_batch(cfg, data, k, st.patch_size, st.batch_size, &result.augment_invocations);

    opt.zero_grad();
    torch::Tensor loss;
    if (first_only) {
      loss = l1_loss_tensor(first_stage(model, x), y);
    } else {
      auto out = model->forward_stages(x);
      loss = l1_loss_tensor(out.output, y);
      if (cfg.mode.mode == TrainMode::JointWithStage1Supervision)
        loss = loss + cfg.mode.stage1_loss_weight * l1_loss_tensor(out.intermediate, y);
    }
    const double lv = loss.item<double>();
    recent.push_back(lv);
    if (recent.size() > 20) recent.pop_front();
    if (!std::isfinite(lv)) {
      const fs::path diag = cfg.output_dir / "nonfinite_diagnostics.txt";
      std::ofstream d(diag);
      d << "iter\t" << k << "\nlr\t" << lr << "\npatch\t" << st.patch_size << "\nbatch\t"
        << st.batch_size << "\ninput_finite\t" << torch::isfinite(x).all().item<bool>()
        << "\nrecent_losses";
      for (double r : recent) d << '\t' << r;
      std::int64_t bad = 0;
      for (const auto& [n, p] : params) bad += (~torch::isfinite(p)).sum().item<std::int64_t>();
      d << "\nnonfinite_params\t" << bad << '\n';
      save(cfg.output_dir / "nonfinite.ckpt", k, false);
      fail(ErrorCode::Numeric, "non-finite loss at iteration " + std::to_string(k) +
                                   "; diagnostics in " + diag.string());
    }
    loss.backward();
    clip_grad_norm(params, cfg.optim.grad_clip);
    opt.step(lr);
    if (ema) ema_update_inplace(*ema, params);

    result.log.push_back({k, lv, lr, st.patch_size, st.batch_size});
    log_file << k << '\t' << lv << '\t' << lr << '\t' << st.patch_size << '\t' << st.batch_size << '\n';
    done = k + 1;
    if (cfg.verbose && (done % 50 == 0 || done == total))
      std::cout << "iter " << done << "/" << total << " loss " << lv << " lr " << lr << std::endl;

    if (val && cfg.val_every > 0 && (done % cfg.val_every == 0 || done == total)) {
      const double p = evaluate();
      result.val_history.emplace_back(done, p);
      if (cfg.verbose) std::cout << "validation PSNR at " << done << ": " << p << " dB" << std::endl;
      if (p > result.best_val_psnr) {
        result.best_val_psnr = p;
        result.best_iter = done;
        result.best_checkpoint = cfg.output_dir / "best.ckpt";
        save(result.best_checkpoint, done, true);
      }
    }
    if (cfg.ckpt_every > 0 && done % cfg.ckpt_every == 0) {
      log_file.flush();
      save(cfg.output_dir / ("iter_" + std::to_string(done) + ".ckpt"), done, false);
    }
    if (cfg.stop_after >= 0 && done >= cfg.stop_after) break;
  }
  log_file.flush();

  result.iterations_done = done;
  result.last_checkpoint = cfg.output_dir / "last.ckpt";
  save(result.last_checkpoint, done, false);
  if (result.best_checkpoint.empty() && fs::exists(cfg.output_dir / "best.ckpt"))
    result.best_checkpoint = cfg.output_dir / "best.ckpt";
  if (ema && done == total) ema->copy_to(params);
  return result;
}

TrainResult finetune(RunConfig cfg, const std::filesystem::path& init) {
  cfg.augment_enabled = false;
  cfg.ema.enabled = true;
  if (cfg.resume.empty()) cfg.init_checkpoint = init;
  return train(cfg);
}

}  // namespace hevs
