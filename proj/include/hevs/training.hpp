#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hevs/data_pipeline.hpp"
#include "hevs/model.hpp"
#include "hevs/optim.hpp"
#include "hevs/schedule.hpp"

namespace hevs {

enum class TrainMode {
  IndivThenJointFt,          // A: first stage alone, then joint
  JointWithStage1Supervision,  // B: joint loss plus weighted first-stage loss
  Joint,                     // C: joint loss on the final output only
};

TrainMode parse_train_mode(const std::string& s);
const char* train_mode_name(TrainMode m) noexcept;

struct TrainModeConfig {
  TrainMode mode = TrainMode::Joint;
  double stage1_loss_weight = 0.5;  // mode B
  double mode_a_fraction = 0.3;     // mode A: first-stage-only share of the schedule
};

struct EmaConfig {
  bool enabled = false;
  double decay = 0.999;
};

struct RunConfig {
  DemosaicFormerConfig model;
  InitScheme init = InitScheme::ResidualZero;
  ProgressiveSchedule schedule = ProgressiveSchedule::initial_training();
  TrainModeConfig mode;
  OptimConfig optim;
  EmaConfig ema;
  AugmentConfig augment;
  bool augment_enabled = true;
  double harvest_tau = kDefaultHarvestTau;
  PatternSpec pattern;

  std::filesystem::path train_dir;
  std::filesystem::path val_dir;  // empty: no validation
  std::filesystem::path output_dir;
  std::filesystem::path resume;           // continue from a checkpoint written by train()
  std::filesystem::path init_checkpoint;  // strict weight load before training

  std::int64_t val_every = 2000;
  std::int64_t ckpt_every = 2000;
  std::int64_t stop_after = -1;  // stop once this many iterations are done (for staged runs)
  std::uint64_t seed = 0;
  bool deterministic = true;  // single-threaded, deterministic kernels
  bool verbose = false;
  std::string config_snapshot;
};

struct LogRecord {
  std::int64_t iter = 0;
  double loss = 0.0;
  double lr = 0.0;
  int patch = 0;
  int batch = 0;
};

struct TrainResult {
  std::vector<LogRecord> log;
  std::vector<std::pair<std::int64_t, double>> val_history;  // (iteration, PSNR)
  double best_val_psnr = 0.0;
  std::int64_t best_iter = -1;
  std::int64_t iterations_done = 0;
  std::int64_t augment_invocations = 0;
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;
  DemosaicFormer model{nullptr};
};

// Mean absolute error over every pixel-channel entry.
double l1_loss(const RgbImage& pred, const RgbImage& gt);
torch::Tensor l1_loss_tensor(const torch::Tensor& pred, const torch::Tensor& gt);

// Training data view: stored pairs plus the harvested defect library.
struct TrainingData {
  Dataset dataset;
  DefectLibrary library;
};

TrainingData load_training_data(const RunConfig& cfg);

// Draws the batch for one iteration. Deterministic in (seed, iteration).
// Increments *augment_calls once per synthesized sample.
std::pair<torch::Tensor, torch::Tensor> make_batch(const RunConfig& cfg, const TrainingData& data,
                                                   std::int64_t iter, int patch, int batch,
                                                   std::int64_t* augment_calls);

// Mean PSNR of the model over a dataset's stored pairs (raw when present,
// otherwise the clean mosaic of gt).
double validation_psnr(DemosaicFormer& model, const Dataset& val, const PatternSpec& pattern);

// Total iterations a run executes (mode A adds its first-stage phase).
std::int64_t run_length(const RunConfig& cfg);

TrainResult train(const RunConfig& cfg);

// Fine-tuning: strict load of init, augmentation off, EMA on.
TrainResult finetune(RunConfig cfg, const std::filesystem::path& init);

void write_train_log(const std::vector<LogRecord>& log, const std::filesystem::path& path);

}  // namespace hevs
