#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hevs {

struct TrainStage {
  int patch_size = 0;
  int batch_size = 0;
  std::int64_t iterations = 0;

  friend bool operator==(const TrainStage&, const TrainStage&) = default;
};

// Patch/batch stages run back to back. The learning rate holds base_lr
// through the first stage when flat_first_stage is set, then follows a
// half-cosine down to final_lr, reached exactly on the last iteration.
struct ProgressiveSchedule {
  std::vector<TrainStage> stages;
  double base_lr = 5e-4;
  double final_lr = 1e-7;
  bool flat_first_stage = true;

  // [(80,84,58K), (128,30,36K), (160,18,24K), (192,12,24K)], 5e-4 -> 1e-7.
  static ProgressiveSchedule initial_training();
  // Single (192,12,20K) stage, cosine 1e-4 -> 1e-7 from the first iteration.
  static ProgressiveSchedule fine_tuning();

  // "80x84x58000, 128x30x36000" -> stages.
  static std::vector<TrainStage> parse_stages(const std::string& text);
  static std::string format_stages(const std::vector<TrainStage>& stages);

  std::int64_t total() const;
  void validate() const;
};

struct StageInfo {
  int patch_size;
  int batch_size;
  std::size_t index;
};

StageInfo stage_at(const ProgressiveSchedule& sched, std::int64_t iter);
double lr_at(const ProgressiveSchedule& sched, std::int64_t iter);

}  // namespace hevs
