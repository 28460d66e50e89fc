#include "hevs/schedule.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "hevs/error.hpp"

namespace hevs {

ProgressiveSchedule ProgressiveSchedule::initial_training() {
  ProgressiveSchedule s;
  s.stages = {{80, 84, 58000}, {128, 30, 36000}, {160, 18, 24000}, {192, 12, 24000}};
  s.base_lr = 5e-4;
  s.final_lr = 1e-7;
  s.flat_first_stage = true;
  return s;
}

ProgressiveSchedule ProgressiveSchedule::fine_tuning() {
  ProgressiveSchedule s;
  s.stages = {{192, 12, 20000}};
  s.base_lr = 1e-4;
  s.final_lr = 1e-7;
  s.flat_first_stage = false;
  return s;
}

std::vector<TrainStage> ProgressiveSchedule::parse_stages(const std::string& text) {
  std::vector<TrainStage> stages;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    const std::string tok = item.substr(b, e - b + 1);
    TrainStage st;
    char x1 = 0, x2 = 0;
    std::istringstream is(tok);
    is >> st.patch_size >> x1 >> st.batch_size >> x2 >> st.iterations;
    require(is && x1 == 'x' && x2 == 'x' && is.peek() == EOF, ErrorCode::Config,
            "bad schedule stage '" + tok + "', expected <patch>x<batch>x<iterations>");
    stages.push_back(st);
  }
  require(!stages.empty(), ErrorCode::Config, "schedule has no stages");
  return stages;
}

std::string ProgressiveSchedule::format_stages(const std::vector<TrainStage>& stages) {
  std::string s;
  for (const auto& st : stages) {
    if (!s.empty()) s += ",";
    s += std::to_string(st.patch_size) + "x" + std::to_string(st.batch_size) + "x" +
         std::to_string(st.iterations);
  }
  return s;
}

std::int64_t ProgressiveSchedule::total() const {
  std::int64_t n = 0;
  for (const auto& st : stages) n += st.iterations;
  return n;
}

void ProgressiveSchedule::validate() const {
  require(!stages.empty(), ErrorCode::Config, "schedule has no stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& st = stages[i];
    require(st.patch_size > 0 && st.patch_size % 8 == 0, ErrorCode::Config,
            "patch sizes must be positive multiples of 8");
    require(st.batch_size > 0 && st.iterations >= 0, ErrorCode::Config,
            "batch sizes must be positive and iteration counts non-negative");
    if (i > 0) {
      require(st.patch_size >= stages[i - 1].patch_size, ErrorCode::Config,
              "patch sizes must be nondecreasing across stages");
      require(st.batch_size <= stages[i - 1].batch_size, ErrorCode::Config,
              "batch sizes must be nonincreasing across stages");
    }
  }
  require(base_lr > 0 && final_lr >= 0 && final_lr <= base_lr, ErrorCode::Config,
          "learning rates must satisfy 0 <= final_lr <= base_lr, base_lr > 0");
}

StageInfo stage_at(const ProgressiveSchedule& sched, std::int64_t iter) {
  require(iter >= 0 && iter < sched.total(), ErrorCode::Bounds,
          "iteration " + std::to_string(iter) + " outside schedule of " +
              std::to_string(sched.total()));
  std::int64_t end = 0;
  for (std::size_t i = 0; i < sched.stages.size(); ++i) {
    end += sched.stages[i].iterations;
    if (iter < end) return {sched.stages[i].patch_size, sched.stages[i].batch_size, i};
  }
  fail(ErrorCode::Bounds, "iteration beyond schedule");
}

double lr_at(const ProgressiveSchedule& sched, std::int64_t iter) {
  const std::int64_t total = sched.total();
  require(iter >= 0 && iter < total, ErrorCode::Bounds,
          "iteration " + std::to_string(iter) + " outside schedule of " + std::to_string(total));
  const std::int64_t start = sched.flat_first_stage ? sched.stages.front().iterations : 0;
  if (iter < start) return sched.base_lr;
  const std::int64_t span = total - start - 1;
  if (span <= 0) return sched.base_lr;
  const double t = static_cast<double>(iter - start) / static_cast<double>(span);
  return sched.final_lr +
         (sched.base_lr - sched.final_lr) * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

}  // namespace hevs
