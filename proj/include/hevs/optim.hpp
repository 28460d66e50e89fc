#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hevs/checkpoint.hpp"

namespace hevs {

struct OptimConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip = 1.0;  // global-norm threshold; <= 0 disables clipping
  std::uint64_t seed = 0;

  void validate() const;
};

using NamedParams = std::vector<std::pair<std::string, torch::Tensor>>;

NamedParams named_params(const torch::nn::Module& module);

// Adam with L2 weight decay folded into the gradient. Moments and step counts
// are per parameter (a parameter without a gradient does not advance), keyed
// by name so they survive a checkpoint round trip.
class Adam {
 public:
  Adam(NamedParams params, const OptimConfig& cfg);

  void zero_grad();
  void step(double lr);

  std::int64_t steps(std::size_t param_index) const { return steps_[param_index]; }
  const NamedParams& params() const { return params_; }

  void save(Checkpoint& ckpt) const;  // under "optim."
  void load(const Checkpoint& ckpt);

 private:
  NamedParams params_;
  std::vector<torch::Tensor> m_, v_;
  std::vector<std::int64_t> steps_;
  OptimConfig cfg_;
};

// Scales gradients in place so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const NamedParams& params, double max_norm);

struct EmaState {
  NamedParams shadow;
  double decay = 0.999;

  static EmaState from_params(const NamedParams& params, double decay);

  void save(Checkpoint& ckpt) const;  // under "ema."
  void load(const Checkpoint& ckpt);
  // Copies shadow values into params (matched by name).
  void copy_to(const NamedParams& params) const;
};

// shadow <- decay * shadow + (1 - decay) * params.
EmaState ema_update(EmaState state, const NamedParams& params);
void ema_update_inplace(EmaState& state, const NamedParams& params);

}  // namespace hevs
