#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hevs {

// Key -> tensor container with a free-form config snapshot. Model parameters
// use their module paths ("coarse.rrg0.dab1.body1.weight"); training state
// lives under the reserved prefixes "optim.", "ema." and "state.".
//
// File layout (little-endian):
//   "HCKP" u32 version
//   u64 snapshot_len, snapshot bytes
//   u32 entry_count, then per entry:
//     u32 key_len, key, u8 dtype (0 f32, 1 f64, 2 i64), u32 ndim, i64 dims[ndim],
//     u64 byte_len, raw data
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string config_snapshot;
  std::map<std::string, torch::Tensor> tensors;

  bool contains(const std::string& key) const { return tensors.count(key) != 0; }
  const torch::Tensor& at(const std::string& key) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

bool is_reserved_key(const std::string& key);

// Copies parameters and buffers of module under prefix.
void add_module_state(Checkpoint& ckpt, const torch::nn::Module& module,
                      const std::string& prefix = "");

struct LoadReport {
  std::vector<std::string> missing;
  std::vector<std::string> unexpected;
  std::vector<std::string> mismatched;  // present on both sides with different shapes
  std::size_t loaded = 0;

  bool clean() const { return missing.empty() && unexpected.empty() && mismatched.empty(); }
  std::string describe() const;
};

// Loads matching keys. strict=true throws Error(KeyMismatch) naming every
// missing, unexpected or mismatched key; strict=false loads the intersection
// (shape-compatible keys only) and reports the rest.
LoadReport load_module_state(torch::nn::Module& module, const Checkpoint& ckpt, bool strict,
                             const std::string& prefix = "");

}  // namespace hevs
