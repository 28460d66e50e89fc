#pragma once

#include <torch/torch.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "hevs/image.hpp"
#include "hevs/random.hpp"

namespace hevs::testing {

// Smooth colored test image: a few random sinusoids plus a random edge, in
// [0.05, 0.95].
inline RgbImage smooth_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img(h, w);
  double fr[3][2], fc[3][2], ph[3][2];
  for (int ch = 0; ch < 3; ++ch)
    for (int k = 0; k < 2; ++k) {
      fr[ch][k] = 0.02 + 0.2 * uniform01(rng);
      fc[ch][k] = 0.02 + 0.2 * uniform01(rng);
      ph[ch][k] = 6.283 * uniform01(rng);
    }
  const double ex = uniform01(rng) * w, slope = uniform01(rng) - 0.5, step = 0.3 * uniform01(rng);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const double edge = (c > ex + slope * r) ? step : 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        double v = 0.45 + edge;
        for (int k = 0; k < 2; ++k) v += 0.12 * std::sin(fr[ch][k] * r + fc[ch][k] * c + ph[ch][k]);
        img.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.05, 0.95));
      }
    }
  return img;
}

inline RgbImage noise_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img(h, w);
  for (float& v : img.values) v = static_cast<float>(uniform01(rng));
  return img;
}

inline RawImage random_raw(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  RawImage raw(h, w);
  for (auto& v : raw.values) v = static_cast<std::uint16_t>(uniform_index(rng, 1024));
  return raw;
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hevs_" + tag + "_" + std::to_string(rd()) + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// Writes n smooth GT images of size h x w as <dir>/gt/img_XX.png.
inline void write_gt_set(const std::filesystem::path& dir, int n, int h, int w, std::uint64_t seed) {
  std::filesystem::create_directories(dir / "gt");
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "img_%02d.png", i);
    write_png(smooth_image(h, w, derive_seed(seed, 99, static_cast<std::uint64_t>(i))), dir / "gt" / name);
  }
}

struct GradCheckResult {
  double max_rel_error = 0.0;  // worst over input and every parameter tensor
  std::string worst;
};

// Central-difference check of d(sum(probe * f(x)))/d(x, params) in double.
// The probe is a fixed random weighting so every output element contributes.
// Relative error is norm-wise per tensor: |g_a - g_n| / max(|g_n|, 1e-8).
inline GradCheckResult gradcheck(torch::nn::Module& module,
                                 const std::function<torch::Tensor(const torch::Tensor&)>& f,
                                 torch::Tensor x, std::uint64_t seed, double step = 1e-5) {
  module.to(torch::kDouble);
  x = x.to(torch::kDouble).detach().requires_grad_(true);
  torch::manual_seed(static_cast<std::uint64_t>(seed));
  const torch::Tensor probe = torch::randn_like(f(x).detach());
  auto objective = [&] { return (probe * f(x)).sum(); };

  for (auto& p : module.parameters()) p.mutable_grad() = torch::Tensor();
  objective().backward();

  GradCheckResult res;
  auto check = [&](torch::Tensor t, const torch::Tensor& analytic, const std::string& name) {
    torch::NoGradGuard ng;
    auto flat = t.view(-1);
    torch::Tensor numeric = torch::zeros_like(flat);
    for (int64_t i = 0; i < flat.numel(); ++i) {
      const double orig = flat[i].item<double>();
      flat[i].fill_(orig + step);
      const double fp = objective().item<double>();
      flat[i].fill_(orig - step);
      const double fm = objective().item<double>();
      flat[i].fill_(orig);
      numeric[i] = (fp - fm) / (2 * step);
    }
    const torch::Tensor a = analytic.defined() ? analytic.reshape(-1) : torch::zeros_like(numeric);
    const double err = (a - numeric).norm().item<double>() /
                       std::max(numeric.norm().item<double>(), 1e-8);
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst = name;
    }
  };
  check(x.detach(), x.grad(), "input");
  for (auto& item : module.named_parameters()) check(item.value().detach(), item.value().grad(), item.key());
  return res;
}

}  // namespace hevs::testing
