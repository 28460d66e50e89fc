#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hevs/image.hpp"

namespace hevs {

inline constexpr double kPsnrCap = 100.0;

// PSNR in dB after quantizing both images to 8 bits; identical images give
// kPsnrCap.
double psnr(const RgbImage& pred, const RgbImage& gt);

// Mean SSIM over the three channels (11x11 Gaussian window, sigma 1.5,
// K1 = 0.01, K2 = 0.03, data range 1), evaluated on the 8-bit quantized
// images over the valid region.
double ssim(const RgbImage& pred, const RgbImage& gt);

// Per-pixel mean over channels of |pred - gt|, times gain, clamped to [0,1].
std::vector<float> residual_map(const RgbImage& pred, const RgbImage& gt, double gain);

enum class BaselineKind { BilinearDemosaic, NearestFill };

BaselineKind parse_baseline(const std::string& s);

// Per-channel normalized bilinear interpolation over same-color samples only.
// Measured samples are kept; event pixels carry no sample.
RgbImage bilinear_baseline(const RawImage& raw);
RgbImage nearest_fill_baseline(const RawImage& raw);
RgbImage run_baseline(BaselineKind kind, const RawImage& raw);

struct ImageMetrics {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<ImageMetrics> per_image;
  double mean_psnr_db = 0.0;
  double mean_ssim = 0.0;
  std::string config_snapshot;

  void add(ImageMetrics m) { per_image.push_back(std::move(m)); }
  // Sorts by id and recomputes the aggregate means.
  void finalize();
  std::string summary() const;
};

// Pairs <id>.png files in pred_dir and gt_dir (residual maps are skipped).
MetricReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                          const std::string& config_snapshot = "");

// Writes <path> as "id\tpsnr\tssim" rows and <path>.summary.txt beside it.
void write_report(const MetricReport& report, const std::filesystem::path& path);

}  // namespace hevs
