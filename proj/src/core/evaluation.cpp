#include "hevs/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "hevs/error.hpp"

namespace hevs {
namespace {

void check_same_shape(const RgbImage& a, const RgbImage& b, const char* what) {
  require(a.height == b.height && a.width == b.width, ErrorCode::Shape,
          std::string(what) + ": shape mismatch " + std::to_string(a.height) + "x" +
              std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
              std::to_string(b.width));
}

int level8(float v) { return static_cast<int>(std::lround(quantize8(v) * 255.0f)); }

std::array<double, 11> gaussian_window() {
  std::array<double, 11> w{};
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (double& x : w) x /= sum;
  return w;
}

// Separable valid-mode filter of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::array<double, 11>& k) {
  const int oh = h - 10;
  const int ow = w - 10;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int i = 0; i < 11; ++i) s += k[static_cast<std::size_t>(i)] * img[static_cast<std::size_t>(r) * w + c + i];
      tmp[static_cast<std::size_t>(r) * ow + c] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int i = 0; i < 11; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(r + i) * ow + c];
      out[static_cast<std::size_t>(r) * ow + c] = s;
    }
  return out;
}

double ssim_plane(const std::vector<double>& x, const std::vector<double>& y, int h, int w) {
  static const auto k = gaussian_window();
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, h, w, k);
  const auto my = filter_valid(y, h, w, k);
  const auto fxx = filter_valid(xx, h, w, k);
  const auto fyy = filter_valid(yy, h, w, k);
  const auto fxy = filter_valid(xy, h, w, k);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double sxx = fxx[i] - mx[i] * mx[i];
    const double syy = fyy[i] - my[i] * my[i];
    const double sxy = fxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * sxy + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (sxx + syy + c2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace

double psnr(const RgbImage& pred, const RgbImage& gt) {
  check_same_shape(pred, gt, "psnr");
  require(!pred.values.empty(), ErrorCode::Shape, "psnr of empty images");
  std::uint64_t sq = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const std::int64_t d = level8(pred.values[i]) - level8(gt.values[i]);
    sq += static_cast<std::uint64_t>(d * d);
  }
  if (sq == 0) return kPsnrCap;
  const double mse = static_cast<double>(sq) / static_cast<double>(pred.values.size()) / (255.0 * 255.0);
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const RgbImage& pred, const RgbImage& gt) {
  check_same_shape(pred, gt, "ssim");
  require(pred.height >= 11 && pred.width >= 11, ErrorCode::Shape,
          "ssim needs images of at least 11x11, got " + std::to_string(pred.height) + "x" +
              std::to_string(pred.width));
  const std::size_t n = static_cast<std::size_t>(pred.height) * pred.width;
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = level8(pred.values[i * 3 + ch]) / 255.0;
      y[i] = level8(gt.values[i * 3 + ch]) / 255.0;
    }
    total += ssim_plane(x, y, pred.height, pred.width);
  }
  return total / 3.0;
}

std::vector<float> residual_map(const RgbImage& pred, const RgbImage& gt, double gain) {
  check_same_shape(pred, gt, "residual_map");
  std::vector<float> out(static_cast<std::size_t>(pred.height) * pred.width);
  for (std::size_t px = 0; px < out.size(); ++px) {
    double s = 0.0;
    for (int ch = 0; ch < 3; ++ch)
      s += std::abs(static_cast<double>(pred.values[px * 3 + ch]) - gt.values[px * 3 + ch]);
    out[px] = static_cast<float>(std::clamp(s / 3.0 * gain, 0.0, 1.0));
  }
  return out;
}

BaselineKind parse_baseline(const std::string& s) {
  if (s == "bilinear_demosaic" || s == "bilinear") return BaselineKind::BilinearDemosaic;
  if (s == "nearest_fill" || s == "nearest") return BaselineKind::NearestFill;
  fail(ErrorCode::Config, "unknown baseline '" + s + "' (bilinear_demosaic, nearest_fill)");
}

RgbImage bilinear_baseline(const RawImage& raw) {
  raw.validate();
  RgbImage out(raw.height, raw.width);
  for (int r = 0; r < raw.height; ++r)
    for (int c = 0; c < raw.width; ++c) {
      const int own = channel_of(raw.pattern.at(r, c));
      for (int ch = 0; ch < 3; ++ch) {
        if (ch == own) {
          out.at(r, c, ch) = static_cast<float>(raw.at(r, c)) / kRawMax;
          continue;
        }
        // Tent weights (R - |dy|)(R - |dx|); R = 4 reaches a sample of every
        // color from any position of the 4x4 tile, R grows only as a fallback.
        for (int radius = 4;; radius *= 2) {
          double num = 0.0, den = 0.0;
          for (int dy = -radius + 1; dy < radius; ++dy) {
            const int y = r + dy;
            if (y < 0 || y >= raw.height) continue;
            for (int dx = -radius + 1; dx < radius; ++dx) {
              const int x = c + dx;
              if (x < 0 || x >= raw.width || channel_of(raw.pattern.at(y, x)) != ch) continue;
              const double w = static_cast<double>((radius - std::abs(dy)) * (radius - std::abs(dx)));
              num += w * raw.at(y, x);
              den += w;
            }
          }
          if (den > 0.0) {
            out.at(r, c, ch) = static_cast<float>(num / den) / kRawMax;
            break;
          }
          require(radius < 4 * std::max(raw.height, raw.width), ErrorCode::Precondition,
                  "no sample of channel " + std::to_string(ch) + " in raw image");
        }
      }
    }
  return out;
}

RgbImage nearest_fill_baseline(const RawImage& raw) {
  raw.validate();
  RgbImage out(raw.height, raw.width);
  for (int r = 0; r < raw.height; ++r)
    for (int c = 0; c < raw.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        // Nearest same-color sample by Chebyshev ring, then squared distance,
        // then scan order.
        bool found = false;
        for (int rad = 0; !found && rad < std::max(raw.height, raw.width); ++rad) {
          int best = -1;
          long best_d = 0;
          for (int dy = -rad; dy <= rad; ++dy)
            for (int dx = -rad; dx <= rad; ++dx) {
              if (std::max(std::abs(dy), std::abs(dx)) != rad) continue;
              const int y = r + dy, x = c + dx;
              if (y < 0 || y >= raw.height || x < 0 || x >= raw.width) continue;
              if (channel_of(raw.pattern.at(y, x)) != ch) continue;
              const long d = static_cast<long>(dy) * dy + static_cast<long>(dx) * dx;
              if (best < 0 || d < best_d) {
                best = raw.at(y, x);
                best_d = d;
              }
            }
          if (best >= 0) {
            out.at(r, c, ch) = static_cast<float>(best) / kRawMax;
            found = true;
          }
        }
      }
  return out;
}

RgbImage run_baseline(BaselineKind kind, const RawImage& raw) {
  return kind == BaselineKind::BilinearDemosaic ? bilinear_baseline(raw) : nearest_fill_baseline(raw);
}

void MetricReport::finalize() {
  std::sort(per_image.begin(), per_image.end(),
            [](const ImageMetrics& a, const ImageMetrics& b) { return a.id < b.id; });
  double sp = 0.0, ss = 0.0;
  for (const auto& m : per_image) {
    sp += m.psnr_db;
    ss += m.ssim;
  }
  const double n = per_image.empty() ? 1.0 : static_cast<double>(per_image.size());
  mean_psnr_db = sp / n;
  mean_ssim = ss / n;
}

std::string MetricReport::summary() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "images: " << per_image.size() << "\n";
  os << "mean PSNR: " << mean_psnr_db << " dB\n";
  os << "mean SSIM: " << mean_ssim << "\n";
  if (!config_snapshot.empty()) os << "config: " << config_snapshot << "\n";
  return os.str();
}

MetricReport evaluate_dir(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                          const std::string& config_snapshot) {
  namespace fs = std::filesystem;
  auto list = [](const fs::path& dir) {
    require(fs::is_directory(dir), ErrorCode::Io, "not a directory: " + dir.string());
    std::map<std::string, fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (!e.is_regular_file() || e.path().extension() != ".png") continue;
      if (name.size() > 13 && name.ends_with(".residual.png")) continue;
      files.emplace(e.path().stem().string(), e.path());
    }
    return files;
  };
  const auto preds = list(pred_dir);
  const auto gts = list(gt_dir);
  require(!(preds.empty() && gts.empty()), ErrorCode::EmptyReport,
          "no images in " + pred_dir.string() + " or " + gt_dir.string());
  for (const auto& [id, p] : preds)
    require(gts.count(id) != 0, ErrorCode::Pairing, "prediction '" + id + "' has no ground truth");
  for (const auto& [id, p] : gts)
    require(preds.count(id) != 0, ErrorCode::Pairing, "ground truth '" + id + "' has no prediction");

  MetricReport report;
  report.config_snapshot = config_snapshot;
  for (const auto& [id, path] : preds) {
    const RgbImage pred = read_png(path);
    const RgbImage gt = read_png(gts.at(id));
    report.add({id, psnr(pred, gt), ssim(pred, gt)});
  }
  report.finalize();
  return report;
}

void write_report(const MetricReport& report, const std::filesystem::path& path) {
  {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    out << "id\tpsnr\tssim\n" << std::fixed << std::setprecision(6);
    for (const auto& m : report.per_image) out << m.id << '\t' << m.psnr_db << '\t' << m.ssim << '\n';
  }
  std::ofstream summary(path.string() + ".summary.txt");
  require(static_cast<bool>(summary), ErrorCode::Io, "cannot write summary for " + path.string());
  summary << report.summary();
}

}  // namespace hevs
