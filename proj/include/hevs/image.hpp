#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hevs/pattern.hpp"

namespace hevs {

inline constexpr int kRawBitDepth = 10;
inline constexpr std::uint16_t kRawMax = 1023;

// Single-channel 10-bit mosaic. Dimensions are multiples of the 4x4 tile.
struct RawImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint16_t> values;  // row-major
  PatternSpec pattern;

  RawImage() = default;
  RawImage(int h, int w, PatternSpec p = {});

  std::uint16_t& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  std::uint16_t at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }

  // Throws Precondition on bad dims and Range on out-of-range samples.
  void validate() const;

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

// H x W x 3 interleaved, nominally in [0, 1].
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  RgbImage() = default;
  RgbImage(int h, int w, float fill = 0.0f);

  float& at(int r, int c, int ch) { return values[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }
  float at(int r, int c, int ch) const { return values[(static_cast<std::size_t>(r) * width + c) * 3 + ch]; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct DefectMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> mask;  // 0 or 1, row-major

  DefectMap() = default;
  DefectMap(int h, int w);

  bool at(int r, int c) const { return mask[static_cast<std::size_t>(r) * width + c] != 0; }
  void set(int r, int c, bool v) { mask[static_cast<std::size_t>(r) * width + c] = v ? 1 : 0; }
  std::size_t count() const;

  friend bool operator==(const DefectMap&, const DefectMap&) = default;
};

// Channel-sparse placement of value/1023 into the sampled channel; the other
// channels and every event position stay zero.
RgbImage extend_to_rgb(const RawImage& raw);

// Samples rgb through the pattern with round(v * 1023); event positions get 0.
RawImage mosaic(const RgbImage& rgb, const PatternSpec& pattern);

float quantize8(float v) noexcept;       // round(clamp(v,0,1)*255)/255
RgbImage clamp01(RgbImage img);

// Raw container: "HEVS", u16 version, u32 height, u32 width, then u16 samples,
// all little-endian.
RawImage read_raw_bin(const std::filesystem::path& path, const PatternSpec& pattern = {});
void write_raw_bin(const RawImage& img, const std::filesystem::path& path);

// Same header with magic "HDEF"; one byte (0/1) per pixel.
DefectMap read_defect_map(const std::filesystem::path& path);
void write_defect_map(const DefectMap& map, const std::filesystem::path& path);

// 8-bit PNG. Gray and RGBA inputs are converted to RGB on read.
RgbImage read_png(const std::filesystem::path& path);
void write_png(const RgbImage& img, const std::filesystem::path& path);
void write_gray_png(const std::vector<float>& gray, int height, int width,
                    const std::filesystem::path& path);

}  // namespace hevs
