#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hevs/image.hpp"
#include "hevs/random.hpp"

namespace hevs {

enum class DefectSource { Harvested, Synthetic };

struct AugmentConfig {
  double flip_h_prob = 0.5;
  double flip_v_prob = 0.5;
  double rot90_prob = 0.5;
  double defect_overlay_prob = 1.0;
  DefectSource defect_source = DefectSource::Synthetic;
  double synthetic_defect_density = 0.002;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Value drawn at a defective position: with stuck_prob the pixel is stuck at
// 0 or 1023 (equal odds), otherwise uniform over [0, 1023].
struct DefectValueModel {
  double stuck_prob = 0.5;
};

struct DefectLibrary {
  std::vector<DefectMap> maps;
  std::vector<std::string> source_ids;

  bool empty() const { return maps.empty(); }
  // Every map must avoid the event positions of pattern.
  void validate(const PatternSpec& pattern) const;
};

struct SamplePair {
  RawImage input;
  RgbImage target;
};

struct GeometricTransform {
  bool flip_h = false;
  bool flip_v = false;
  int quarter_turns = 0;  // counter-clockwise, 0..3

  std::string describe() const;
};

struct SynthesisRecord {
  GeometricTransform transform;
  bool defects_applied = false;
  int library_index = -1;  // -1 when synthetic or not applied
  std::size_t defect_count = 0;
  DefectMap defects;  // the applied map; empty when none

  std::string describe() const;
};

inline constexpr double kDefaultHarvestTau = 0.02;

DefectMap extract_defect_map(const RawImage& raw, const RgbImage& gt, const PatternSpec& pattern,
                             double tau = kDefaultHarvestTau);

RawImage inject_defects(const RawImage& raw, const DefectMap& map, Rng& rng,
                        const DefectValueModel& model = {});

DefectMap synthetic_defect_map(int height, int width, const PatternSpec& pattern, double density,
                               Rng& rng);

// Aligned crop (or periodic tiling when smaller) of map to height x width.
// Offsets are multiples of 4 so event geometry is preserved.
DefectMap fit_defect_map(const DefectMap& map, int height, int width, Rng& rng);

RgbImage apply_transform(const RgbImage& img, const GeometricTransform& t);

SamplePair synthesize_pair(const RgbImage& gt, const AugmentConfig& cfg, const DefectLibrary& lib,
                           const PatternSpec& pattern, Rng& rng, SynthesisRecord* record = nullptr);

// Crop with top-left corner on multiples of 4 so the CFA phase is unchanged.
SamplePair crop_aligned_patch(const SamplePair& pair, int size, Rng& rng);

// On-disk dataset: gt/<id>.png, raw/<id>.bin, defects/<id>.defect (optional).
struct DatasetItem {
  std::string id;
  RgbImage gt;
  std::optional<RawImage> raw;
  std::optional<DefectMap> defects;
};

struct Dataset {
  std::vector<DatasetItem> items;

  // Harvested library: stored .defect maps where present, otherwise maps
  // extracted from raw/gt pairs.
  DefectLibrary harvest(const PatternSpec& pattern, double tau = kDefaultHarvestTau) const;
};

Dataset load_dataset(const std::filesystem::path& dir, const PatternSpec& pattern = {});

}  // namespace hevs
