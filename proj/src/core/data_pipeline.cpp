#include "hevs/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hevs/error.hpp"

namespace hevs {
namespace {

void check_prob(double p, const char* name) {
  require(p >= 0.0 && p <= 1.0, ErrorCode::Config,
          std::string(name) + " must lie in [0,1], got " + std::to_string(p));
}

void check_same_dims(int h1, int w1, int h2, int w2, const char* what) {
  require(h1 == h2 && w1 == w2, ErrorCode::Shape,
          std::string(what) + ": " + std::to_string(h1) + "x" + std::to_string(w1) + " vs " +
              std::to_string(h2) + "x" + std::to_string(w2));
}

}  // namespace

void AugmentConfig::validate() const {
  check_prob(flip_h_prob, "flip_h_prob");
  check_prob(flip_v_prob, "flip_v_prob");
  check_prob(rot90_prob, "rot90_prob");
  check_prob(defect_overlay_prob, "defect_overlay_prob");
  require(synthetic_defect_density >= 0.0 && synthetic_defect_density <= 0.05, ErrorCode::Config,
          "synthetic_defect_density must lie in [0,0.05]");
}

void DefectLibrary::validate(const PatternSpec& pattern) const {
  require(maps.size() == source_ids.size(), ErrorCode::Config,
          "defect library has mismatched map/id counts");
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const DefectMap& m = maps[i];
    for (int r = 0; r < m.height; ++r)
      for (int c = 0; c < m.width; ++c)
        require(!(m.at(r, c) && pattern.is_event(r, c)), ErrorCode::Config,
                "defect map '" + source_ids[i] + "' marks event position (" + std::to_string(r) +
                    "," + std::to_string(c) + ")");
  }
}

std::string GeometricTransform::describe() const {
  std::ostringstream os;
  os << "flip_h=" << flip_h << ",flip_v=" << flip_v << ",rot=" << quarter_turns * 90;
  return os.str();
}

std::string SynthesisRecord::describe() const {
  std::ostringstream os;
  os << transform.describe() << ",defects=";
  if (!defects_applied) {
    os << "none";
  } else {
    os << (library_index >= 0 ? "lib" + std::to_string(library_index) : std::string("synthetic"))
       << ":" << defect_count;
  }
  return os.str();
}

DefectMap extract_defect_map(const RawImage& raw, const RgbImage& gt, const PatternSpec& pattern,
                             double tau) {
  check_same_dims(raw.height, raw.width, gt.height, gt.width, "extract_defect_map");
  const RawImage clean = mosaic(gt, pattern);
  DefectMap map(raw.height, raw.width);
  for (int r = 0; r < raw.height; ++r)
    for (int c = 0; c < raw.width; ++c) {
      if (pattern.is_event(r, c)) continue;
      const double diff = std::abs(static_cast<double>(raw.at(r, c)) - clean.at(r, c)) / kRawMax;
      if (diff > tau) map.set(r, c, true);
    }
  return map;
}

RawImage inject_defects(const RawImage& raw, const DefectMap& map, Rng& rng,
                        const DefectValueModel& model) {
  check_same_dims(raw.height, raw.width, map.height, map.width, "inject_defects");
  RawImage out = raw;
  for (int r = 0; r < raw.height; ++r)
    for (int c = 0; c < raw.width; ++c) {
      if (!map.at(r, c) || raw.pattern.is_event(r, c)) continue;
      if (bernoulli(rng, model.stuck_prob)) {
        out.at(r, c) = bernoulli(rng, 0.5) ? kRawMax : 0;
      } else {
        out.at(r, c) = static_cast<std::uint16_t>(uniform_index(rng, kRawMax + 1));
      }
    }
  return out;
}

DefectMap synthetic_defect_map(int height, int width, const PatternSpec& pattern, double density,
                               Rng& rng) {
  DefectMap map(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const bool hit = bernoulli(rng, density);
      if (hit && !pattern.is_event(r, c)) map.set(r, c, true);
    }
  return map;
}

DefectMap fit_defect_map(const DefectMap& map, int height, int width, Rng& rng) {
  require(map.height > 0 && map.width > 0 && map.height % 4 == 0 && map.width % 4 == 0,
          ErrorCode::Shape, "defect map dimensions must be positive multiples of 4");
  const int y0 = map.height > height
                     ? 4 * static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>((map.height - height) / 4 + 1)))
                     : 0;
  const int x0 = map.width > width
                     ? 4 * static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>((map.width - width) / 4 + 1)))
                     : 0;
  DefectMap out(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) out.set(r, c, map.at((y0 + r) % map.height, (x0 + c) % map.width));
  return out;
}

RgbImage apply_transform(const RgbImage& img, const GeometricTransform& t) {
  RgbImage cur = img;
  if (t.flip_h || t.flip_v) {
    RgbImage flipped(cur.height, cur.width);
    for (int r = 0; r < cur.height; ++r)
      for (int c = 0; c < cur.width; ++c) {
        const int sr = t.flip_v ? cur.height - 1 - r : r;
        const int sc = t.flip_h ? cur.width - 1 - c : c;
        for (int ch = 0; ch < 3; ++ch) flipped.at(r, c, ch) = cur.at(sr, sc, ch);
      }
    cur = std::move(flipped);
  }
  for (int k = 0; k < (t.quarter_turns % 4 + 4) % 4; ++k) {
    RgbImage rot(cur.width, cur.height);
    for (int r = 0; r < rot.height; ++r)
      for (int c = 0; c < rot.width; ++c)
        for (int ch = 0; ch < 3; ++ch) rot.at(r, c, ch) = cur.at(c, cur.width - 1 - r, ch);
    cur = std::move(rot);
  }
  return cur;
}

SamplePair synthesize_pair(const RgbImage& gt, const AugmentConfig& cfg, const DefectLibrary& lib,
                           const PatternSpec& pattern, Rng& rng, SynthesisRecord* record) {
  cfg.validate();
  require(!(cfg.defect_source == DefectSource::Harvested && lib.empty()), ErrorCode::Config,
          "harvested defect source selected but the defect library is empty");
  require(gt.height % 4 == 0 && gt.width % 4 == 0, ErrorCode::Precondition,
          "ground truth dims not multiple of 4");

  SynthesisRecord rec;
  rec.transform.flip_h = bernoulli(rng, cfg.flip_h_prob);
  rec.transform.flip_v = bernoulli(rng, cfg.flip_v_prob);
  const bool rotate = bernoulli(rng, cfg.rot90_prob);
  const int turns = 1 + static_cast<int>(uniform_index(rng, 3));
  rec.transform.quarter_turns = rotate ? turns : 0;

  SamplePair pair;
  pair.target = apply_transform(gt, rec.transform);
  pair.input = mosaic(pair.target, pattern);

  if (bernoulli(rng, cfg.defect_overlay_prob)) {
    DefectMap map;
    if (cfg.defect_source == DefectSource::Harvested) {
      rec.library_index = static_cast<int>(uniform_index(rng, lib.maps.size()));
      map = fit_defect_map(lib.maps[static_cast<std::size_t>(rec.library_index)],
                           pair.target.height, pair.target.width, rng);
    } else {
      map = synthetic_defect_map(pair.target.height, pair.target.width, pattern,
                                 cfg.synthetic_defect_density, rng);
    }
    rec.defects_applied = true;
    rec.defect_count = map.count();
    pair.input = inject_defects(pair.input, map, rng);
    if (record) rec.defects = std::move(map);
  }
  if (record) *record = std::move(rec);
  return pair;
}

SamplePair crop_aligned_patch(const SamplePair& pair, int size, Rng& rng) {
  const int h = pair.target.height;
  const int w = pair.target.width;
  check_same_dims(pair.input.height, pair.input.width, h, w, "crop_aligned_patch");
  require(size > 0 && size % 4 == 0, ErrorCode::Bounds,
          "patch size " + std::to_string(size) + " is not a positive multiple of 4");
  require(size <= std::min(h, w), ErrorCode::Bounds,
          "patch size " + std::to_string(size) + " exceeds image " + std::to_string(h) + "x" +
              std::to_string(w));
  const int y0 = 4 * static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>((h - size) / 4 + 1)));
  const int x0 = 4 * static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>((w - size) / 4 + 1)));

  SamplePair out;
  out.input = RawImage(size, size, pair.input.pattern);
  out.target = RgbImage(size, size);
  for (int r = 0; r < size; ++r) {
    std::copy_n(&pair.input.values[static_cast<std::size_t>(y0 + r) * w + x0], size,
                &out.input.values[static_cast<std::size_t>(r) * size]);
    std::copy_n(&pair.target.values[(static_cast<std::size_t>(y0 + r) * w + x0) * 3], size * 3,
                &out.target.values[static_cast<std::size_t>(r) * size * 3]);
  }
  return out;
}

DefectLibrary Dataset::harvest(const PatternSpec& pattern, double tau) const {
  DefectLibrary lib;
  for (const DatasetItem& item : items) {
    if (item.defects) {
      lib.maps.push_back(*item.defects);
    } else if (item.raw) {
      lib.maps.push_back(extract_defect_map(*item.raw, item.gt, pattern, tau));
    } else {
      continue;
    }
    lib.source_ids.push_back(item.id);
  }
  return lib;
}

Dataset load_dataset(const std::filesystem::path& dir, const PatternSpec& pattern) {
  namespace fs = std::filesystem;
  const fs::path gt_dir = dir / "gt";
  require(fs::is_directory(gt_dir), ErrorCode::Io, "dataset has no gt/ directory: " + dir.string());
  std::vector<fs::path> pngs;
  for (const auto& entry : fs::directory_iterator(gt_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png") pngs.push_back(entry.path());
  std::sort(pngs.begin(), pngs.end());

  Dataset ds;
  for (const fs::path& png : pngs) {
    DatasetItem item;
    item.id = png.stem().string();
    item.gt = read_png(png);
    const fs::path raw = dir / "raw" / (item.id + ".bin");
    if (fs::exists(raw)) {
      item.raw = read_raw_bin(raw, pattern);
      check_same_dims(item.raw->height, item.raw->width, item.gt.height, item.gt.width,
                      ("dataset item " + item.id).c_str());
    }
    const fs::path def = dir / "defects" / (item.id + ".defect");
    if (fs::exists(def)) item.defects = read_defect_map(def);
    ds.items.push_back(std::move(item));
  }
  return ds;
}

}  // namespace hevs
