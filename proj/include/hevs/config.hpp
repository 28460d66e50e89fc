#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hevs/model.hpp"
#include "hevs/pattern.hpp"
#include "hevs/training.hpp"

namespace hevs {

// Nested key/value configuration. Text form:
//
//   # comment
//   @include other.cfg          (relative to the including file)
//   [model.coarse]
//   channels = 64
//
// Keys are "section.sub.key". Every key must exist in the built-in schema;
// anything else is a configuration error.
class Config {
 public:
  // Schema defaults. run.device defaults to $HEVS_DEVICE when set.
  Config();

  static Config from_file(const std::filesystem::path& path);

  void load_file(const std::filesystem::path& path);
  void parse_text(const std::string& text, const std::filesystem::path& base_dir = ".");
  // "key.path=value"
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& str(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::filesystem::path path(const std::string& key) const { return str(key); }
  std::vector<std::string> list(const std::string& key) const;  // comma separated

  // Canonical text form, sections in schema order. Parsing it back gives an
  // equal Config.
  std::string dump() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void parse_stream(std::istream& in, const std::filesystem::path& base_dir, int depth,
                    const std::string& origin);
  std::map<std::string, std::string> values_;
};

PatternSpec pattern_from(const Config& cfg);
DemosaicFormerConfig model_from(const Config& cfg);
AugmentConfig augment_from(const Config& cfg);

// Run config for the "train" or "finetune" section.
RunConfig run_config_from(const Config& cfg, const std::string& section);

}  // namespace hevs
