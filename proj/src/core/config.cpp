#include "hevs/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hevs/error.hpp"

namespace hevs {
namespace {

using Entry = std::pair<const char*, const char*>;

// Every accepted key with its default. Order defines dump() layout.
const std::vector<Entry>& schema() {
  static const std::vector<Entry> s = {
      {"run.seed", "0"},
      {"run.device", "cpu"},
      {"run.overwrite", "false"},
      {"run.verbose", "false"},
      {"run.deterministic", "true"},

      {"pattern.tile", "RRGGREGGGGEBGGBB"},
      {"pattern.event1", "1,1"},
      {"pattern.event2", "2,2"},

      {"data.gt_dir", ""},
      {"data.synth_dir", ""},
      {"data.train_dir", ""},
      {"data.val_dir", ""},
      {"data.harvest_tau", "0.02"},

      {"augment.enabled", "true"},
      {"augment.flip_h_prob", "0.5"},
      {"augment.flip_v_prob", "0.5"},
      {"augment.rot90_prob", "0.5"},
      {"augment.defect_overlay_prob", "1.0"},
      {"augment.defect_source", "synthetic"},
      {"augment.synthetic_defect_density", "0.002"},

      {"model.order", "coarse_first"},
      {"model.fusion", "msgm"},
      {"model.pad_multiple", "8"},
      {"model.init", "residual_zero"},
      {"model.coarse.channels", "64"},
      {"model.coarse.rrgs", "4"},
      {"model.coarse.dabs", "8"},
      {"model.coarse.ca_reduction", "8"},
      {"model.coarse.sa_kernel", "7"},
      {"model.correction.dim", "48"},
      {"model.correction.blocks", "4,6,6,8"},
      {"model.correction.refinement_blocks", "4"},
      {"model.correction.heads", "1,2,4,8"},
      {"model.correction.ffn_expansion", "2.66"},
      {"model.correction.sequential_gates", "false"},

      {"schedule.stages", "80x84x58000,128x30x36000,160x18x24000,192x12x24000"},
      {"schedule.base_lr", "5e-4"},
      {"schedule.final_lr", "1e-7"},
      {"schedule.flat_first_stage", "true"},

      {"train.output_dir", ""},
      {"train.mode", "C"},
      {"train.stage1_loss_weight", "0.5"},
      {"train.mode_a_fraction", "0.3"},
      {"train.beta1", "0.9"},
      {"train.beta2", "0.99"},
      {"train.eps", "1e-8"},
      {"train.weight_decay", "0"},
      {"train.grad_clip", "1.0"},
      {"train.ema", "false"},
      {"train.ema_decay", "0.999"},
      {"train.val_every", "2000"},
      {"train.ckpt_every", "2000"},
      {"train.stop_after", "-1"},
      {"train.resume", ""},
      {"train.init_checkpoint", ""},

      {"finetune.init", ""},
      {"finetune.output_dir", ""},
      {"finetune.stages", "192x12x20000"},
      {"finetune.base_lr", "1e-4"},
      {"finetune.final_lr", "1e-7"},
      {"finetune.ema_decay", "0.999"},
      {"finetune.val_every", "2000"},
      {"finetune.ckpt_every", "2000"},
      {"finetune.stop_after", "-1"},
      {"finetune.resume", ""},

      {"infer.checkpoint", ""},
      {"infer.raw_dir", ""},
      {"infer.out_dir", ""},
      {"infer.baseline", "none"},
      {"infer.model_from_checkpoint", "true"},
      {"infer.tile_threshold", "1024"},
      {"infer.tile", "512"},
      {"infer.overlap", "32"},

      {"eval.pred_dir", ""},
      {"eval.gt_dir", ""},
      {"eval.report", ""},
      {"eval.write_residuals", "false"},
      {"eval.residual_gain", "10"},

      {"ablate.variants",
       "coarse_first/msgm,correct_first/msgm,parallel/msgm,"
       "coarse_first/simple_concat,correct_first/simple_concat,parallel/simple_concat"},
      {"ablate.seeds", "0,1,2"},
      {"ablate.iterations", "2000"},
      {"ablate.patch", "64"},
      {"ablate.batch", "4"},
      {"ablate.out", ""},

      {"report.inputs", ""},
      {"report.names", ""},
      {"report.out", ""},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string section_of(const std::string& key) {
  const auto dot = key.rfind('.');
  return dot == std::string::npos ? "" : key.substr(0, dot);
}

PatternSpec::Coord parse_coord(const std::string& key, const std::string& text) {
  const auto comma = text.find(',');
  require(comma != std::string::npos, ErrorCode::Config, key + ": expected 'row,col', got '" + text + "'");
  try {
    return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
  } catch (const std::exception&) {
    fail(ErrorCode::Config, key + ": expected 'row,col', got '" + text + "'");
  }
}

template <std::size_t N>
std::array<int, N> int_array(const Config& cfg, const std::string& key) {
  const auto items = cfg.list(key);
  require(items.size() == N, ErrorCode::Config,
          key + ": expected " + std::to_string(N) + " comma-separated integers");
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    try {
      std::size_t used = 0;
      out[i] = std::stoi(items[i], &used);
      require(used == items[i].size(), ErrorCode::Config, key + ": bad integer '" + items[i] + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::Config, key + ": bad integer '" + items[i] + "'");
    }
  }
  return out;
}

}  // namespace

Config::Config() {
  for (const auto& [k, v] : schema()) values_[k] = v;
  if (const char* dev = std::getenv("HEVS_DEVICE"); dev && *dev) values_["run.device"] = dev;
}

Config Config::from_file(const std::filesystem::path& path) {
  Config c;
  c.load_file(path);
  return c;
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open config " + path.string());
  parse_stream(in, path.parent_path(), 0, path.string());
}

void Config::parse_text(const std::string& text, const std::filesystem::path& base_dir) {
  std::istringstream in(text);
  parse_stream(in, base_dir, 0, "<text>");
}

void Config::parse_stream(std::istream& in, const std::filesystem::path& base_dir, int depth,
                          const std::string& origin) {
  require(depth < 16, ErrorCode::Config, "config includes nested too deeply at " + origin);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    // '#' starts a comment at line start or after whitespace.
    for (std::size_t i = 1; i < line.size(); ++i)
      if (line[i] == '#' && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
        line.resize(i);
        break;
      }
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("@include", 0) == 0) {
      const std::string target = trim(line.substr(8));
      require(!target.empty(), ErrorCode::Config, where + ": @include needs a path");
      std::filesystem::path p = target;
      if (p.is_relative()) p = base_dir / p;
      std::ifstream sub(p);
      require(static_cast<bool>(sub), ErrorCode::Io, where + ": cannot open included " + p.string());
      parse_stream(sub, p.parent_path(), depth + 1, p.string());
      continue;
    }
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::Config, where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::Config, where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorCode::Config, where + ": empty key");
    try {
      set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.code(), where + ": " + e.what());
    }
  }
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos, ErrorCode::Config,
          "override '" + assignment + "' is not of the form key.path=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::Config, "unknown config key '" + key + "'");
  it->second = value;
}

const std::string& Config::str(const std::string& key) const {
  auto it = values_.find(key);
  require(it != values_.end(), ErrorCode::Config, "unknown config key '" + key + "'");
  return it->second;
}

std::int64_t Config::integer(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::logic_error&) {
  }
  fail(ErrorCode::Config, key + ": expected an integer, got '" + v + "'");
}

double Config::real(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::logic_error&) {
  }
  fail(ErrorCode::Config, key + ": expected a number, got '" + v + "'");
}

bool Config::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(ErrorCode::Config, key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> Config::list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string Config::dump() const {
  std::ostringstream out;
  std::string current = "\x01";
  for (const auto& [k, def] : schema()) {
    const std::string key = k;
    const std::string sec = section_of(key);
    if (sec != current) {
      if (current != "\x01") out << '\n';
      out << '[' << sec << "]\n";
      current = sec;
    }
    out << key.substr(sec.size() + 1) << " = " << values_.at(key) << '\n';
  }
  return out.str();
}

PatternSpec pattern_from(const Config& cfg) {
  return PatternSpec::parse(cfg.str("pattern.tile"), parse_coord("pattern.event1", cfg.str("pattern.event1")),
                            parse_coord("pattern.event2", cfg.str("pattern.event2")));
}

DemosaicFormerConfig model_from(const Config& cfg) {
  DemosaicFormerConfig m;
  m.variant.order = parse_order(cfg.str("model.order"));
  m.variant.fusion = parse_fusion(cfg.str("model.fusion"));
  m.pad_multiple = static_cast<int>(cfg.integer("model.pad_multiple"));
  m.coarse.channels = static_cast<int>(cfg.integer("model.coarse.channels"));
  m.coarse.n_rrg = static_cast<int>(cfg.integer("model.coarse.rrgs"));
  m.coarse.n_dab = static_cast<int>(cfg.integer("model.coarse.dabs"));
  m.coarse.ca_reduction = static_cast<int>(cfg.integer("model.coarse.ca_reduction"));
  m.coarse.sa_kernel = static_cast<int>(cfg.integer("model.coarse.sa_kernel"));
  m.correction.base_dim = static_cast<int>(cfg.integer("model.correction.dim"));
  m.correction.blocks_per_level = int_array<4>(cfg, "model.correction.blocks");
  m.correction.refinement_blocks = static_cast<int>(cfg.integer("model.correction.refinement_blocks"));
  m.correction.heads_per_level = int_array<4>(cfg, "model.correction.heads");
  m.correction.ffn_expansion = cfg.real("model.correction.ffn_expansion");
  m.correction.sequential_gates = cfg.flag("model.correction.sequential_gates");
  m.correction.fusion = m.variant.fusion;
  m.validate();
  return m;
}

AugmentConfig augment_from(const Config& cfg) {
  AugmentConfig a;
  a.flip_h_prob = cfg.real("augment.flip_h_prob");
  a.flip_v_prob = cfg.real("augment.flip_v_prob");
  a.rot90_prob = cfg.real("augment.rot90_prob");
  a.defect_overlay_prob = cfg.real("augment.defect_overlay_prob");
  const std::string& src = cfg.str("augment.defect_source");
  if (src == "synthetic") a.defect_source = DefectSource::Synthetic;
  else if (src == "harvested") a.defect_source = DefectSource::Harvested;
  else fail(ErrorCode::Config, "augment.defect_source: expected synthetic or harvested, got '" + src + "'");
  a.synthetic_defect_density = cfg.real("augment.synthetic_defect_density");
  a.rng_seed = static_cast<std::uint64_t>(cfg.integer("run.seed"));
  a.validate();
  return a;
}

RunConfig run_config_from(const Config& cfg, const std::string& section) {
  require(section == "train" || section == "finetune", ErrorCode::Config,
          "unknown run section '" + section + "'");
  RunConfig rc;
  rc.model = model_from(cfg);
  rc.init = parse_init(cfg.str("model.init"));
  rc.pattern = pattern_from(cfg);
  rc.augment = augment_from(cfg);
  rc.augment_enabled = cfg.flag("augment.enabled");
  rc.harvest_tau = cfg.real("data.harvest_tau");
  rc.train_dir = cfg.path("data.train_dir");
  rc.val_dir = cfg.path("data.val_dir");
  rc.seed = static_cast<std::uint64_t>(cfg.integer("run.seed"));
  rc.deterministic = cfg.flag("run.deterministic");
  rc.verbose = cfg.flag("run.verbose");
  rc.mode.mode = parse_train_mode(cfg.str("train.mode"));
  rc.mode.stage1_loss_weight = cfg.real("train.stage1_loss_weight");
  rc.mode.mode_a_fraction = cfg.real("train.mode_a_fraction");
  rc.optim.beta1 = cfg.real("train.beta1");
  rc.optim.beta2 = cfg.real("train.beta2");
  rc.optim.eps = cfg.real("train.eps");
  rc.optim.weight_decay = cfg.real("train.weight_decay");
  rc.optim.grad_clip = cfg.real("train.grad_clip");
  rc.optim.seed = rc.seed;
  rc.config_snapshot = cfg.dump();

  if (section == "train") {
    rc.schedule.stages = ProgressiveSchedule::parse_stages(cfg.str("schedule.stages"));
    rc.schedule.base_lr = cfg.real("schedule.base_lr");
    rc.schedule.final_lr = cfg.real("schedule.final_lr");
    rc.schedule.flat_first_stage = cfg.flag("schedule.flat_first_stage");
    rc.ema.enabled = cfg.flag("train.ema");
    rc.ema.decay = cfg.real("train.ema_decay");
    rc.output_dir = cfg.path("train.output_dir");
    rc.val_every = cfg.integer("train.val_every");
    rc.ckpt_every = cfg.integer("train.ckpt_every");
    rc.stop_after = cfg.integer("train.stop_after");
    rc.resume = cfg.path("train.resume");
    rc.init_checkpoint = cfg.path("train.init_checkpoint");
  } else {
    rc.schedule = ProgressiveSchedule::fine_tuning();
    rc.schedule.stages = ProgressiveSchedule::parse_stages(cfg.str("finetune.stages"));
    rc.schedule.base_lr = cfg.real("finetune.base_lr");
    rc.schedule.final_lr = cfg.real("finetune.final_lr");
    rc.mode.mode = TrainMode::Joint;
    rc.ema.enabled = true;
    rc.ema.decay = cfg.real("finetune.ema_decay");
    rc.augment_enabled = false;
    rc.output_dir = cfg.path("finetune.output_dir");
    rc.val_every = cfg.integer("finetune.val_every");
    rc.ckpt_every = cfg.integer("finetune.ckpt_every");
    rc.stop_after = cfg.integer("finetune.stop_after");
    rc.resume = cfg.path("finetune.resume");
    rc.init_checkpoint = cfg.path("finetune.init");
  }
  rc.schedule.validate();
  return rc;
}

}  // namespace hevs
