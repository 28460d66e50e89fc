#include "hevs/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "hevs/checkpoint.hpp"
#include "hevs/error.hpp"

namespace hevs {
namespace fs = std::filesystem;
namespace {

constexpr std::uint64_t kStreamSynth = 3;

void check_device(const Config& cfg) {
  const std::string& dev = cfg.str("run.device");
  require(dev == "cpu", ErrorCode::Config,
          "device '" + dev + "' is not available; this build runs on cpu only");
}

const fs::path& need_path(const Config& cfg, const std::string& key, fs::path& storage) {
  storage = cfg.path(key);
  require(!storage.empty(), ErrorCode::Config, key + " must be set");
  return storage;
}

fs::path need(const Config& cfg, const std::string& key) {
  fs::path p;
  return need_path(cfg, key, p);
}

void refuse_clobber(const Config& cfg, const fs::path& p) {
  require(cfg.flag("run.overwrite") || !fs::exists(p), ErrorCode::Io,
          p.string() + " exists; pass --overwrite to replace it");
}

std::vector<fs::path> files_with_ext(const fs::path& dir, const std::string& ext) {
  require(fs::is_directory(dir), ErrorCode::Io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

int report_failures(const std::vector<std::pair<std::string, std::string>>& failures,
                    std::ostream& err) {
  for (const auto& [id, why] : failures) err << "failed: " << id << ": " << why << '\n';
  return failures.empty() ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slug(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c == '/' || c == '@') c = '_';
  return out;
}

}  // namespace

int run_synth(const Config& cfg, std::ostream& out, std::ostream& err) {
  check_device(cfg);
  const fs::path gt_dir = need(cfg, "data.gt_dir");
  const fs::path dst = need(cfg, "data.synth_dir");
  const PatternSpec pattern = pattern_from(cfg);
  const AugmentConfig aug = augment_from(cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("run.seed"));
  const auto inputs = files_with_ext(gt_dir, ".png");
  require(!inputs.empty(), ErrorCode::Io, "no PNG files in " + gt_dir.string());
  refuse_clobber(cfg, dst / "manifest.tsv");

  DefectLibrary lib;
  if (aug.defect_source == DefectSource::Harvested) {
    const fs::path src = need(cfg, "data.train_dir");
    lib = load_dataset(src, pattern).harvest(pattern, cfg.real("data.harvest_tau"));
    require(!lib.empty(), ErrorCode::Config,
            "harvested defect source selected but " + src.string() + " yields no defect maps");
  }

  for (const char* sub : {"gt", "raw", "defects"}) fs::create_directories(dst / sub);
  std::ostringstream manifest;
  manifest << "id\tseed\ttransform\tdefects\n";
  std::vector<std::pair<std::string, std::string>> failures;
  std::size_t written = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string id = inputs[i].stem().string();
    try {
      const RgbImage gt = read_png(inputs[i]);
      if (gt.height % 4 != 0 || gt.width % 4 != 0) {
        failures.emplace_back(id, "dims not multiple of 4 (" + std::to_string(gt.height) + "x" +
                                      std::to_string(gt.width) + ")");
        continue;
      }
      const std::uint64_t item_seed = derive_seed(seed, kStreamSynth, i);
      Rng rng(item_seed);
      SynthesisRecord rec;
      const SamplePair pair = synthesize_pair(gt, aug, lib, pattern, rng, &rec);
      write_png(pair.target, dst / "gt" / (id + ".png"));
      write_raw_bin(pair.input, dst / "raw" / (id + ".bin"));
      const DefectMap map = rec.defects_applied ? rec.defects : DefectMap(pair.target.height, pair.target.width);
      write_defect_map(map, dst / "defects" / (id + ".defect"));
      manifest << id << '\t' << item_seed << '\t' << rec.transform.describe() << '\t'
               << rec.defect_count << '\n';
      ++written;
    } catch (const std::exception& e) {
      failures.emplace_back(id, e.what());
    }
  }
  std::ofstream(dst / "manifest.tsv") << manifest.str();
  out << "synth: " << written << " pairs written to " << dst.string() << ", " << failures.size()
      << " rejected\n";
  return report_failures(failures, err);
}

namespace {

int train_like(const Config& cfg, const std::string& section, std::ostream& out) {
  check_device(cfg);
  RunConfig rc = run_config_from(cfg, section);
  require(!rc.train_dir.empty(), ErrorCode::Config, "data.train_dir must be set");
  require(!rc.output_dir.empty(), ErrorCode::Config, section + ".output_dir must be set");
  if (rc.resume.empty()) refuse_clobber(cfg, rc.output_dir / "train_log.tsv");
  TrainResult r;
  if (section == "finetune") {
    require(!rc.init_checkpoint.empty() || !rc.resume.empty(), ErrorCode::Config,
            "finetune.init must be set");
    r = finetune(rc, rc.init_checkpoint);
  } else {
    r = train(rc);
  }
  out << section << ": " << r.iterations_done << " of " << run_length(rc) << " iterations";
  if (!r.log.empty()) out << ", final loss " << r.log.back().loss;
  out << '\n';
  if (r.best_iter >= 0)
    out << "best validation PSNR " << std::fixed << std::setprecision(4) << r.best_val_psnr
        << " dB at iteration " << r.best_iter << " -> " << r.best_checkpoint.string() << '\n';
  out << "last checkpoint " << r.last_checkpoint.string() << '\n';
  return 0;
}

}  // namespace

int run_train(const Config& cfg, std::ostream& out, std::ostream&) {
  return train_like(cfg, "train", out);
}

int run_finetune(const Config& cfg, std::ostream& out, std::ostream&) {
  return train_like(cfg, "finetune", out);
}

DemosaicFormer load_model(const Config& cfg, const fs::path& checkpoint) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  DemosaicFormerConfig mc = model_from(cfg);
  if (cfg.flag("infer.model_from_checkpoint") && !ck.config_snapshot.empty()) {
    Config snap;
    snap.parse_text(ck.config_snapshot);
    mc = model_from(snap);
  }
  DemosaicFormer model = build_variant(mc);
  load_module_state(*model, ck, /*strict=*/true);
  model->eval();
  return model;
}

int run_infer(const Config& cfg, std::ostream& out, std::ostream& err) {
  check_device(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path raw_dir = need(cfg, "infer.raw_dir");
  const fs::path out_dir = need(cfg, "infer.out_dir");
  const PatternSpec pattern = pattern_from(cfg);
  const std::string baseline = cfg.str("infer.baseline");
  const auto threshold = cfg.integer("infer.tile_threshold");
  TileOptions tiles{static_cast<int>(cfg.integer("infer.tile")),
                    static_cast<int>(cfg.integer("infer.overlap"))};

  DemosaicFormer model{nullptr};
  std::optional<BaselineKind> base;
  if (baseline == "none") model = load_model(cfg, need(cfg, "infer.checkpoint"));
  else base = parse_baseline(baseline);
  if (cfg.flag("run.deterministic")) torch::set_num_threads(1);

  fs::create_directories(out_dir);
  std::vector<std::pair<std::string, std::string>> failures;
  std::size_t done = 0, tiled = 0;
  for (const fs::path& p : files_with_ext(raw_dir, ".bin")) {
    const std::string id = p.stem().string();
    try {
      const fs::path dst = out_dir / (id + ".png");
      if (!cfg.flag("run.overwrite") && fs::exists(dst)) {
        failures.emplace_back(id, dst.string() + " exists; pass --overwrite to replace it");
        continue;
      }
      const RawImage raw = read_raw_bin(p, pattern);
      RgbImage pred;
      if (base) {
        pred = run_baseline(*base, raw);
      } else if (std::max(raw.height, raw.width) > threshold) {
        pred = forward_tiled(model, raw, tiles);
        ++tiled;
      } else {
        pred = forward(model, raw);
      }
      write_png(pred, dst);
      ++done;
    } catch (const std::exception& e) {
      failures.emplace_back(id, e.what());
    }
  }
  out << "infer: " << done << " images (" << tiled << " tiled), " << failures.size()
      << " failed, wall " << std::fixed << std::setprecision(2) << seconds_since(t0) << " s\n";
  return report_failures(failures, err);
}

int run_eval(const Config& cfg, std::ostream& out, std::ostream&) {
  const fs::path pred_dir = need(cfg, "eval.pred_dir");
  const fs::path gt_dir = need(cfg, "eval.gt_dir");
  MetricReport rep = evaluate_dir(pred_dir, gt_dir, cfg.dump());
  const fs::path report = cfg.path("eval.report");
  if (!report.empty()) {
    refuse_clobber(cfg, report);
    write_report(rep, report);
  }
  if (cfg.flag("eval.write_residuals")) {
    const double gain = cfg.real("eval.residual_gain");
    for (const auto& m : rep.per_image) {
      const RgbImage pred = read_png(pred_dir / (m.id + ".png"));
      const RgbImage gt = read_png(gt_dir / (m.id + ".png"));
      write_gray_png(residual_map(pred, gt, gain), pred.height, pred.width,
                     pred_dir / (m.id + ".residual.png"));
    }
  }
  out << rep.summary();
  return 0;
}

MetricReport evaluate_model(DemosaicFormer& model, const Dataset& data, const PatternSpec& pattern) {
  MetricReport rep;
  for (const auto& item : data.items) {
    const RawImage raw = item.raw ? *item.raw : mosaic(item.gt, pattern);
    const RgbImage pred = forward(model, raw);
    rep.add({item.id, psnr(pred, item.gt), ssim(pred, item.gt)});
  }
  rep.finalize();
  return rep;
}

std::vector<AblationRow> ablate(const Config& cfg, std::ostream& log) {
  check_device(cfg);
  const auto variants = cfg.list("ablate.variants");
  require(!variants.empty(), ErrorCode::Config, "ablate.variants is empty");
  std::set<std::string> seen;
  for (const auto& v : variants)
    require(seen.insert(v).second, ErrorCode::Config, "duplicate ablation variant '" + v + "'");
  std::vector<std::int64_t> seeds;
  for (const auto& s : cfg.list("ablate.seeds")) {
    try {
      seeds.push_back(std::stoll(s));
    } catch (const std::logic_error&) {
      fail(ErrorCode::Config, "ablate.seeds: bad integer '" + s + "'");
    }
  }
  require(!seeds.empty(), ErrorCode::Config, "ablate.seeds is empty");
  const auto iters = cfg.integer("ablate.iterations");
  require(iters >= 0, ErrorCode::Config, "ablate.iterations must be >= 0");
  const fs::path out = need(cfg, "ablate.out");
  const PatternSpec pattern = pattern_from(cfg);
  const Dataset val = load_dataset(need(cfg, "data.val_dir"), pattern);
  require(!val.items.empty(), ErrorCode::Config, "validation set is empty");

  std::vector<AblationRow> rows;
  for (const auto& name : variants) {
    AblationRow row;
    row.variant = name;
    std::vector<double> ps, ss;
    try {
      Config c = cfg;
      const auto at = name.find('@');
      const PipelineVariant pv = PipelineVariant::parse(name.substr(0, at));
      c.set("model.order", order_name(pv.order));
      c.set("model.fusion", fusion_name(pv.fusion));
      if (at != std::string::npos) c.set("train.mode", name.substr(at + 1));
      c.set("schedule.stages", std::to_string(cfg.integer("ablate.patch")) + "x" +
                                   std::to_string(cfg.integer("ablate.batch")) + "x" +
                                   std::to_string(std::max<std::int64_t>(iters, 1)));
      c.set("schedule.flat_first_stage", "false");
      c.set("train.val_every", "0");
      c.set("train.ckpt_every", "0");
      c.set("train.resume", "");
      for (const auto seed : seeds) {
        c.set("run.seed", std::to_string(seed));
        c.set("train.output_dir", (out / slug(name) / ("seed" + std::to_string(seed))).string());
        c.set("run.overwrite", "true");
        DemosaicFormer model{nullptr};
        if (iters == 0) {
          const RunConfig rc = run_config_from(c, "train");
          model = build_variant(rc.model);
          init_weights(*model, rc.init, derive_seed(rc.seed, 2));
        } else {
          model = train(run_config_from(c, "train")).model;
        }
        model->eval();
        const MetricReport rep = evaluate_model(model, val, pattern);
        ps.push_back(rep.mean_psnr_db);
        ss.push_back(rep.mean_ssim);
        log << "ablate " << name << " seed " << seed << ": " << std::fixed << std::setprecision(4)
            << rep.mean_psnr_db << " dB, SSIM " << rep.mean_ssim << std::endl;
      }
      const double n = static_cast<double>(ps.size());
      for (std::size_t i = 0; i < ps.size(); ++i) {
        row.psnr_db += ps[i] / n;
        row.ssim += ss[i] / n;
      }
      for (double p : ps) row.psnr_std += (p - row.psnr_db) * (p - row.psnr_db) / n;
      row.psnr_std = std::sqrt(row.psnr_std);
      row.runs = static_cast<int>(ps.size());
    } catch (const std::exception& e) {
      row.status = e.what();
      row.runs = static_cast<int>(ps.size());
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream s;
  s << "variant\tpsnr\tssim\tpsnr_std\truns\tstatus\n" << std::fixed;
  for (const auto& r : rows)
    s << r.variant << '\t' << std::setprecision(4) << r.psnr_db << '\t' << std::setprecision(6)
      << r.ssim << '\t' << std::setprecision(4) << r.psnr_std << '\t' << r.runs << '\t'
      << r.status << '\n';
  return s.str();
}

int run_ablate(const Config& cfg, std::ostream& out, std::ostream& err) {
  const fs::path dst = need(cfg, "ablate.out") / "ablation.tsv";
  refuse_clobber(cfg, dst);
  const auto rows = ablate(cfg, out);
  fs::create_directories(dst.parent_path());
  std::ofstream(dst) << format_ablation(rows);
  out << format_ablation(rows);

  // Fusion ordering per stage order, reported but not asserted.
  std::map<std::string, std::map<std::string, double>> by_order;
  for (const auto& r : rows)
    if (r.status == "ok" && r.variant.find('@') == std::string::npos) {
      const auto pv = PipelineVariant::parse(r.variant);
      by_order[order_name(pv.order)][fusion_name(pv.fusion)] = r.psnr_db;
    }
  for (const auto& [order, f] : by_order)
    if (f.count("msgm") && f.count("simple_concat"))
      out << "ordering " << order << ": msgm " << std::setprecision(4) << f.at("msgm")
          << " dB vs simple_concat " << f.at("simple_concat") << " dB ("
          << (f.at("msgm") >= f.at("simple_concat") ? "msgm >= simple_concat" : "msgm < simple_concat")
          << ")\n";

  std::vector<std::pair<std::string, std::string>> failures;
  for (const auto& r : rows)
    if (r.status != "ok") failures.emplace_back(r.variant, r.status);
  return report_failures(failures, err);
}

int run_report(const Config& cfg, std::ostream& out, std::ostream& err) {
  const auto inputs = cfg.list("report.inputs");
  auto names = cfg.list("report.names");
  require(!inputs.empty(), ErrorCode::Config, "report.inputs is empty");
  require(names.empty() || names.size() == inputs.size(), ErrorCode::Config,
          "report.names must match report.inputs in length");
  std::ostringstream table;
  table << "| Method | PSNR | SSIM |\n|---|---|---|\n" << std::fixed;
  std::vector<std::pair<std::string, std::string>> failures;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string name = names.empty() ? fs::path(inputs[i]).stem().string() : names[i];
    try {
      std::ifstream in(inputs[i]);
      require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + inputs[i]);
      std::string line;
      std::getline(in, line);
      require(line == "id\tpsnr\tssim", ErrorCode::Format, inputs[i] + " is not a metric report");
      double ps = 0, ss = 0;
      std::size_t n = 0;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id;
        double p = 0, s = 0;
        require(static_cast<bool>(row >> id >> p >> s), ErrorCode::Format,
                inputs[i] + ": malformed row '" + line + "'");
        ps += p;
        ss += s;
        ++n;
      }
      require(n > 0, ErrorCode::EmptyReport, inputs[i] + " has no rows");
      table << "| " << name << " | " << std::setprecision(4) << ps / n << " | " << std::setprecision(4)
            << ss / n << " |\n";
    } catch (const std::exception& e) {
      failures.emplace_back(name, e.what());
    }
  }
  const fs::path dst = cfg.path("report.out");
  if (!dst.empty()) {
    refuse_clobber(cfg, dst);
    std::ofstream(dst) << table.str();
  }
  out << table.str();
  return report_failures(failures, err);
}

int run_command(const std::string& verb, const Config& cfg, std::ostream& out, std::ostream& err) {
  if (verb == "synth") return run_synth(cfg, out, err);
  if (verb == "train") return run_train(cfg, out, err);
  if (verb == "finetune") return run_finetune(cfg, out, err);
  if (verb == "infer") return run_infer(cfg, out, err);
  if (verb == "eval") return run_eval(cfg, out, err);
  if (verb == "ablate") return run_ablate(cfg, out, err);
  if (verb == "report") return run_report(cfg, out, err);
  fail(ErrorCode::Config,
       "unknown command '" + verb + "' (synth, train, finetune, infer, eval, ablate, report)");
}

}  // namespace hevs
