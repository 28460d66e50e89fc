// hevs: batch commands over config files.
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "hevs/hevs.h"

int main(int argc, char** argv) {
  CLI::App app{"HybridEVS demosaicing: synth, train, finetune, infer, eval, ablate, report"};
  app.require_subcommand(1, 1);

  std::string config;
  std::string seed;
  std::string device;
  bool overwrite = false;
  bool dump = false;
  std::vector<std::string> sets;

  const std::pair<const char*, const char*> verbs[] = {
      {"synth", "make raw/gt training pairs from clean PNGs"},
      {"train", "initial training"},
      {"finetune", "fine-tune from a checkpoint (EMA on, no augmentation)"},
      {"infer", "raw .bin files to PNGs, tiled above infer.tile_threshold"},
      {"eval", "PSNR/SSIM of a prediction directory against ground truth"},
      {"ablate", "train and score a list of pipeline variants"},
      {"report", "markdown table from eval reports"}};
  for (const auto& [verb, help] : verbs) {
    CLI::App* sub = app.add_subcommand(verb, help);
    sub->add_option("--config,-c", config, "configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed for every stochastic step");
    sub->add_option("--device", device, "compute device (default $HEVS_DEVICE or cpu)");
    sub->add_flag("--overwrite", overwrite, "replace existing outputs");
    sub->add_option("--set", sets, "override, key.path=value (repeatable)");
    sub->add_flag("--dump-config", dump, "print the effective configuration and exit");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string verb = app.get_subcommands().front()->get_name();

  if (!seed.empty()) sets.push_back("run.seed=" + seed);
  if (!device.empty()) sets.push_back("run.device=" + device);
  if (overwrite) sets.push_back("run.overwrite=true");
  std::vector<const char*> ov;
  for (const auto& s : sets) ov.push_back(s.c_str());
  const char* cfg = config.empty() ? nullptr : config.c_str();

  if (dump) {
    const char* text = nullptr;
    if (hevs_dump_config(cfg, ov.data(), ov.size(), &text) != HEVS_OK) {
      std::fprintf(stderr, "error: %s\n", hevs_last_error());
      return 2;
    }
    std::fputs(text, stdout);
    return 0;
  }

  int code = 0;
  const hevs_status st = hevs_run_command(verb.c_str(), cfg, ov.data(), ov.size(), &code);
  if (st != HEVS_OK) {
    std::fprintf(stderr, "error (%s): %s\n", hevs_status_name(st), hevs_last_error());
    return 2;
  }
  return code;
}
