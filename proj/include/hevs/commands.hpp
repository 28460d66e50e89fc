#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hevs/config.hpp"
#include "hevs/evaluation.hpp"

namespace hevs {

// Batch commands behind the CLI. Each returns the process exit code: 0 when
// every item succeeded, 1 when some items failed (they are listed on err).
// Configuration and I/O problems that stop a command outright throw Error.
int run_synth(const Config& cfg, std::ostream& out, std::ostream& err);
int run_train(const Config& cfg, std::ostream& out, std::ostream& err);
int run_finetune(const Config& cfg, std::ostream& out, std::ostream& err);
int run_infer(const Config& cfg, std::ostream& out, std::ostream& err);
int run_eval(const Config& cfg, std::ostream& out, std::ostream& err);
int run_ablate(const Config& cfg, std::ostream& out, std::ostream& err);
int run_report(const Config& cfg, std::ostream& out, std::ostream& err);

// Dispatches on synth, train, finetune, infer, eval, ablate, report.
int run_command(const std::string& verb, const Config& cfg, std::ostream& out, std::ostream& err);

// Mean metrics of a model over a dataset (stored raw when present, else the
// clean mosaic of gt), whole-image inference.
MetricReport evaluate_model(DemosaicFormer& model, const Dataset& data, const PatternSpec& pattern);

struct AblationRow {
  std::string variant;  // "<order>/<fusion>" with an optional "@<mode>" suffix
  double psnr_db = 0.0;
  double ssim = 0.0;
  double psnr_std = 0.0;
  int runs = 0;
  std::string status = "ok";  // or the failure reason
};

std::vector<AblationRow> ablate(const Config& cfg, std::ostream& log);
std::string format_ablation(const std::vector<AblationRow>& rows);

// Model for inference: model section of the checkpoint's snapshot when
// model_from_checkpoint is set, otherwise of cfg. Weights load strictly.
DemosaicFormer load_model(const Config& cfg, const std::filesystem::path& checkpoint);

}  // namespace hevs
