#pragma once

#include <string>

#include "lewisim/config.hpp"
#include "lewisim/training.hpp"

namespace lewisim {

struct RunSummary {
  bool failed = false;
  int failed_update = -1;
  std::string failure;
  double generalization = 0.0;     // probe-based (reconstruction); test accuracy otherwise
  double toposim = 0.0;
  bool toposim_defined = false;
  double adapt_test = 0.0;         // final probe estimate on the selected model
  bool adapt_defined = false;
  double acc_train = 0.0, acc_test = 0.0;
  double best_val_acc = 0.0;
  int best_update = -1;
};

// Runs one configured experiment into `out_dir`: manifest.json written before
// training, splits.txt, metrics.csv, checkpoints (final + best validation),
// probe_report.json and final_summary.json afterwards. A numeric failure
// leaves a FAILED marker instead of final artifacts.
RunSummary execute_run(const RunConfig& cfg, const std::string& out_dir);

std::string summary_csv_header();
std::string summary_csv_row(const std::string& value, std::uint64_t seed,
                            const RunSummary& s);

}  // namespace lewisim
