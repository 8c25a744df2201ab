#pragma once

// Per-epoch training/evaluation statistics and their JSONL / CSV emitters.
// Both formats are written with fixed formatting so identical runs produce
// byte-identical files.

#include <optional>
#include <string>
#include <vector>

#include "fsmb/eval.hpp"

namespace fsmb {

struct MetricsRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;  // percent
  EvalResult base_gen;
  EvalResult novel_gen;
  EvalResult val;
  std::optional<double> tau;  // meta stage only
};

std::string metrics_jsonl_line(const MetricsRecord& rec);
void write_metrics_jsonl(const std::vector<MetricsRecord>& records, const std::string& path,
                         bool append = false);

// CSV columns: epoch,train_loss,train_acc,base_acc,base_ci,novel_acc,
// novel_ci,val_acc,val_ci,tau. This is the curve file the plotter consumes.
std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRecord& rec);
void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path,
                       bool append = false);

// aligned-column text rendering of evaluation results
std::string format_eval_line(const EvalResult& r);

}  // namespace fsmb
