#include "fsmb/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace fsmb {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

nlohmann::json eval_json(const EvalResult& r) {
  nlohmann::json j;
  j["acc"] = r.mean_accuracy;
  j["ci95"] = r.ci95_halfwidth;
  j["tasks"] = r.num_tasks;
  return j;
}

void write_lines(const std::string& path, const std::string& text, bool append) {
  std::ofstream out(path, append ? std::ios::binary | std::ios::app : std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << text;
}

}  // namespace

std::string metrics_jsonl_line(const MetricsRecord& rec) {
  nlohmann::json j;
  j["epoch"] = rec.epoch;
  j["train_loss"] = rec.train_loss;
  j["train_acc"] = rec.train_acc;
  j["base_gen"] = eval_json(rec.base_gen);
  j["novel_gen"] = eval_json(rec.novel_gen);
  j["val"] = eval_json(rec.val);
  if (rec.tau) j["tau"] = *rec.tau;
  return j.dump();
}

void write_metrics_jsonl(const std::vector<MetricsRecord>& records, const std::string& path,
                         bool append) {
  std::string text;
  for (const auto& r : records) text += metrics_jsonl_line(r) + "\n";
  write_lines(path, text, append);
}

std::string metrics_csv_header() {
  return "epoch,train_loss,train_acc,base_acc,base_ci,novel_acc,novel_ci,val_acc,val_ci,tau\n";
}

std::string metrics_csv_line(const MetricsRecord& rec) {
  std::string line = std::to_string(rec.epoch);
  line += "," + fmt(rec.train_loss);
  line += "," + fmt(rec.train_acc);
  line += "," + fmt(rec.base_gen.mean_accuracy);
  line += "," + fmt(rec.base_gen.ci95_halfwidth);
  line += "," + fmt(rec.novel_gen.mean_accuracy);
  line += "," + fmt(rec.novel_gen.ci95_halfwidth);
  line += "," + fmt(rec.val.mean_accuracy);
  line += "," + fmt(rec.val.ci95_halfwidth);
  line += "," + (rec.tau ? fmt(*rec.tau) : std::string(""));
  return line + "\n";
}

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path,
                       bool append) {
  std::string text = append ? "" : metrics_csv_header();
  for (const auto& r : records) text += metrics_csv_line(r);
  write_lines(path, text, append);
}

std::string format_eval_line(const EvalResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %d-way %d-shot  %6.2f%% +/- %.2f%%  (%d tasks, %s)",
                r.split.empty() ? "-" : r.split.c_str(), r.spec.n_way, r.spec.k_shot,
                r.mean_accuracy, r.ci95_halfwidth, r.num_tasks, metric_name(r.metric));
  return buf;
}

}  // namespace fsmb
