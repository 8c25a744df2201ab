#pragma once

// Diagnostic experiment runners: the dataset-property sweep (super-category
// vs shuffled splits, small vs large training sets), the cosine vs squared
// Euclidean metric ablation, and the from-scratch ablation. Each trains
// Classifier-Baseline and Meta-Baseline under shared evaluation task sets
// and reports per-cell accuracy tables.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fsmb/dataset.hpp"
#include "fsmb/train.hpp"

namespace fsmb {

struct ExperimentConfig {
  SyntheticSpec data;       // data.seed is replaced by each run seed
  SplitCounts super_counts{8, 2, 2};  // in super-categories
  double holdout = 0.1;
  EncoderDescriptor encoder{0, {64}, 32};  // input_dim 0 = match dataset
  TrainConfig cls_cfg;
  TrainConfig meta_cfg;
  TrainConfig scratch_cfg;  // meta stage without classification pre-training
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int> shots{1, 5};
  int eval_tasks = 800;
  std::uint64_t eval_seed = kDefaultEvalSeed;
  std::uint32_t small_cap = 15;  // per-class training samples for the "small" variant
};

ExperimentConfig default_experiment_config();
ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& cfg);

// classifier vs meta accuracy for one table cell, averaged over seeds
struct SweepCell {
  double classifier = 0.0;
  double meta = 0.0;
  double delta = 0.0;
};

struct DatasetSweepResult {
  std::vector<std::string> variants;            // column names
  std::map<int, std::vector<SweepCell>> cells;  // shot -> per-variant cell
};

// include_sizes adds the small/large training-set axis; without it only the
// full-size super and shuffled variants run.
DatasetSweepResult run_dataset_property_sweep(const ExperimentConfig& cfg,
                                              bool include_sizes = true);
std::string render_sweep_table(const DatasetSweepResult& r);

struct MetricAblationResult {
  // rows in table order: classifier cosine, classifier sq-euclidean,
  // meta cosine, meta sq-euclidean
  std::vector<std::string> rows;
  std::map<int, std::vector<double>> acc;  // shot -> per-row accuracy
};

MetricAblationResult run_metric_ablation(const ExperimentConfig& cfg);
std::string render_metric_table(const MetricAblationResult& r);

struct ScratchAblationRow {
  double base_gen = 0.0;
  double novel_gen = 0.0;
};

struct ScratchAblationResult {
  // shot -> {with classification pre-training, from scratch}
  std::map<int, std::pair<ScratchAblationRow, ScratchAblationRow>> rows;
};

ScratchAblationResult run_scratch_ablation(const ExperimentConfig& cfg);
std::string render_scratch_table(const ScratchAblationResult& r);

// Convenience used by several runners: per-seed mean of the base/novel
// generalization curves, aligned by epoch.
struct MeanCurvePoint {
  int epoch = 0;
  double base_gen = 0.0;
  double novel_gen = 0.0;
};
std::vector<MeanCurvePoint> mean_generalization_curve(
    const std::vector<std::vector<MetricsRecord>>& runs);

}  // namespace fsmb
