#pragma once

// Episodic evaluation over a consistent task stream, with per-task accuracy
// aggregated into mean and a normal-approximation 95% confidence interval.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsmb/dataset.hpp"
#include "fsmb/encoder.hpp"
#include "fsmb/episodes.hpp"
#include "fsmb/heads.hpp"

namespace fsmb {

// Shared default so method comparisons land on identical task sets.
inline constexpr std::uint64_t kDefaultEvalSeed = 20240601;

struct EvalResult {
  double mean_accuracy = 0.0;   // percent
  double ci95_halfwidth = 0.0;  // percent
  int num_tasks = 0;
  EpisodeSpec spec;
  Metric metric = Metric::cosine;
  std::string split;
};

// tau == nullopt evaluates the unscaled form (tau = 1); the argmax decision
// is the same either way.
EvalResult evaluate(const Encoder& encoder, std::optional<float> tau, const FewShotDataset& ds,
                    const std::vector<ClassPool>& pools, const EpisodeSpec& spec,
                    std::uint64_t seed, int num_tasks, Metric metric = Metric::cosine,
                    const std::string& split_name = "");

// Accuracy of one already-sampled episode, percent.
double episode_accuracy(const Encoder& encoder, std::optional<float> tau, const Episode& ep,
                        Metric metric);

}  // namespace fsmb
