#include "fsmb/eval.hpp"

#include <cmath>

namespace fsmb {

namespace {

double score_episode(const Encoder& encoder, const MetricConfig& cfg, const Episode& ep) {
  const std::size_t nk = ep.support.rows(), nq = ep.query.rows(), dim = ep.support.cols();
  std::vector<float> combined;
  combined.reserve((nk + nq) * dim);
  combined.insert(combined.end(), ep.support.values().begin(), ep.support.values().end());
  combined.insert(combined.end(), ep.query.values().begin(), ep.query.values().end());
  Tensor batch = Tensor::from_values({nk + nq, dim}, std::move(combined));

  Tensor embeddings = encoder.forward(batch);
  Tensor support_emb = slice_rows(embeddings, 0, nk);
  Tensor query_emb = slice_rows(embeddings, nk, nk + nq);
  Tensor cents = centroids(support_emb, ep.support_labels, ep.n_way);
  Tensor logits = score(query_emb, cents, cfg);

  const auto pred = argmax_rows(logits);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == ep.query_labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace

double episode_accuracy(const Encoder& encoder, std::optional<float> tau, const Episode& ep,
                        Metric metric) {
  NoGradGuard guard;
  MetricConfig cfg = fixed_metric_config(metric, tau.value_or(1.0f));
  return score_episode(encoder, cfg, ep);
}

EvalResult evaluate(const Encoder& encoder, std::optional<float> tau, const FewShotDataset& ds,
                    const std::vector<ClassPool>& pools, const EpisodeSpec& spec,
                    std::uint64_t seed, int num_tasks, Metric metric,
                    const std::string& split_name) {
  if (num_tasks < 1) throw ConfigError("evaluate: num_tasks must be >= 1");
  NoGradGuard guard;
  MetricConfig cfg = fixed_metric_config(metric, tau.value_or(1.0f));

  std::vector<double> task_acc;
  task_acc.reserve(num_tasks);
  for (int i = 0; i < num_tasks; ++i) {
    Rng rng = Rng::stream(seed, "episode", static_cast<std::uint64_t>(i));
    const Episode ep = sample_episode(ds, pools, spec, rng);
    task_acc.push_back(score_episode(encoder, cfg, ep));
  }

  double mean = 0.0;
  for (double a : task_acc) mean += a;
  mean /= task_acc.size();
  double var = 0.0;
  for (double a : task_acc) var += (a - mean) * (a - mean);
  var /= task_acc.size();  // population variance; a single task gives ci 0

  EvalResult res;
  res.mean_accuracy = mean;
  res.ci95_halfwidth = 1.96 * std::sqrt(var) / std::sqrt(static_cast<double>(task_acc.size()));
  res.num_tasks = num_tasks;
  res.spec = spec;
  res.metric = metric;
  res.split = split_name;
  return res;
}

}  // namespace fsmb
