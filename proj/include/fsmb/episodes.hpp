#pragma once

// N-way K-shot Q-query task sampling, including the deterministic consistent
// evaluation stream: episode i depends only on (seed, i, dataset, pools,
// spec), so any prefix of a stream is independent of its total length.

#include <cstdint>
#include <string>
#include <vector>

#include "fsmb/dataset.hpp"
#include "fsmb/rng.hpp"
#include "fsmb/tensor.hpp"

namespace fsmb {

struct EpisodeSpec {
  int n_way = 5;
  int k_shot = 1;
  int q_query = 15;

  void validate() const {
    if (n_way < 2) throw ConfigError("episode spec: n_way must be >= 2");
    if (k_shot < 1) throw ConfigError("episode spec: k_shot must be >= 1");
    if (q_query < 1) throw ConfigError("episode spec: q_query must be >= 1");
  }
};

template <class S>
struct EpisodeT {
  int n_way = 0;
  int k_shot = 0;
  int q_query = 0;
  TensorT<S> support;  // (N*K) x dim, way-major rows
  std::vector<std::int32_t> support_labels;
  TensorT<S> query;  // (N*Q) x dim
  std::vector<std::int32_t> query_labels;
  // audit trail
  std::vector<std::uint32_t> class_ids;                      // source class per way
  std::vector<std::vector<std::uint32_t>> support_indices;   // per way, K indices
  std::vector<std::vector<std::uint32_t>> query_indices;     // per way, Q indices
};

using Episode = EpisodeT<float>;

// Draws N classes without replacement from the pools, then K+Q distinct
// samples per class; the first K go to support, the next Q to query.
Episode sample_episode(const FewShotDataset& ds, const std::vector<ClassPool>& pools,
                       const EpisodeSpec& spec, Rng& rng);

// 800 tasks is the evaluation default.
inline constexpr int kDefaultEvalTasks = 800;

std::vector<Episode> consistent_task_stream(const FewShotDataset& ds,
                                            const std::vector<ClassPool>& pools,
                                            const EpisodeSpec& spec, std::uint64_t seed,
                                            int count);

// One JSON object per line: episode index, class ids, sample indices.
void dump_episodes_jsonl(const std::vector<Episode>& episodes, const std::string& path);

}  // namespace fsmb
