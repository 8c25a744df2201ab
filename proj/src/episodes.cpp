#include "fsmb/episodes.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace fsmb {

Episode sample_episode(const FewShotDataset& ds, const std::vector<ClassPool>& pools,
                       const EpisodeSpec& spec, Rng& rng) {
  spec.validate();
  const auto n_way = static_cast<std::uint32_t>(spec.n_way);
  const auto per_class = static_cast<std::uint32_t>(spec.k_shot + spec.q_query);

  if (pools.size() < n_way) {
    throw SamplingError("episode needs " + std::to_string(n_way) + " classes, pool has " +
                        std::to_string(pools.size()));
  }
  for (const auto& p : pools) {
    if (p.indices.size() < per_class) {
      throw SamplingError("class " + std::to_string(p.class_id) + " has " +
                          std::to_string(p.indices.size()) + " usable samples, episode needs " +
                          std::to_string(per_class));
    }
  }

  const auto way_order =
      rng.sample_without_replacement(static_cast<std::uint32_t>(pools.size()), n_way);

  Episode ep;
  ep.n_way = spec.n_way;
  ep.k_shot = spec.k_shot;
  ep.q_query = spec.q_query;
  const std::uint32_t dim = ds.sample_dim;
  std::vector<float> support(static_cast<std::size_t>(n_way) * spec.k_shot * dim);
  std::vector<float> query(static_cast<std::size_t>(n_way) * spec.q_query * dim);
  ep.support_labels.resize(static_cast<std::size_t>(n_way) * spec.k_shot);
  ep.query_labels.resize(static_cast<std::size_t>(n_way) * spec.q_query);

  for (std::uint32_t w = 0; w < n_way; ++w) {
    const ClassPool& pool = pools[way_order[w]];
    const ClassRecord& cls = ds.classes[pool.class_id];
    ep.class_ids.push_back(pool.class_id);

    const auto picks = rng.sample_without_replacement(
        static_cast<std::uint32_t>(pool.indices.size()), per_class);

    std::vector<std::uint32_t> sup_idx, qry_idx;
    for (std::uint32_t j = 0; j < per_class; ++j) {
      const std::uint32_t sample_idx = pool.indices[picks[j]];
      const float* src = cls.sample(sample_idx, dim);
      if (j < static_cast<std::uint32_t>(spec.k_shot)) {
        const std::size_t row = static_cast<std::size_t>(w) * spec.k_shot + j;
        std::memcpy(support.data() + row * dim, src, dim * sizeof(float));
        ep.support_labels[row] = static_cast<std::int32_t>(w);
        sup_idx.push_back(sample_idx);
      } else {
        const std::size_t row =
            static_cast<std::size_t>(w) * spec.q_query + (j - spec.k_shot);
        std::memcpy(query.data() + row * dim, src, dim * sizeof(float));
        ep.query_labels[row] = static_cast<std::int32_t>(w);
        qry_idx.push_back(sample_idx);
      }
    }
    ep.support_indices.push_back(std::move(sup_idx));
    ep.query_indices.push_back(std::move(qry_idx));
  }

  ep.support = Tensor::from_values({static_cast<std::size_t>(n_way) * spec.k_shot, dim},
                                   std::move(support));
  ep.query = Tensor::from_values({static_cast<std::size_t>(n_way) * spec.q_query, dim},
                                 std::move(query));
  return ep;
}

std::vector<Episode> consistent_task_stream(const FewShotDataset& ds,
                                            const std::vector<ClassPool>& pools,
                                            const EpisodeSpec& spec, std::uint64_t seed,
                                            int count) {
  std::vector<Episode> episodes;
  episodes.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::stream(seed, "episode", static_cast<std::uint64_t>(i));
    episodes.push_back(sample_episode(ds, pools, spec, rng));
  }
  return episodes;
}

void dump_episodes_jsonl(const std::vector<Episode>& episodes, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const Episode& ep = episodes[i];
    nlohmann::json j;
    j["episode"] = i;
    j["class_ids"] = ep.class_ids;
    j["support_indices"] = ep.support_indices;
    j["query_indices"] = ep.query_indices;
    out << j.dump() << "\n";
  }
}

}  // namespace fsmb
