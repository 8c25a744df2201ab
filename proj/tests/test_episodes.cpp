#include <set>

#include "doctest.h"
#include "fsmb/episodes.hpp"

using fsmb::Episode;
using fsmb::EpisodeSpec;
using fsmb::FewShotDataset;
using fsmb::Rng;
using fsmb::SyntheticSpec;

namespace {

FewShotDataset make_ds(std::uint32_t supers, std::uint32_t per_super, std::uint32_t samples,
                       std::uint64_t seed = 3) {
  SyntheticSpec spec;
  spec.num_super_categories = supers;
  spec.classes_per_super = per_super;
  spec.samples_per_class = samples;
  spec.sample_dim = 4;
  spec.seed = seed;
  return fsmb::generate_synthetic(spec);
}

}  // namespace

TEST_CASE("forced selection on a two-class dataset") {
  const auto ds = make_ds(1, 2, 5);
  const auto pools = fsmb::pools_all(ds, {0, 1});
  Rng rng = Rng::stream(1, "episode", 0);
  const Episode ep = fsmb::sample_episode(ds, pools, {2, 1, 1}, rng);
  std::set<std::uint32_t> classes(ep.class_ids.begin(), ep.class_ids.end());
  CHECK(classes == std::set<std::uint32_t>{0, 1});
}

TEST_CASE("episode layout: balance, label range, support/query disjoint") {
  const auto ds = make_ds(3, 4, 12);
  std::vector<std::uint32_t> ids(ds.num_classes());
  for (std::uint32_t i = 0; i < ds.num_classes(); ++i) ids[i] = i;
  const auto pools = fsmb::pools_all(ds, ids);
  const EpisodeSpec spec{5, 2, 3};

  for (int e = 0; e < 20; ++e) {
    Rng rng = Rng::stream(7, "episode", e);
    const Episode ep = fsmb::sample_episode(ds, pools, spec, rng);
    REQUIRE(ep.class_ids.size() == 5);
    CHECK(ep.support.rows() == 10);
    CHECK(ep.query.rows() == 15);

    std::vector<int> sup_count(5, 0), qry_count(5, 0);
    for (auto y : ep.support_labels) {
      REQUIRE(y >= 0);
      REQUIRE(y < 5);
      ++sup_count[y];
    }
    for (auto y : ep.query_labels) {
      REQUIRE(y >= 0);
      REQUIRE(y < 5);
      ++qry_count[y];
    }
    for (int w = 0; w < 5; ++w) {
      CHECK(sup_count[w] == 2);
      CHECK(qry_count[w] == 3);
    }
    // same-class support and query indices never overlap
    for (int w = 0; w < 5; ++w) {
      std::set<std::uint32_t> sup(ep.support_indices[w].begin(), ep.support_indices[w].end());
      CHECK(sup.size() == 2);
      for (auto idx : ep.query_indices[w]) CHECK(sup.count(idx) == 0);
    }
    // distinct classes
    std::set<std::uint32_t> cls(ep.class_ids.begin(), ep.class_ids.end());
    CHECK(cls.size() == 5);
  }
}

TEST_CASE("sampling errors name the shortfall") {
  const auto ds = make_ds(1, 3, 4);
  const auto pools = fsmb::pools_all(ds, {0, 1, 2});
  Rng rng(1);
  // not enough classes
  CHECK_THROWS_WITH_AS(fsmb::sample_episode(ds, pools, {5, 1, 1}, rng),
                       doctest::Contains("needs 5 classes"), fsmb::SamplingError);
  // not enough samples per class (needs K+Q=5, classes have 4)
  CHECK_THROWS_WITH_AS(fsmb::sample_episode(ds, pools, {2, 2, 3}, rng),
                       doctest::Contains("episode needs 5"), fsmb::SamplingError);
}

TEST_CASE("episode spec validation") {
  CHECK_THROWS_AS((EpisodeSpec{1, 1, 1}).validate(), fsmb::ConfigError);
  CHECK_THROWS_AS((EpisodeSpec{2, 0, 1}).validate(), fsmb::ConfigError);
  CHECK_THROWS_AS((EpisodeSpec{2, 1, 0}).validate(), fsmb::ConfigError);
}

TEST_CASE("consistent stream prefix property") {
  const auto ds = make_ds(4, 3, 10);
  std::vector<std::uint32_t> ids(ds.num_classes());
  for (std::uint32_t i = 0; i < ds.num_classes(); ++i) ids[i] = i;
  const auto pools = fsmb::pools_all(ds, ids);
  const EpisodeSpec spec{3, 1, 2};

  const auto full = fsmb::consistent_task_stream(ds, pools, spec, 123, 100);
  for (int prefix : {1, 10, 50, 100}) {
    const auto head = fsmb::consistent_task_stream(ds, pools, spec, 123, prefix);
    REQUIRE(head.size() == static_cast<std::size_t>(prefix));
    for (int i = 0; i < prefix; ++i) {
      CHECK(head[i].class_ids == full[i].class_ids);
      CHECK(head[i].support_indices == full[i].support_indices);
      CHECK(head[i].query_indices == full[i].query_indices);
      CHECK(head[i].support.values() == full[i].support.values());
    }
  }
}

TEST_CASE("different seeds give different first episodes") {
  const auto ds = make_ds(4, 3, 10);
  std::vector<std::uint32_t> ids(ds.num_classes());
  for (std::uint32_t i = 0; i < ds.num_classes(); ++i) ids[i] = i;
  const auto pools = fsmb::pools_all(ds, ids);
  const EpisodeSpec spec{3, 1, 2};
  const auto a = fsmb::consistent_task_stream(ds, pools, spec, 1, 1);
  const auto b = fsmb::consistent_task_stream(ds, pools, spec, 2, 1);
  const bool differ = a[0].class_ids != b[0].class_ids ||
                      a[0].support_indices != b[0].support_indices ||
                      a[0].query_indices != b[0].query_indices;
  CHECK(differ);
}

TEST_CASE("training pools never expose holdout images") {
  const auto ds = make_ds(3, 2, 10);
  const auto split = fsmb::split_by_supercategory(ds, {1, 1, 1}, 9, 0.2);
  const auto train = fsmb::pools_train(ds, split);
  const auto hold = fsmb::pools_base_holdout(ds, split);
  // sample many episodes from the training pools; no drawn index may be a
  // holdout index
  std::set<std::pair<std::uint32_t, std::uint32_t>> holdout_keys;
  for (const auto& p : hold) {
    for (auto idx : p.indices) holdout_keys.insert({p.class_id, idx});
  }
  const EpisodeSpec spec{2, 2, 3};
  for (int e = 0; e < 50; ++e) {
    Rng rng = Rng::stream(31, "episode", e);
    const Episode ep = fsmb::sample_episode(ds, train, spec, rng);
    for (std::size_t w = 0; w < ep.class_ids.size(); ++w) {
      for (auto idx : ep.support_indices[w]) {
        CHECK(holdout_keys.count({ep.class_ids[w], idx}) == 0);
      }
      for (auto idx : ep.query_indices[w]) {
        CHECK(holdout_keys.count({ep.class_ids[w], idx}) == 0);
      }
    }
  }
}
