#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "fsmb/checkpoint.hpp"
#include "fsmb/optim.hpp"
#include "fsmb/train.hpp"

using fsmb::Checkpoint;
using fsmb::Encoder;
using fsmb::FewShotDataset;
using fsmb::SplitSpec;
using fsmb::SyntheticSpec;
using fsmb::Tensor;
using fsmb::TrainConfig;

namespace {

std::string temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fsmb_train_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

struct TinyWorld {
  FewShotDataset ds;
  SplitSpec split;
};

TinyWorld tiny_world(std::uint64_t seed = 5) {
  SyntheticSpec spec;
  spec.num_super_categories = 6;
  spec.classes_per_super = 2;
  spec.samples_per_class = 20;
  spec.sample_dim = 8;
  spec.super_center_scale = 2.0;
  spec.class_center_scale = 1.5;
  spec.within_class_noise = 0.3;
  spec.seed = seed;
  TinyWorld w{fsmb::generate_synthetic(spec), {}};
  w.split = fsmb::split_by_supercategory(w.ds, {4, 1, 1}, seed);
  return w;
}

TrainConfig tiny_cls_config() {
  TrainConfig cfg = fsmb::default_classification_config(4);
  cfg.batch_size = 32;
  cfg.lr = 0.05;
  cfg.seed = 1;
  cfg.eval_tasks = 20;
  cfg.eval_spec = {3, 1, 5};
  cfg.encoder = {0, {16}, 8};
  return cfg;
}

TrainConfig tiny_meta_config(int epochs = 2) {
  TrainConfig cfg = fsmb::default_meta_config(epochs);
  cfg.batches_per_epoch = 5;
  cfg.batch_size = 2;
  cfg.seed = 1;
  cfg.eval_tasks = 20;
  cfg.episode_spec = {3, 1, 5};
  cfg.eval_spec = {3, 1, 5};
  cfg.encoder = {0, {16}, 8};
  return cfg;
}

bool same_params(const Encoder& a, const Encoder& b) {
  if (a.dims != b.dims) return false;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    if (a.weights[i].values() != b.weights[i].values()) return false;
    if (a.biases[i].values() != b.biases[i].values()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("sgd_step without momentum or decay is plain gradient descent") {
  Tensor p = Tensor::from_values({2}, {1.0f, -2.0f}).set_requires_grad(true);
  p.zero_grad();
  fsmb::sum_all(fsmb::mul(p, Tensor::from_values({2}, {3.0f, 4.0f}))).backward();
  fsmb::SgdState state;
  std::vector<Tensor*> params{&p};
  fsmb::sgd_step(params, state, 0.1, 0.0, 0.0);
  CHECK(p.values()[0] == doctest::Approx(1.0 - 0.1 * 3.0));
  CHECK(p.values()[1] == doctest::Approx(-2.0 - 0.1 * 4.0));
}

TEST_CASE("two momentum steps with constant gradient follow the recurrence") {
  // v1 = g, v2 = mu g + g; total update = lr g (2 + mu)
  const float mu = 0.9f, lr = 0.01f, g = 2.0f;
  Tensor p = Tensor::from_values({1}, {5.0f}).set_requires_grad(true);
  fsmb::SgdState state;
  std::vector<Tensor*> params{&p};
  for (int s = 0; s < 2; ++s) {
    p.zero_grad();
    fsmb::sum_all(fsmb::scale(p, g)).backward();
    fsmb::sgd_step(params, state, lr, mu, 0.0);
  }
  CHECK(p.values()[0] == doctest::Approx(5.0 - lr * g * (2.0 + mu)).epsilon(1e-6));
}

TEST_CASE("weight decay alone shrinks parameters toward zero") {
  Tensor p = Tensor::from_values({2}, {4.0f, -4.0f}).set_requires_grad(true);
  p.zero_grad();
  fsmb::scale(fsmb::sum_all(p), 0.0f).backward();  // zero gradient
  fsmb::SgdState state;
  std::vector<Tensor*> params{&p};
  fsmb::sgd_step(params, state, 0.1, 0.0, 0.5);
  CHECK(p.values()[0] == doctest::Approx(4.0 - 0.1 * 0.5 * 4.0));
  CHECK(p.values()[1] == doctest::Approx(-4.0 + 0.1 * 0.5 * 4.0));
}

TEST_CASE("classification training is bitwise deterministic") {
  const TinyWorld w = tiny_world();
  const TrainConfig cfg = tiny_cls_config();
  const auto a = fsmb::train_classification(w.ds, w.split, cfg);
  const auto b = fsmb::train_classification(w.ds, w.split, cfg);
  CHECK(same_params(a.encoder_last, b.encoder_last));
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].train_loss == b.metrics[i].train_loss);
    CHECK(a.metrics[i].novel_gen.mean_accuracy == b.metrics[i].novel_gen.mean_accuracy);
  }
}

TEST_CASE("classification reaches high accuracy on separable data") {
  TinyWorld w = tiny_world(11);
  TrainConfig cfg = tiny_cls_config();
  cfg.epochs = 12;
  const auto res = fsmb::train_classification(w.ds, w.split, cfg);
  CHECK(res.metrics.back().train_acc > 95.0);
}

TEST_CASE("meta stage with zero epochs leaves evaluation at the classifier baseline") {
  const TinyWorld w = tiny_world();
  const auto cb = fsmb::train_classification(w.ds, w.split, tiny_cls_config());
  TrainConfig mcfg = tiny_meta_config(0);
  const auto mb = fsmb::train_meta(cb.encoder_best, w.ds, w.split, mcfg);
  CHECK(same_params(mb.encoder_last, cb.encoder_best));
  CHECK(mb.tau_last == 10.0f);
}

TEST_CASE("meta stage with lr 0 leaves parameters bitwise unchanged") {
  const TinyWorld w = tiny_world();
  const auto cb = fsmb::train_classification(w.ds, w.split, tiny_cls_config());
  TrainConfig mcfg = tiny_meta_config(1);
  mcfg.lr = 0.0;
  const auto mb = fsmb::train_meta(cb.encoder_best, w.ds, w.split, mcfg);
  CHECK(same_params(mb.encoder_last, cb.encoder_best));
  CHECK(mb.tau_last == 10.0f);
}

TEST_CASE("meta training is bitwise deterministic and moves tau") {
  const TinyWorld w = tiny_world();
  const auto cb = fsmb::train_classification(w.ds, w.split, tiny_cls_config());
  const TrainConfig mcfg = tiny_meta_config(2);
  const auto a = fsmb::train_meta(cb.encoder_best, w.ds, w.split, mcfg);
  const auto b = fsmb::train_meta(cb.encoder_best, w.ds, w.split, mcfg);
  CHECK(same_params(a.encoder_last, b.encoder_last));
  CHECK(a.tau_last == b.tau_last);
  CHECK(a.tau_last != 10.0f);  // temperature is learnable
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const TinyWorld w = tiny_world();
  TrainConfig cfg = tiny_cls_config();
  cfg.epochs = 2;
  const std::string dir = temp_dir("ck_roundtrip");
  fsmb::train_classification(w.ds, w.split, cfg, {dir, false});

  const std::string p1 = dir + "/checkpoint_last.fsck";
  const std::string p2 = dir + "/checkpoint_resaved.fsck";
  const Checkpoint ck = fsmb::load_checkpoint(p1);
  fsmb::save_checkpoint(ck, p2);
  CHECK(fsmb::read_text_file(p1) == fsmb::read_text_file(p2));
}

TEST_CASE("resume reproduces the uninterrupted trajectory bitwise") {
  const TinyWorld w = tiny_world();

  SUBCASE("classification") {
    TrainConfig cfg = tiny_cls_config();
    cfg.epochs = 4;
    const auto full = fsmb::train_classification(w.ds, w.split, cfg);

    TrainConfig half = cfg;
    half.epochs = 2;
    const std::string dir = temp_dir("resume_cls");
    fsmb::train_classification(w.ds, w.split, half, {dir, false});
    const Checkpoint mid = fsmb::load_checkpoint(dir + "/checkpoint_last.fsck");
    const auto resumed = fsmb::train_classification(w.ds, w.split, cfg, {}, &mid);
    CHECK(same_params(full.encoder_last, resumed.encoder_last));
    CHECK(full.best_val_acc == resumed.best_val_acc);
  }

  SUBCASE("meta") {
    const auto cb = fsmb::train_classification(w.ds, w.split, tiny_cls_config());
    TrainConfig cfg = tiny_meta_config(4);
    const auto full = fsmb::train_meta(cb.encoder_best, w.ds, w.split, cfg);

    TrainConfig half = cfg;
    half.epochs = 2;
    const std::string dir = temp_dir("resume_meta");
    fsmb::train_meta(cb.encoder_best, w.ds, w.split, half, {dir, false});
    const Checkpoint mid = fsmb::load_checkpoint(dir + "/checkpoint_last.fsck");
    const auto resumed = fsmb::train_meta(std::nullopt, w.ds, w.split, cfg, {}, &mid);
    CHECK(same_params(full.encoder_last, resumed.encoder_last));
    CHECK(full.tau_last == resumed.tau_last);
  }
}

TEST_CASE("meta first-epoch loss decreases from its opening batches") {
  const TinyWorld w = tiny_world();
  const auto cb = fsmb::train_classification(w.ds, w.split, tiny_cls_config());
  TrainConfig cfg = tiny_meta_config(1);
  cfg.batches_per_epoch = 40;

  std::vector<double> losses;
  fsmb::TrainIO io;
  io.on_step = [&](int epoch, int, double loss) {
    if (epoch == 0) losses.push_back(loss);
  };
  fsmb::train_meta(cb.encoder_best, w.ds, w.split, cfg, io);

  REQUIRE(losses.size() == 40);
  double first10 = 0, all = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (i < 10) first10 += losses[i];
    all += losses[i];
  }
  first10 /= 10;
  all /= losses.size();
  CHECK(all < first10);
}

TEST_CASE("config JSON round trip") {
  TrainConfig cfg = tiny_meta_config(3);
  cfg.metric = fsmb::Metric::sq_euclidean;
  cfg.tau_init = 0.25f;
  cfg.train_cap_per_class = 7;
  const auto text = fsmb::train_config_to_json(cfg);
  const TrainConfig back = fsmb::train_config_from_json(text);
  CHECK(back.stage == TrainConfig::Stage::meta);
  CHECK(back.epochs == 3);
  CHECK(back.batches_per_epoch == cfg.batches_per_epoch);
  CHECK(back.metric == fsmb::Metric::sq_euclidean);
  CHECK(back.tau_init.value() == 0.25f);
  CHECK(back.train_cap_per_class == 7);
  CHECK(back.encoder.hidden_dims == cfg.encoder.hidden_dims);
  CHECK_THROWS_AS(fsmb::train_config_from_json("{bad"), fsmb::ConfigError);
  CHECK_THROWS_AS(fsmb::train_config_from_json(R"({"stage":"foo"})"), fsmb::ConfigError);
}

TEST_CASE("invalid configs are rejected before training") {
  const TinyWorld w = tiny_world();
  TrainConfig cfg = tiny_cls_config();
  cfg.momentum = 1.5;
  CHECK_THROWS_AS(fsmb::train_classification(w.ds, w.split, cfg), fsmb::ConfigError);
  TrainConfig m = tiny_meta_config();
  m.episode_spec.n_way = 100;  // more ways than base classes
  CHECK_THROWS_AS(fsmb::train_meta(std::nullopt, w.ds, w.split, m), fsmb::SamplingError);
}
