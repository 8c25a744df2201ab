#include "fsmb/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "fsmb/optim.hpp"
#include "json.hpp"

namespace fsmb {

void TrainConfig::validate() const {
  if (!(lr >= 0)) throw ConfigError("train config: lr must be >= 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("train config: momentum must be in [0, 1)");
  if (weight_decay < 0) throw ConfigError("train config: weight_decay must be >= 0");
  if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (stage == Stage::meta) {
    if (batches_per_epoch < 1) throw ConfigError("train config: batches_per_epoch must be >= 1");
    episode_spec.validate();
  }
  eval_spec.validate();
  if (eval_tasks < 1) throw ConfigError("train config: eval_tasks must be >= 1");
}

TrainConfig default_classification_config(int epochs) {
  TrainConfig cfg;
  cfg.stage = TrainConfig::Stage::classification;
  cfg.epochs = epochs;
  cfg.batch_size = 64;
  cfg.lr = 0.1;
  cfg.lr_decay_epochs = {static_cast<int>(epochs * 0.6), static_cast<int>(epochs * 0.8)};
  cfg.lr_decay_factor = 0.1;
  cfg.momentum = 0.9;
  cfg.weight_decay = 5e-4;
  return cfg;
}

TrainConfig default_meta_config(int epochs) {
  TrainConfig cfg;
  cfg.stage = TrainConfig::Stage::meta;
  cfg.epochs = epochs;
  cfg.batches_per_epoch = 200;
  cfg.batch_size = 4;
  cfg.lr = 0.001;
  cfg.lr_decay_epochs = {};
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0;
  return cfg;
}

// ---------------------------------------------------------------------------
// config JSON
// ---------------------------------------------------------------------------

std::string train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["stage"] = cfg.stage == TrainConfig::Stage::classification ? "classification" : "meta";
  j["epochs"] = cfg.epochs;
  j["batches_per_epoch"] = cfg.batches_per_epoch;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["lr_decay_epochs"] = cfg.lr_decay_epochs;
  j["lr_decay_factor"] = cfg.lr_decay_factor;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["episode_spec"] = {{"n_way", cfg.episode_spec.n_way},
                       {"k_shot", cfg.episode_spec.k_shot},
                       {"q_query", cfg.episode_spec.q_query}};
  j["head"] = cfg.head == TrainConfig::Head::linear ? "linear" : "cosine";
  j["metric"] = metric_name(cfg.metric);
  if (cfg.tau_init) j["tau_init"] = *cfg.tau_init;
  j["seed"] = cfg.seed;
  j["eval_spec"] = {{"n_way", cfg.eval_spec.n_way},
                    {"k_shot", cfg.eval_spec.k_shot},
                    {"q_query", cfg.eval_spec.q_query}};
  j["eval_tasks"] = cfg.eval_tasks;
  j["eval_seed"] = cfg.eval_seed;
  j["train_cap_per_class"] = cfg.train_cap_per_class;
  j["encoder"] = {{"input_dim", cfg.encoder.input_dim},
                  {"hidden_dims", cfg.encoder.hidden_dims},
                  {"embed_dim", cfg.encoder.embed_dim}};
  return j.dump(2) + "\n";
}

static EpisodeSpec episode_spec_from_json(const nlohmann::json& j, const EpisodeSpec& dflt) {
  EpisodeSpec s = dflt;
  s.n_way = j.value("n_way", s.n_way);
  s.k_shot = j.value("k_shot", s.k_shot);
  s.q_query = j.value("q_query", s.q_query);
  return s;
}

TrainConfig train_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: invalid JSON: ") + e.what());
  }
  try {
    const std::string stage = j.value("stage", "classification");
    TrainConfig cfg = stage == "meta" ? default_meta_config() : default_classification_config();
    if (stage != "meta" && stage != "classification") {
      throw ConfigError("train config: unknown stage '" + stage + "'");
    }
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batches_per_epoch = j.value("batches_per_epoch", cfg.batches_per_epoch);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr = j.value("lr", cfg.lr);
    if (j.contains("lr_decay_epochs")) {
      cfg.lr_decay_epochs = j.at("lr_decay_epochs").get<std::vector<int>>();
    } else if (stage == "classification") {
      cfg.lr_decay_epochs = {static_cast<int>(cfg.epochs * 0.6), static_cast<int>(cfg.epochs * 0.8)};
    }
    cfg.lr_decay_factor = j.value("lr_decay_factor", cfg.lr_decay_factor);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    if (j.contains("episode_spec")) {
      cfg.episode_spec = episode_spec_from_json(j.at("episode_spec"), cfg.episode_spec);
    }
    const std::string head = j.value("head", "linear");
    if (head == "linear") cfg.head = TrainConfig::Head::linear;
    else if (head == "cosine") cfg.head = TrainConfig::Head::cosine;
    else throw ConfigError("train config: unknown head '" + head + "'");
    cfg.metric = metric_from_name(j.value("metric", "cosine"));
    if (j.contains("tau_init")) cfg.tau_init = j.at("tau_init").get<float>();
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("eval_spec")) {
      cfg.eval_spec = episode_spec_from_json(j.at("eval_spec"), cfg.eval_spec);
    }
    cfg.eval_tasks = j.value("eval_tasks", cfg.eval_tasks);
    cfg.eval_seed = j.value("eval_seed", cfg.eval_seed);
    cfg.train_cap_per_class = j.value("train_cap_per_class", cfg.train_cap_per_class);
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      cfg.encoder.input_dim = e.value("input_dim", cfg.encoder.input_dim);
      if (e.contains("hidden_dims")) {
        cfg.encoder.hidden_dims = e.at("hidden_dims").get<std::vector<std::uint32_t>>();
      }
      cfg.encoder.embed_dim = e.value("embed_dim", cfg.encoder.embed_dim);
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: bad field: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// shared pieces
// ---------------------------------------------------------------------------

namespace {

double schedule_lr(const TrainConfig& cfg, int epoch) {
  double lr = cfg.lr;
  for (int at : cfg.lr_decay_epochs) {
    if (epoch >= at) lr *= cfg.lr_decay_factor;
  }
  return lr;
}

struct EpochEvals {
  EvalResult base_gen, novel_gen, val;
  bool has_val = false;
};

EpochEvals run_epoch_evals(const Encoder& enc, std::optional<float> tau, Metric metric,
                           const FewShotDataset& ds, const SplitSpec& split,
                           const TrainConfig& cfg) {
  EpochEvals ev;
  ev.base_gen = evaluate(enc, tau, ds, pools_base_holdout(ds, split), cfg.eval_spec, cfg.eval_seed,
                         cfg.eval_tasks, metric, "base_unseen");
  ev.novel_gen = evaluate(enc, tau, ds, pools_all(ds, split.novel_class_ids), cfg.eval_spec,
                          cfg.eval_seed, cfg.eval_tasks, metric, "novel");
  if (!split.val_class_ids.empty()) {
    ev.val = evaluate(enc, tau, ds, pools_all(ds, split.val_class_ids), cfg.eval_spec,
                      cfg.eval_seed, cfg.eval_tasks, metric, "val");
    ev.has_val = true;
  }
  return ev;
}

void emit_epoch(const TrainIO& io, const MetricsRecord& rec, bool first_write) {
  if (!io.out_dir.empty()) {
    const auto dir = std::filesystem::path(io.out_dir);
    write_metrics_jsonl({rec}, (dir / "metrics.jsonl").string(), !first_write);
    if (first_write) {
      write_metrics_csv({rec}, (dir / "metrics.csv").string(), false);
    } else {
      write_metrics_csv({rec}, (dir / "metrics.csv").string(), true);
    }
  }
  if (io.verbose) {
    std::string tau_part;
    if (rec.tau) tau_part = "  tau " + std::to_string(*rec.tau);
    std::printf("epoch %3d  loss %.4f  acc %6.2f%%  base %6.2f%%  novel %6.2f%%  val %6.2f%%%s\n",
                rec.epoch, rec.train_loss, rec.train_acc, rec.base_gen.mean_accuracy,
                rec.novel_gen.mean_accuracy, rec.val.mean_accuracy, tau_part.c_str());
    std::fflush(stdout);
  }
}

std::vector<std::uint8_t> weight_decay_mask(const std::vector<Tensor*>& params) {
  // decay applies to rank-2 weights only; biases and scalars are exempt
  std::vector<std::uint8_t> mask(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) mask[i] = params[i]->rank() == 2 ? 1 : 0;
  return mask;
}

void clamp_tau(Tensor& tau) {
  auto& v = tau.mutable_values();
  if (v[0] < kTauFloor) v[0] = kTauFloor;
}

}  // namespace

// ---------------------------------------------------------------------------
// classification stage
// ---------------------------------------------------------------------------

ClassificationResult train_classification(const FewShotDataset& ds, const SplitSpec& split,
                                          const TrainConfig& cfg, const TrainIO& io,
                                          const Checkpoint* resume) {
  cfg.validate();
  split.validate(ds);
  if (split.base_class_ids.empty()) throw ConfigError("classification: base split is empty");
  if (cfg.stage != TrainConfig::Stage::classification) {
    throw ConfigError("train_classification called with a meta-stage config");
  }
  EncoderDescriptor desc = cfg.encoder;
  if (desc.input_dim == 0) desc.input_dim = ds.sample_dim;
  if (desc.input_dim != ds.sample_dim) {
    throw ConfigError("classification: encoder input_dim does not match dataset sample_dim");
  }
  desc.validate();

  const auto train_pools = pools_train(ds, split, cfg.train_cap_per_class);
  const std::uint32_t num_base = static_cast<std::uint32_t>(train_pools.size());
  // flat list of (pool position, sample index); within-training labels are
  // pool positions
  std::vector<std::pair<std::uint32_t, std::uint32_t>> items;
  for (std::uint32_t p = 0; p < num_base; ++p) {
    for (std::uint32_t idx : train_pools[p].indices) items.emplace_back(p, idx);
  }
  if (items.empty()) throw ConfigError("classification: training pool is empty");

  Encoder encoder;
  ClassifierHead head;
  SgdState opt;
  int start_epoch = 0;
  double best_val = -1.0;
  int best_epoch = -1;
  Encoder best_encoder;
  ClassifierHead best_head;
  bool has_best = false;

  if (resume) {
    if (!resume->train || resume->train->stage != 0) {
      throw ConfigError("resume checkpoint does not hold classification training state");
    }
    if (resume->train->seed != cfg.seed) {
      throw ConfigError("resume checkpoint seed does not match config seed");
    }
    encoder = resume->encoder.clone();
    if (!resume->head) throw ConfigError("resume checkpoint is missing the classifier head");
    head = clone_head(*resume->head);
    opt.velocity = resume->train->velocities;
    start_epoch = static_cast<int>(resume->train->next_epoch);
    best_val = resume->train->best_val_acc;
    best_epoch = static_cast<int>(resume->train->best_epoch);
    has_best = resume->train->has_best;
    if (has_best) {
      best_encoder = resume->train->best_encoder.clone();
      best_head = clone_head(*resume->train->best_head);
    }
  } else {
    encoder = init_encoder<float>(desc, cfg.seed);
    if (cfg.head == TrainConfig::Head::linear) {
      head = init_linear_head<float>(num_base, desc.embed_dim, cfg.seed);
    } else {
      head = init_cosine_head<float>(num_base, desc.embed_dim, cfg.seed);
    }
  }

  std::vector<Tensor*> params = encoder.parameters();
  for (auto* p : head_parameters(head)) params.push_back(p);
  const auto wd_mask = weight_decay_mask(params);

  const std::uint32_t dim = ds.sample_dim;
  std::vector<MetricsRecord> metrics;

  auto save_state = [&](int next_epoch) {
    if (io.out_dir.empty()) return;
    const auto dir = std::filesystem::path(io.out_dir);
    Checkpoint last;
    last.encoder = encoder.clone();
    last.head = clone_head(head);
    TrainState ts;
    ts.stage = 0;
    ts.seed = cfg.seed;
    ts.next_epoch = static_cast<std::uint32_t>(next_epoch);
    ts.velocities = opt.velocity;
    ts.best_val_acc = best_val;
    ts.best_epoch = static_cast<std::uint32_t>(std::max(best_epoch, 0));
    ts.has_best = has_best;
    if (has_best) {
      ts.best_encoder = best_encoder.clone();
      ts.best_head = clone_head(best_head);
    }
    last.train = std::move(ts);
    save_checkpoint(last, (dir / "checkpoint_last.fsck").string());
    Checkpoint best;
    best.encoder = has_best ? best_encoder.clone() : encoder.clone();
    best.head = clone_head(has_best ? best_head : head);
    save_checkpoint(best, (dir / "checkpoint_best.fsck").string());
  };

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = schedule_lr(cfg, epoch);
    auto order = items;
    Rng shuffle_rng = Rng::stream(cfg.seed, "cls-shuffle", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      const std::size_t b = std::min<std::size_t>(cfg.batch_size, order.size() - pos);
      std::vector<float> batch(b * dim);
      std::vector<std::int32_t> labels(b);
      for (std::size_t i = 0; i < b; ++i) {
        const auto [pool_pos, sample_idx] = order[pos + i];
        const ClassRecord& cls = ds.classes[train_pools[pool_pos].class_id];
        std::memcpy(batch.data() + i * dim, cls.sample(sample_idx, dim), dim * sizeof(float));
        labels[i] = static_cast<std::int32_t>(pool_pos);
      }
      Tensor x = Tensor::from_values({b, dim}, std::move(batch));
      Tensor emb = encoder.forward(x);
      Tensor logits = classifier_logits(head, emb);
      Tensor loss = softmax_cross_entropy(logits, labels);

      for (auto* p : params) p->zero_grad();
      loss.backward();
      sgd_step(params, opt, lr, cfg.momentum, cfg.weight_decay, wd_mask);
      if (std::holds_alternative<CosineHead>(head)) {
        clamp_tau(std::get<CosineHead>(head).tau_cls);
      }

      loss_sum += static_cast<double>(loss.item()) * b;
      const auto pred = argmax_rows(logits);
      for (std::size_t i = 0; i < b; ++i) {
        if (pred[i] == labels[i]) ++correct;
      }
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / items.size();
    rec.train_acc = 100.0 * static_cast<double>(correct) / items.size();
    const EpochEvals ev = run_epoch_evals(encoder, std::nullopt, Metric::cosine, ds, split, cfg);
    rec.base_gen = ev.base_gen;
    rec.novel_gen = ev.novel_gen;
    rec.val = ev.val;
    metrics.push_back(rec);

    if (ev.has_val && ev.val.mean_accuracy > best_val) {
      best_val = ev.val.mean_accuracy;
      best_epoch = epoch;
      best_encoder = encoder.clone();
      best_head = clone_head(head);
      has_best = true;
    }
    emit_epoch(io, rec, epoch == 0);
    save_state(epoch + 1);
  }

  ClassificationResult res;
  res.encoder_last = encoder;
  res.head_last = head;
  res.encoder_best = has_best ? best_encoder : encoder;
  res.head_best = has_best ? best_head : head;
  res.metrics = std::move(metrics);
  res.best_val_acc = best_val;
  res.best_epoch = best_epoch;
  return res;
}

// ---------------------------------------------------------------------------
// meta stage
// ---------------------------------------------------------------------------

MetaResult train_meta(const std::optional<Encoder>& init, const FewShotDataset& ds,
                      const SplitSpec& split, const TrainConfig& cfg, const TrainIO& io,
                      const Checkpoint* resume) {
  cfg.validate();
  split.validate(ds);
  if (cfg.stage != TrainConfig::Stage::meta) {
    throw ConfigError("train_meta called with a classification-stage config");
  }
  const auto train_pools = pools_train(ds, split, cfg.train_cap_per_class);
  if (train_pools.size() < static_cast<std::size_t>(cfg.episode_spec.n_way)) {
    throw SamplingError("meta: base split has " + std::to_string(train_pools.size()) +
                        " classes, episodes need " + std::to_string(cfg.episode_spec.n_way));
  }

  Encoder encoder;
  MetricConfig metric_cfg;
  SgdState opt;
  int start_epoch = 0;
  double best_val = -1.0;
  int best_epoch = -1;
  Encoder best_encoder;
  float best_tau = 0.0f;
  bool has_best = false;

  if (resume) {
    if (!resume->train || resume->train->stage != 1) {
      throw ConfigError("resume checkpoint does not hold meta training state");
    }
    if (resume->train->seed != cfg.seed) {
      throw ConfigError("resume checkpoint seed does not match config seed");
    }
    if (!resume->tau) throw ConfigError("resume checkpoint is missing tau");
    encoder = resume->encoder.clone();
    metric_cfg.metric = resume->tau->metric;
    metric_cfg.tau = Tensor::scalar(resume->tau->value).set_requires_grad(true);
    metric_cfg.tau_init = resume->tau->value;
    opt.velocity = resume->train->velocities;
    start_epoch = static_cast<int>(resume->train->next_epoch);
    best_val = resume->train->best_val_acc;
    best_epoch = static_cast<int>(resume->train->best_epoch);
    has_best = resume->train->has_best;
    if (has_best) {
      best_encoder = resume->train->best_encoder.clone();
      best_tau = resume->train->best_tau->value;
    }
  } else {
    if (init) {
      encoder = init->clone();
    } else {
      // from-scratch ablation: no classification training stage
      EncoderDescriptor desc = cfg.encoder;
      if (desc.input_dim == 0) desc.input_dim = ds.sample_dim;
      desc.validate();
      encoder = init_encoder<float>(desc, cfg.seed);
    }
    metric_cfg = make_metric_config<float>(cfg.metric, cfg.tau_init);
  }
  if (encoder.input_dim() != ds.sample_dim) {
    throw ConfigError("meta: encoder input_dim does not match dataset sample_dim");
  }

  std::vector<Tensor*> params = encoder.parameters();
  params.push_back(&metric_cfg.tau);
  const auto wd_mask = weight_decay_mask(params);  // tau is rank-1: no decay

  std::vector<MetricsRecord> metrics;

  auto save_state = [&](int next_epoch) {
    if (io.out_dir.empty()) return;
    const auto dir = std::filesystem::path(io.out_dir);
    Checkpoint last;
    last.encoder = encoder.clone();
    last.tau = TauState{metric_cfg.metric, metric_cfg.tau.item()};
    TrainState ts;
    ts.stage = 1;
    ts.seed = cfg.seed;
    ts.next_epoch = static_cast<std::uint32_t>(next_epoch);
    ts.velocities = opt.velocity;
    ts.best_val_acc = best_val;
    ts.best_epoch = static_cast<std::uint32_t>(std::max(best_epoch, 0));
    ts.has_best = has_best;
    if (has_best) {
      ts.best_encoder = best_encoder.clone();
      ts.best_tau = TauState{metric_cfg.metric, best_tau};
    }
    last.train = std::move(ts);
    save_checkpoint(last, (dir / "checkpoint_last.fsck").string());
    Checkpoint best;
    best.encoder = has_best ? best_encoder.clone() : encoder.clone();
    best.tau = TauState{metric_cfg.metric, has_best ? best_tau : metric_cfg.tau.item()};
    save_checkpoint(best, (dir / "checkpoint_best.fsck").string());
  };

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = schedule_lr(cfg, epoch);
    double loss_sum = 0.0;
    std::size_t query_correct = 0, query_total = 0;

    for (int step = 0; step < cfg.batches_per_epoch; ++step) {
      const std::uint64_t step_key =
          static_cast<std::uint64_t>(epoch) * cfg.batches_per_epoch + step;
      Rng rng = Rng::stream(cfg.seed, "meta-episodes", step_key);

      Tensor batch_loss;
      for (int t = 0; t < cfg.batch_size; ++t) {
        const Episode ep = sample_episode(ds, train_pools, cfg.episode_spec, rng);
        auto fwd = episode_forward(ep, encoder, metric_cfg);
        batch_loss = t == 0 ? fwd.loss : add(batch_loss, fwd.loss);
        query_correct += fwd.query_correct;
        query_total += fwd.query_total;
      }
      Tensor loss = scale(batch_loss, 1.0f / static_cast<float>(cfg.batch_size));

      for (auto* p : params) p->zero_grad();
      loss.backward();
      sgd_step(params, opt, lr, cfg.momentum, cfg.weight_decay, wd_mask);
      clamp_tau(metric_cfg.tau);
      loss_sum += loss.item();
      if (io.on_step) io.on_step(epoch, step, loss.item());
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / cfg.batches_per_epoch;
    rec.train_acc = query_total ? 100.0 * static_cast<double>(query_correct) / query_total : 0.0;
    rec.tau = metric_cfg.tau.item();
    const EpochEvals ev = run_epoch_evals(encoder, metric_cfg.tau.item(), metric_cfg.metric, ds,
                                          split, cfg);
    rec.base_gen = ev.base_gen;
    rec.novel_gen = ev.novel_gen;
    rec.val = ev.val;
    metrics.push_back(rec);

    if (ev.has_val && ev.val.mean_accuracy > best_val) {
      best_val = ev.val.mean_accuracy;
      best_epoch = epoch;
      best_encoder = encoder.clone();
      best_tau = metric_cfg.tau.item();
      has_best = true;
    }
    emit_epoch(io, rec, epoch == 0);
    save_state(epoch + 1);
  }

  MetaResult res;
  res.encoder_last = encoder;
  res.encoder_best = has_best ? best_encoder : encoder;
  res.tau_last = metric_cfg.tau.item();
  res.tau_best = has_best ? best_tau : metric_cfg.tau.item();
  res.metric = metric_cfg.metric;
  res.metrics = std::move(metrics);
  res.best_val_acc = best_val;
  res.best_epoch = best_epoch;
  return res;
}

}  // namespace fsmb
