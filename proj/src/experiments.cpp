#include "fsmb/experiments.hpp"

#include <array>
#include <cstdio>

#include "json.hpp"

namespace fsmb {

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  cfg.data.num_super_categories = 12;
  cfg.data.classes_per_super = 5;
  cfg.data.samples_per_class = 60;
  cfg.data.sample_dim = 32;
  cfg.data.super_center_scale = 2.0;
  cfg.data.class_center_scale = 1.0;
  cfg.data.within_class_noise = 0.6;

  cfg.encoder = EncoderDescriptor{0, {64}, 32};

  cfg.cls_cfg = default_classification_config(40);
  cfg.cls_cfg.lr = 0.05;
  cfg.cls_cfg.batch_size = 64;
  cfg.cls_cfg.eval_tasks = 100;

  cfg.meta_cfg = default_meta_config(15);
  cfg.meta_cfg.batches_per_epoch = 100;
  cfg.meta_cfg.eval_tasks = 100;

  cfg.scratch_cfg = cfg.meta_cfg;
  cfg.scratch_cfg.epochs = 30;
  return cfg;
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["data"] = nlohmann::json::parse(synthetic_spec_to_json(cfg.data));
  j["super_counts"] = {cfg.super_counts.base, cfg.super_counts.val, cfg.super_counts.novel};
  j["holdout"] = cfg.holdout;
  j["encoder"] = {{"input_dim", cfg.encoder.input_dim},
                  {"hidden_dims", cfg.encoder.hidden_dims},
                  {"embed_dim", cfg.encoder.embed_dim}};
  j["cls_cfg"] = nlohmann::json::parse(train_config_to_json(cfg.cls_cfg));
  j["meta_cfg"] = nlohmann::json::parse(train_config_to_json(cfg.meta_cfg));
  j["scratch_cfg"] = nlohmann::json::parse(train_config_to_json(cfg.scratch_cfg));
  j["seeds"] = cfg.seeds;
  j["shots"] = cfg.shots;
  j["eval_tasks"] = cfg.eval_tasks;
  j["eval_seed"] = cfg.eval_seed;
  j["small_cap"] = cfg.small_cap;
  return j.dump(2) + "\n";
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg = default_experiment_config();
  try {
    if (j.contains("data")) cfg.data = synthetic_spec_from_json(j.at("data").dump());
    if (j.contains("super_counts")) {
      const auto v = j.at("super_counts").get<std::vector<std::uint32_t>>();
      if (v.size() != 3) throw ConfigError("experiment config: super_counts needs 3 entries");
      cfg.super_counts = {v[0], v[1], v[2]};
    }
    cfg.holdout = j.value("holdout", cfg.holdout);
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      cfg.encoder.input_dim = e.value("input_dim", cfg.encoder.input_dim);
      if (e.contains("hidden_dims"))
        cfg.encoder.hidden_dims = e.at("hidden_dims").get<std::vector<std::uint32_t>>();
      cfg.encoder.embed_dim = e.value("embed_dim", cfg.encoder.embed_dim);
    }
    if (j.contains("cls_cfg")) cfg.cls_cfg = train_config_from_json(j.at("cls_cfg").dump());
    if (j.contains("meta_cfg")) cfg.meta_cfg = train_config_from_json(j.at("meta_cfg").dump());
    if (j.contains("scratch_cfg"))
      cfg.scratch_cfg = train_config_from_json(j.at("scratch_cfg").dump());
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("shots")) cfg.shots = j.at("shots").get<std::vector<int>>();
    cfg.eval_tasks = j.value("eval_tasks", cfg.eval_tasks);
    cfg.eval_seed = j.value("eval_seed", cfg.eval_seed);
    cfg.small_cap = j.value("small_cap", cfg.small_cap);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: bad field: ") + e.what());
  }
  return cfg;
}

namespace {

struct World {
  FewShotDataset ds;
  SplitSpec split;
};

World make_world(const ExperimentConfig& cfg, std::uint64_t seed, bool shuffled) {
  SyntheticSpec spec = cfg.data;
  spec.seed = seed;
  World w{generate_synthetic(spec), {}};
  if (shuffled) {
    const SplitCounts class_counts{cfg.super_counts.base * cfg.data.classes_per_super,
                                   cfg.super_counts.val * cfg.data.classes_per_super,
                                   cfg.super_counts.novel * cfg.data.classes_per_super};
    w.split = split_shuffled(w.ds, class_counts, seed, cfg.holdout);
  } else {
    w.split = split_by_supercategory(w.ds, cfg.super_counts, seed, cfg.holdout);
  }
  return w;
}

TrainConfig with_seed_and_encoder(TrainConfig cfg, const ExperimentConfig& exp,
                                  std::uint64_t seed) {
  cfg.seed = seed;
  cfg.encoder = exp.encoder;
  cfg.eval_seed = exp.eval_seed;
  return cfg;
}

double eval_novel(const ExperimentConfig& cfg, const World& w, const Encoder& enc,
                  std::optional<float> tau, int shot, Metric metric = Metric::cosine) {
  EpisodeSpec spec{5, shot, 15};
  return evaluate(enc, tau, w.ds, pools_all(w.ds, w.split.novel_class_ids), spec, cfg.eval_seed,
                  cfg.eval_tasks, metric, "novel")
      .mean_accuracy;
}

double eval_base_holdout(const ExperimentConfig& cfg, const World& w, const Encoder& enc,
                         std::optional<float> tau, int shot, Metric metric = Metric::cosine) {
  EpisodeSpec spec{5, shot, 15};
  return evaluate(enc, tau, w.ds, pools_base_holdout(w.ds, w.split), spec, cfg.eval_seed,
                  cfg.eval_tasks, metric, "base_unseen")
      .mean_accuracy;
}

}  // namespace

DatasetSweepResult run_dataset_property_sweep(const ExperimentConfig& cfg, bool include_sizes) {
  DatasetSweepResult result;
  struct Variant {
    std::string name;
    bool shuffled;
    std::uint32_t cap;
  };
  std::vector<Variant> variants;
  if (include_sizes) {
    variants = {{"super-small", false, cfg.small_cap},
                {"shuffled-small", true, cfg.small_cap},
                {"super-large", false, 0},
                {"shuffled-large", true, 0}};
  } else {
    variants = {{"super", false, 0}, {"shuffled", true, 0}};
  }
  for (const auto& v : variants) result.variants.push_back(v.name);
  for (int shot : cfg.shots) result.cells[shot].resize(variants.size());

  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const Variant& v = variants[vi];
    for (std::uint64_t seed : cfg.seeds) {
      const World w = make_world(cfg, seed, v.shuffled);

      TrainConfig cls = with_seed_and_encoder(cfg.cls_cfg, cfg, seed);
      cls.train_cap_per_class = v.cap;
      const auto cb = train_classification(w.ds, w.split, cls);

      for (int shot : cfg.shots) {
        TrainConfig meta = with_seed_and_encoder(cfg.meta_cfg, cfg, seed);
        meta.train_cap_per_class = v.cap;
        meta.episode_spec.k_shot = shot;
        meta.eval_spec.k_shot = shot;
        const auto mb = train_meta(cb.encoder_best, w.ds, w.split, meta);

        SweepCell& cell = result.cells[shot][vi];
        cell.classifier += eval_novel(cfg, w, cb.encoder_best, std::nullopt, shot);
        cell.meta += eval_novel(cfg, w, mb.encoder_best, mb.tau_best, shot);
      }
    }
    for (int shot : cfg.shots) {
      SweepCell& cell = result.cells[shot][vi];
      cell.classifier /= cfg.seeds.size();
      cell.meta /= cfg.seeds.size();
      cell.delta = cell.meta - cell.classifier;
    }
  }
  return result;
}

std::string render_sweep_table(const DatasetSweepResult& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-22s", "task / model");
  out += buf;
  for (const auto& v : r.variants) {
    std::snprintf(buf, sizeof(buf), " %14s", v.c_str());
    out += buf;
  }
  out += "\n";
  for (const auto& [shot, cells] : r.cells) {
    const std::array<const char*, 3> rows = {"classifier", "meta", "delta"};
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
      std::snprintf(buf, sizeof(buf), "%d-shot %-15s", shot, rows[ri]);
      out += buf;
      for (const auto& c : cells) {
        const double v = ri == 0 ? c.classifier : ri == 1 ? c.meta : c.delta;
        std::snprintf(buf, sizeof(buf), ri == 2 ? " %+14.2f" : " %14.2f", v);
        out += buf;
      }
      out += "\n";
    }
  }
  return out;
}

MetricAblationResult run_metric_ablation(const ExperimentConfig& cfg) {
  MetricAblationResult result;
  result.rows = {"classifier (cosine)", "classifier (sq-euclidean)", "meta (cosine)",
                 "meta (sq-euclidean)"};
  for (int shot : cfg.shots) result.acc[shot].assign(result.rows.size(), 0.0);

  for (std::uint64_t seed : cfg.seeds) {
    // shuffled split: the conventional random-split benchmark shape
    const World w = make_world(cfg, seed, true);

    TrainConfig cls = with_seed_and_encoder(cfg.cls_cfg, cfg, seed);
    const auto cb = train_classification(w.ds, w.split, cls);

    for (int shot : cfg.shots) {
      auto& acc = result.acc[shot];
      acc[0] += eval_novel(cfg, w, cb.encoder_best, std::nullopt, shot, Metric::cosine);
      acc[1] += eval_novel(cfg, w, cb.encoder_best, std::nullopt, shot, Metric::sq_euclidean);

      for (Metric metric : {Metric::cosine, Metric::sq_euclidean}) {
        TrainConfig meta = with_seed_and_encoder(cfg.meta_cfg, cfg, seed);
        meta.metric = metric;
        meta.episode_spec.k_shot = shot;
        meta.eval_spec.k_shot = shot;
        const auto mb = train_meta(cb.encoder_best, w.ds, w.split, meta);
        const std::size_t row = metric == Metric::cosine ? 2 : 3;
        acc[row] += eval_novel(cfg, w, mb.encoder_best, mb.tau_best, shot, metric);
      }
    }
  }
  for (auto& [shot, acc] : result.acc) {
    for (auto& a : acc) a /= cfg.seeds.size();
  }
  return result;
}

std::string render_metric_table(const MetricAblationResult& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-28s", "method");
  out += buf;
  for (const auto& [shot, acc] : r.acc) {
    std::snprintf(buf, sizeof(buf), " %8d-shot", shot);
    out += buf;
  }
  out += "\n";
  for (std::size_t ri = 0; ri < r.rows.size(); ++ri) {
    std::snprintf(buf, sizeof(buf), "%-28s", r.rows[ri].c_str());
    out += buf;
    for (const auto& [shot, acc] : r.acc) {
      std::snprintf(buf, sizeof(buf), " %13.2f", acc[ri]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

ScratchAblationResult run_scratch_ablation(const ExperimentConfig& cfg) {
  ScratchAblationResult result;
  for (int shot : cfg.shots) {
    result.rows[shot] = {ScratchAblationRow{}, ScratchAblationRow{}};
  }

  for (std::uint64_t seed : cfg.seeds) {
    // super-category split: the setting where class transferability matters
    const World w = make_world(cfg, seed, false);

    TrainConfig cls = with_seed_and_encoder(cfg.cls_cfg, cfg, seed);
    const auto cb = train_classification(w.ds, w.split, cls);

    for (int shot : cfg.shots) {
      TrainConfig meta = with_seed_and_encoder(cfg.meta_cfg, cfg, seed);
      meta.episode_spec.k_shot = shot;
      meta.eval_spec.k_shot = shot;
      const auto with_cls = train_meta(cb.encoder_best, w.ds, w.split, meta);

      TrainConfig scratch = with_seed_and_encoder(cfg.scratch_cfg, cfg, seed);
      scratch.episode_spec.k_shot = shot;
      scratch.eval_spec.k_shot = shot;
      const auto without_cls = train_meta(std::nullopt, w.ds, w.split, scratch);

      auto& [w_row, s_row] = result.rows[shot];
      w_row.base_gen += eval_base_holdout(cfg, w, with_cls.encoder_best, with_cls.tau_best, shot);
      w_row.novel_gen += eval_novel(cfg, w, with_cls.encoder_best, with_cls.tau_best, shot);
      s_row.base_gen +=
          eval_base_holdout(cfg, w, without_cls.encoder_best, without_cls.tau_best, shot);
      s_row.novel_gen += eval_novel(cfg, w, without_cls.encoder_best, without_cls.tau_best, shot);
    }
  }
  for (auto& [shot, rows] : result.rows) {
    for (auto* row : {&rows.first, &rows.second}) {
      row->base_gen /= cfg.seeds.size();
      row->novel_gen /= cfg.seeds.size();
    }
  }
  return result;
}

std::string render_scratch_table(const ScratchAblationResult& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-28s %12s %12s\n", "training", "base gen.", "novel gen.");
  out += buf;
  for (const auto& [shot, rows] : r.rows) {
    std::snprintf(buf, sizeof(buf), "%d-shot with cls-training    %12.2f %12.2f\n", shot,
                  rows.first.base_gen, rows.first.novel_gen);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%d-shot from scratch        %12.2f %12.2f\n", shot,
                  rows.second.base_gen, rows.second.novel_gen);
    out += buf;
  }
  return out;
}

std::vector<MeanCurvePoint> mean_generalization_curve(
    const std::vector<std::vector<MetricsRecord>>& runs) {
  std::vector<MeanCurvePoint> curve;
  if (runs.empty()) return curve;
  const std::size_t epochs = runs.front().size();
  for (const auto& run : runs) {
    if (run.size() != epochs) throw ContractError("curve runs must have equal epoch counts");
  }
  curve.resize(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    curve[e].epoch = runs.front()[e].epoch;
    for (const auto& run : runs) {
      curve[e].base_gen += run[e].base_gen.mean_accuracy;
      curve[e].novel_gen += run[e].novel_gen.mean_accuracy;
    }
    curve[e].base_gen /= runs.size();
    curve[e].novel_gen /= runs.size();
  }
  return curve;
}

}  // namespace fsmb
