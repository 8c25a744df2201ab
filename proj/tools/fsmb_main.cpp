// fsmb: few-shot learning with classifier-baseline and meta-baseline at desk
// scale. Subcommands cover dataset generation, splitting, the two training
// stages, episodic evaluation, the diagnostic ablations and plotting.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 runtime numeric
// error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsmb/checkpoint.hpp"
#include "fsmb/dataset.hpp"
#include "fsmb/episodes.hpp"
#include "fsmb/eval.hpp"
#include "fsmb/experiments.hpp"
#include "fsmb/manifest.hpp"
#include "fsmb/metrics.hpp"
#include "fsmb/svg_plot.hpp"
#include "fsmb/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace fsmb;

namespace {

[[noreturn]] void fail(int code, const std::string& kind, const std::string& msg) {
  std::fprintf(stderr, "error[%s]: %s\n", kind.c_str(), msg.c_str());
  std::exit(code);
}

SplitCounts parse_counts(const std::string& text) {
  SplitCounts c;
  if (std::sscanf(text.c_str(), "%u,%u,%u", &c.base, &c.val, &c.novel) != 3) {
    throw ConfigError("expected fractions as three comma-separated counts, got '" + text + "'");
  }
  return c;
}

std::vector<ClassPool> pools_for(const FewShotDataset& ds, const SplitSpec& split,
                                 const std::string& name) {
  if (name == "novel") return pools_all(ds, split.novel_class_ids);
  if (name == "val") return pools_all(ds, split.val_class_ids);
  if (name == "base_unseen") return pools_base_holdout(ds, split);
  if (name == "base_train") return pools_train(ds, split);
  throw ConfigError("unknown split name '" + name +
                    "' (expected novel, val, base_unseen or base_train)");
}

struct TrainPaths {
  std::string data;
  std::string split;
  std::string init_checkpoint;  // meta only
};

// train command config file: {"data": ..., "split": ..., "train": {...},
// "init_checkpoint": ...}
std::pair<TrainPaths, TrainConfig> load_train_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': invalid JSON: " + e.what());
  }
  TrainPaths paths;
  paths.data = j.value("data", "");
  paths.split = j.value("split", "");
  paths.init_checkpoint = j.value("init_checkpoint", "");
  TrainConfig cfg = train_config_from_json(j.value("train", nlohmann::json::object()).dump());
  return {paths, cfg};
}

std::string resolved_train_json(const TrainPaths& paths, const TrainConfig& cfg) {
  nlohmann::json j;
  j["data"] = paths.data;
  j["split"] = paths.split;
  if (!paths.init_checkpoint.empty()) j["init_checkpoint"] = paths.init_checkpoint;
  j["train"] = nlohmann::json::parse(train_config_to_json(cfg));
  return j.dump(2) + "\n";
}

void write_train_manifest(const std::string& command, const TrainPaths& paths,
                          const TrainConfig& cfg, const std::string& out_dir) {
  ExperimentManifest m;
  m.command = command;
  m.config_json = resolved_train_json(paths, cfg);
  m.seed = cfg.seed;
  m.out_dir = out_dir;
  m.inputs.push_back({paths.data, file_hash_hex(paths.data)});
  m.inputs.push_back({paths.split, file_hash_hex(paths.split)});
  if (!paths.init_checkpoint.empty()) {
    m.inputs.push_back({paths.init_checkpoint, file_hash_hex(paths.init_checkpoint)});
  }
  m.outputs = {"metrics.jsonl", "metrics.csv", "checkpoint_last.fsck", "checkpoint_best.fsck"};
  fs::create_directories(out_dir);
  write_manifest(m, (fs::path(out_dir) / "manifest.json").string());
}

int run_train(const std::string& command, const TrainPaths& paths, TrainConfig cfg,
              const std::string& out_dir, bool resume, bool verbose) {
  if (paths.data.empty() || paths.split.empty()) {
    throw ConfigError(command + ": --data and --split (or config entries) are required");
  }
  const FewShotDataset ds = load_dataset(paths.data);
  const SplitSpec split = split_spec_from_json(read_text_file(paths.split));

  write_train_manifest(command, paths, cfg, out_dir);
  TrainIO io;
  io.out_dir = out_dir;
  io.verbose = verbose;

  Checkpoint resume_ck;
  const Checkpoint* resume_ptr = nullptr;
  if (resume) {
    resume_ck = load_checkpoint((fs::path(out_dir) / "checkpoint_last.fsck").string());
    resume_ptr = &resume_ck;
  }

  if (command == "train-cls") {
    cfg.stage = TrainConfig::Stage::classification;
    const auto res = train_classification(ds, split, cfg, io, resume_ptr);
    std::printf("best val %.2f%% at epoch %d\n", res.best_val_acc, res.best_epoch);
  } else {
    cfg.stage = TrainConfig::Stage::meta;
    std::optional<Encoder> init;
    if (!paths.init_checkpoint.empty()) {
      init = load_checkpoint(paths.init_checkpoint).encoder;
    }
    const auto res = train_meta(init, ds, split, cfg, io, resume_ptr);
    std::printf("best val %.2f%% at epoch %d (tau %.4f)\n", res.best_val_acc, res.best_epoch,
                res.tau_best);
  }
  return 0;
}

int run_from_manifest(const std::string& manifest_path, const std::string& out_dir, bool verbose);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"few-shot classification: whole-classification pre-training, nearest-centroid "
               "meta-learning and the generalization diagnostics"};
  app.require_subcommand(1);

  try {
    // ----- gen-data -----
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset (FSDS + manifest)");
    static std::string gen_spec, gen_out;
    static std::uint64_t gen_seed = 0;
    static bool gen_seed_set = false;
    gen->add_option("--spec", gen_spec, "synthetic spec JSON file (defaults when omitted)");
    gen->add_option("--out", gen_out, "output .fsds path")->required();
    gen->add_option("--seed", gen_seed, "override the spec seed")->each([](const std::string&) {
      gen_seed_set = true;
    });

    // ----- split -----
    auto* split_cmd = app.add_subcommand("split", "assign classes to base/val/novel splits");
    static std::string sp_data, sp_mode = "super", sp_fracs = "8,2,2", sp_out;
    static std::uint64_t sp_seed = 0;
    static double sp_holdout = 0.1;
    split_cmd->add_option("--data", sp_data, "dataset .fsds")->required();
    split_cmd->add_option("--mode", sp_mode, "super | shuffled");
    split_cmd->add_option("--fractions", sp_fracs,
                          "base,val,novel counts (super-categories in super mode, classes in "
                          "shuffled mode)");
    split_cmd->add_option("--seed", sp_seed, "split seed");
    split_cmd->add_option("--holdout", sp_holdout, "per-base-class unseen-image fraction");
    split_cmd->add_option("--out", sp_out, "output split JSON")->required();

    // ----- train-cls / train-meta -----
    static std::string tr_config, tr_data, tr_split, tr_init, tr_out;
    static bool tr_resume = false, tr_verbose = false;
    static std::optional<std::uint64_t> tr_seed;
    for (const char* name : {"train-cls", "train-meta"}) {
      auto* cmd = app.add_subcommand(name, std::string(name) == "train-cls"
                                               ? "whole-classification training stage"
                                               : "meta-learning stage (nearest-centroid)");
      cmd->add_option("--config", tr_config, "train config JSON");
      cmd->add_option("--data", tr_data, "dataset .fsds (overrides config)");
      cmd->add_option("--split", tr_split, "split JSON (overrides config)");
      if (std::string(name) == "train-meta") {
        cmd->add_option("--init", tr_init, "initial encoder checkpoint (omit to train from scratch)");
      }
      cmd->add_option("--out", tr_out, "output directory")->required();
      cmd->add_option_function<std::uint64_t>(
          "--seed", [](const std::uint64_t& v) { tr_seed = v; }, "override config seed");
      cmd->add_flag("--resume", tr_resume, "resume from checkpoint_last.fsck in --out");
      cmd->add_flag("--verbose", tr_verbose, "print per-epoch metrics");
    }

    // ----- eval -----
    auto* ev = app.add_subcommand("eval", "episodic evaluation of a checkpoint");
    static std::string ev_ck, ev_data, ev_split, ev_split_name = "novel", ev_metric = "cosine",
                       ev_out;
    static int ev_n = 5, ev_k = 1, ev_q = 15, ev_tasks = kDefaultEvalTasks;
    static std::uint64_t ev_seed = kDefaultEvalSeed;
    static bool ev_use_tau = false;
    ev->add_option("--checkpoint", ev_ck)->required();
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--split", ev_split)->required();
    ev->add_option("--split-name", ev_split_name, "novel | val | base_unseen | base_train");
    ev->add_option("--n", ev_n, "ways");
    ev->add_option("--k", ev_k, "shots");
    ev->add_option("--q", ev_q, "queries per way");
    ev->add_option("--tasks", ev_tasks, "number of tasks (default 800)");
    ev->add_option("--seed", ev_seed, "evaluation task-stream seed");
    ev->add_option("--metric", ev_metric, "cosine | sq_euclidean");
    ev->add_flag("--scaled", ev_use_tau, "apply the checkpoint temperature to the logits");
    ev->add_option("--out", ev_out, "also append the result as a JSONL line to this file");

    // ----- ablate -----
    auto* ab = app.add_subcommand("ablate", "one-command diagnostic experiments");
    static std::string ab_kind, ab_config, ab_out;
    ab->add_option("kind", ab_kind, "metric | scratch | dataset-sweep")->required();
    ab->add_option("--config", ab_config, "experiment config JSON (defaults when omitted)");
    ab->add_option("--out", ab_out, "output directory")->required();

    // ----- plot -----
    auto* pl = app.add_subcommand("plot", "render generalization curves from a metrics CSV");
    static std::string pl_curves, pl_out;
    pl->add_option("--curves", pl_curves, "metrics.csv from a training run")->required();
    pl->add_option("--out", pl_out, "output .svg")->required();

    // ----- dump-episodes -----
    auto* de = app.add_subcommand("dump-episodes", "episode audit dump (JSONL)");
    static std::string de_data, de_split, de_split_name = "novel", de_out;
    static int de_n = 5, de_k = 1, de_q = 15, de_count = 10;
    static std::uint64_t de_seed = kDefaultEvalSeed;
    de->add_option("--data", de_data)->required();
    de->add_option("--split", de_split)->required();
    de->add_option("--split-name", de_split_name);
    de->add_option("--n", de_n);
    de->add_option("--k", de_k);
    de->add_option("--q", de_q);
    de->add_option("--count", de_count);
    de->add_option("--seed", de_seed);
    de->add_option("--out", de_out, "output JSONL")->required();

    // ----- rerun -----
    auto* rr = app.add_subcommand("rerun", "reproduce an experiment from its manifest");
    static std::string rr_manifest, rr_out;
    static bool rr_verbose = false;
    rr->add_option("--manifest", rr_manifest)->required();
    rr->add_option("--out", rr_out, "output directory (defaults to the manifest out_dir)");
    rr->add_flag("--verbose", rr_verbose);

    CLI11_PARSE(app, argc, argv);

    // ---------------- dispatch ----------------
    if (gen->parsed()) {
      SyntheticSpec spec =
          gen_spec.empty() ? SyntheticSpec{} : synthetic_spec_from_json(read_text_file(gen_spec));
      if (gen_seed_set) spec.seed = gen_seed;
      const FewShotDataset ds = generate_synthetic(spec);
      save_dataset(ds, gen_out);
      write_text_file(gen_out + ".manifest.json", synthetic_spec_to_json(spec));
      std::printf("wrote %s (%u classes, dim %u)\n", gen_out.c_str(), ds.num_classes(),
                  ds.sample_dim);
      return 0;
    }
    if (split_cmd->parsed()) {
      const FewShotDataset ds = load_dataset(sp_data);
      const SplitCounts counts = parse_counts(sp_fracs);
      SplitSpec split;
      if (sp_mode == "super") {
        split = split_by_supercategory(ds, counts, sp_seed, sp_holdout);
      } else if (sp_mode == "shuffled") {
        split = split_shuffled(ds, counts, sp_seed, sp_holdout);
      } else {
        throw ConfigError("unknown split mode '" + sp_mode + "'");
      }
      write_text_file(sp_out, split_spec_to_json(split));
      std::printf("wrote %s (base %zu, val %zu, novel %zu classes)\n", sp_out.c_str(),
                  split.base_class_ids.size(), split.val_class_ids.size(),
                  split.novel_class_ids.size());
      return 0;
    }
    for (const char* name : {"train-cls", "train-meta"}) {
      auto* cmd = app.get_subcommand(name);
      if (!cmd->parsed()) continue;
      TrainPaths paths;
      TrainConfig cfg = std::string(name) == "train-cls" ? default_classification_config()
                                                         : default_meta_config();
      if (!tr_config.empty()) std::tie(paths, cfg) = load_train_file(tr_config);
      if (!tr_data.empty()) paths.data = tr_data;
      if (!tr_split.empty()) paths.split = tr_split;
      if (!tr_init.empty()) paths.init_checkpoint = tr_init;
      if (tr_seed) cfg.seed = *tr_seed;
      return run_train(name, paths, cfg, tr_out, tr_resume, tr_verbose);
    }
    if (ev->parsed()) {
      const Checkpoint ck = load_checkpoint(ev_ck);
      const FewShotDataset ds = load_dataset(ev_data);
      const SplitSpec split = split_spec_from_json(read_text_file(ev_split));
      split.validate(ds);
      const EpisodeSpec spec{ev_n, ev_k, ev_q};
      std::optional<float> tau;
      if (ev_use_tau) {
        if (!ck.tau) throw ConfigError("--scaled requires a checkpoint holding a temperature");
        tau = ck.tau->value;
      }
      const EvalResult res =
          evaluate(ck.encoder, tau, ds, pools_for(ds, split, ev_split_name), spec, ev_seed,
                   ev_tasks, metric_from_name(ev_metric), ev_split_name);
      std::printf("%s\n", format_eval_line(res).c_str());
      if (!ev_out.empty()) {
        nlohmann::json j;
        j["split"] = res.split;
        j["n_way"] = res.spec.n_way;
        j["k_shot"] = res.spec.k_shot;
        j["q_query"] = res.spec.q_query;
        j["acc"] = res.mean_accuracy;
        j["ci95"] = res.ci95_halfwidth;
        j["tasks"] = res.num_tasks;
        j["metric"] = metric_name(res.metric);
        std::ofstream out(ev_out, std::ios::binary | std::ios::app);
        if (!out) throw ConfigError("cannot open '" + ev_out + "'");
        out << j.dump() << "\n";
      }
      return 0;
    }
    if (ab->parsed()) {
      ExperimentConfig cfg = ab_config.empty()
                                 ? default_experiment_config()
                                 : experiment_config_from_json(read_text_file(ab_config));
      fs::create_directories(ab_out);
      // manifest first, then results
      ExperimentManifest m;
      m.command = "ablate " + ab_kind;
      m.config_json = experiment_config_to_json(cfg);
      m.seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
      m.out_dir = ab_out;
      if (!ab_config.empty()) m.inputs.push_back({ab_config, file_hash_hex(ab_config)});
      m.outputs = {"table.txt", "results.json"};
      write_manifest(m, (fs::path(ab_out) / "manifest.json").string());

      std::string table;
      nlohmann::json results;
      if (ab_kind == "metric") {
        const auto r = run_metric_ablation(cfg);
        table = render_metric_table(r);
        for (const auto& [shot, acc] : r.acc) {
          for (std::size_t i = 0; i < r.rows.size(); ++i) {
            results[std::to_string(shot) + "-shot"][r.rows[i]] = acc[i];
          }
        }
      } else if (ab_kind == "scratch") {
        const auto r = run_scratch_ablation(cfg);
        table = render_scratch_table(r);
        for (const auto& [shot, rows] : r.rows) {
          auto& o = results[std::to_string(shot) + "-shot"];
          o["with_cls"] = {{"base_gen", rows.first.base_gen}, {"novel_gen", rows.first.novel_gen}};
          o["from_scratch"] = {{"base_gen", rows.second.base_gen},
                               {"novel_gen", rows.second.novel_gen}};
        }
      } else if (ab_kind == "dataset-sweep") {
        const auto r = run_dataset_property_sweep(cfg);
        table = render_sweep_table(r);
        for (const auto& [shot, cells] : r.cells) {
          auto& o = results[std::to_string(shot) + "-shot"];
          for (std::size_t i = 0; i < r.variants.size(); ++i) {
            o[r.variants[i]] = {{"classifier", cells[i].classifier},
                                {"meta", cells[i].meta},
                                {"delta", cells[i].delta}};
          }
        }
      } else {
        throw ConfigError("unknown ablation '" + ab_kind +
                          "' (expected metric, scratch or dataset-sweep)");
      }
      write_text_file((fs::path(ab_out) / "table.txt").string(), table);
      write_text_file((fs::path(ab_out) / "results.json").string(), results.dump(2) + "\n");
      std::printf("%s", table.c_str());
      return 0;
    }
    if (pl->parsed()) {
      plot_generalization_csv(pl_curves, pl_out);
      std::printf("wrote %s\n", pl_out.c_str());
      return 0;
    }
    if (de->parsed()) {
      const FewShotDataset ds = load_dataset(de_data);
      const SplitSpec split = split_spec_from_json(read_text_file(de_split));
      split.validate(ds);
      const EpisodeSpec spec{de_n, de_k, de_q};
      const auto eps =
          consistent_task_stream(ds, pools_for(ds, split, de_split_name), spec, de_seed, de_count);
      dump_episodes_jsonl(eps, de_out);
      std::printf("wrote %s (%d episodes)\n", de_out.c_str(), de_count);
      return 0;
    }
    if (rr->parsed()) {
      return run_from_manifest(rr_manifest, rr_out, rr_verbose);
    }
  } catch (const ConfigError& e) {
    fail(2, "config", e.what());
  } catch (const ContractError& e) {
    fail(2, "config", e.what());
  } catch (const FormatError& e) {
    fail(3, "data", e.what());
  } catch (const SamplingError& e) {
    fail(3, "data", e.what());
  } catch (const IndexError& e) {
    fail(3, "data", e.what());
  } catch (const DimensionError& e) {
    fail(4, "numeric", e.what());
  } catch (const DomainError& e) {
    fail(4, "numeric", e.what());
  } catch (const std::exception& e) {
    fail(4, "numeric", e.what());
  }
  return 0;
}

namespace {

int run_from_manifest(const std::string& manifest_path, const std::string& out_dir, bool verbose) {
  const ExperimentManifest m = read_manifest(manifest_path);
  for (const auto& in : m.inputs) {
    const std::string h = file_hash_hex(in.path);
    if (h != in.hash) {
      throw ConfigError("manifest input '" + in.path + "' hash mismatch: manifest " + in.hash +
                        ", file " + h);
    }
  }
  const std::string target = out_dir.empty() ? m.out_dir : out_dir;
  if (m.command == "train-cls" || m.command == "train-meta") {
    nlohmann::json j = nlohmann::json::parse(m.config_json);
    TrainPaths paths;
    paths.data = j.value("data", "");
    paths.split = j.value("split", "");
    paths.init_checkpoint = j.value("init_checkpoint", "");
    TrainConfig cfg = train_config_from_json(j.at("train").dump());
    return run_train(m.command, paths, cfg, target, /*resume=*/false, verbose);
  }
  throw ConfigError("manifest command '" + m.command + "' is not rerunnable");
}

}  // namespace
