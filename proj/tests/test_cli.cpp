// End-to-end tests that drive the fsmb binary. The binary path comes from
// the FSMB_CLI environment variable (set by ctest); tests are skipped when
// it is absent.

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "fsmb/dataset.hpp"
#include "fsmb/manifest.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return std::getenv("FSMB_CLI"); }

std::string work_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "fsmb_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

int run(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string q(const std::string& s) { return "'" + s + "'"; }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("cli: gen-data, split, train, eval round trip") {
  if (!cli_path()) return;
  const std::string cli = cli_path();
  const std::string dir = work_dir("roundtrip");
  const std::string log = dir + "/log.txt";

  write_file(dir + "/spec.json", R"({
    "name": "tiny",
    "num_super_categories": 6,
    "classes_per_super": 2,
    "samples_per_class": 20,
    "sample_dim": 8,
    "super_center_scale": 2.0,
    "class_center_scale": 1.5,
    "within_class_noise": 0.3,
    "seed": 5
  })");
  CHECK(run(cli + " gen-data --spec " + q(dir + "/spec.json") + " --out " + q(dir + "/tiny.fsds") +
            " > " + q(log) + " 2>&1") == 0);
  CHECK(fs::exists(dir + "/tiny.fsds"));
  CHECK(fs::exists(dir + "/tiny.fsds.manifest.json"));

  CHECK(run(cli + " split --data " + q(dir + "/tiny.fsds") +
            " --mode super --fractions 4,1,1 --seed 5 --out " + q(dir + "/split.json") + " >> " +
            q(log) + " 2>&1") == 0);

  write_file(dir + "/cls.json", R"({
    "data": ")" + dir + R"(/tiny.fsds",
    "split": ")" + dir + R"(/split.json",
    "train": {
      "stage": "classification",
      "epochs": 3,
      "batch_size": 32,
      "lr": 0.05,
      "seed": 1,
      "eval_tasks": 20,
      "eval_spec": {"n_way": 3, "k_shot": 1, "q_query": 5},
      "encoder": {"input_dim": 0, "hidden_dims": [16], "embed_dim": 8}
    }
  })");
  CHECK(run(cli + " train-cls --config " + q(dir + "/cls.json") + " --out " + q(dir + "/cls") +
            " >> " + q(log) + " 2>&1") == 0);
  for (const char* f : {"manifest.json", "metrics.jsonl", "metrics.csv", "checkpoint_last.fsck",
                        "checkpoint_best.fsck"}) {
    CHECK(fs::exists(fs::path(dir) / "cls" / f));
  }

  // meta stage starting from the classifier encoder
  write_file(dir + "/meta.json", R"({
    "data": ")" + dir + R"(/tiny.fsds",
    "split": ")" + dir + R"(/split.json",
    "init_checkpoint": ")" + dir + R"(/cls/checkpoint_best.fsck",
    "train": {
      "stage": "meta",
      "epochs": 2,
      "batches_per_epoch": 5,
      "batch_size": 2,
      "seed": 1,
      "eval_tasks": 20,
      "episode_spec": {"n_way": 3, "k_shot": 1, "q_query": 5},
      "eval_spec": {"n_way": 3, "k_shot": 1, "q_query": 5},
      "encoder": {"input_dim": 0, "hidden_dims": [16], "embed_dim": 8}
    }
  })");
  CHECK(run(cli + " train-meta --config " + q(dir + "/meta.json") + " --out " + q(dir + "/meta") +
            " >> " + q(log) + " 2>&1") == 0);

  CHECK(run(cli + " eval --checkpoint " + q(dir + "/meta/checkpoint_best.fsck") + " --data " +
            q(dir + "/tiny.fsds") + " --split " + q(dir + "/split.json") +
            " --split-name novel --n 3 --k 1 --q 5 --tasks 40 --scaled --out " +
            q(dir + "/eval.jsonl") + " >> " + q(log) + " 2>&1") == 0);
  CHECK(fs::exists(dir + "/eval.jsonl"));

  // episode audit dump
  CHECK(run(cli + " dump-episodes --data " + q(dir + "/tiny.fsds") + " --split " +
            q(dir + "/split.json") + " --split-name novel --n 3 --k 1 --q 5 --count 4 --out " +
            q(dir + "/episodes.jsonl") + " >> " + q(log) + " 2>&1") == 0);
  std::ifstream ep(dir + "/episodes.jsonl");
  int lines = 0;
  std::string line;
  while (std::getline(ep, line)) ++lines;
  CHECK(lines == 4);
}

TEST_CASE("cli: rerun from manifest reproduces metrics byte for byte") {
  if (!cli_path()) return;
  const std::string cli = cli_path();
  const std::string dir = work_dir("rerun");
  const std::string log = dir + "/log.txt";

  CHECK(run(cli + " gen-data --out " + q(dir + "/data.fsds") + " --seed 9 > " + q(log) +
            " 2>&1") == 0);
  CHECK(run(cli + " split --data " + q(dir + "/data.fsds") +
            " --mode shuffled --fractions 40,10,10 --seed 9 --out " + q(dir + "/split.json") +
            " >> " + q(log) + " 2>&1") == 0);
  write_file(dir + "/cls.json", R"({
    "data": ")" + dir + R"(/data.fsds",
    "split": ")" + dir + R"(/split.json",
    "train": {
      "stage": "classification",
      "epochs": 2,
      "batch_size": 64,
      "lr": 0.05,
      "seed": 2,
      "eval_tasks": 20,
      "encoder": {"input_dim": 0, "hidden_dims": [16], "embed_dim": 8}
    }
  })");
  CHECK(run(cli + " train-cls --config " + q(dir + "/cls.json") + " --out " + q(dir + "/run1") +
            " >> " + q(log) + " 2>&1") == 0);
  CHECK(run(cli + " rerun --manifest " + q(dir + "/run1/manifest.json") + " --out " +
            q(dir + "/run2") + " >> " + q(log) + " 2>&1") == 0);

  for (const char* f : {"metrics.jsonl", "metrics.csv", "checkpoint_last.fsck"}) {
    CHECK(fsmb::read_text_file(dir + "/run1/" + f) == fsmb::read_text_file(dir + "/run2/" + f));
  }
}

TEST_CASE("cli: plot output is deterministic byte for byte") {
  if (!cli_path()) return;
  const std::string cli = cli_path();
  const std::string dir = work_dir("plot");
  const std::string log = dir + "/log.txt";

  write_file(dir + "/curves.csv",
             "epoch,train_loss,train_acc,base_acc,base_ci,novel_acc,novel_ci,val_acc,val_ci,tau\n"
             "0,1.5,40,52.5,1.2,48.0,1.4,50.0,1.3,10\n"
             "1,1.1,55,56.0,1.1,50.5,1.3,52.0,1.2,10.4\n"
             "2,0.9,63,58.5,1.0,49.5,1.3,53.0,1.2,10.9\n");
  CHECK(run(cli + " plot --curves " + q(dir + "/curves.csv") + " --out " + q(dir + "/a.svg") +
            " > " + q(log) + " 2>&1") == 0);
  CHECK(run(cli + " plot --curves " + q(dir + "/curves.csv") + " --out " + q(dir + "/b.svg") +
            " >> " + q(log) + " 2>&1") == 0);
  const std::string a = fsmb::read_text_file(dir + "/a.svg");
  CHECK(a == fsmb::read_text_file(dir + "/b.svg"));
  CHECK(a.find("<svg") != std::string::npos);
  CHECK(a.find("polyline") != std::string::npos);
}

TEST_CASE("cli: error paths use the documented exit codes") {
  if (!cli_path()) return;
  const std::string cli = cli_path();
  const std::string dir = work_dir("errors");
  const std::string log = dir + "/log.txt";

  // config error: malformed split mode
  CHECK(run(cli + " gen-data --out " + q(dir + "/d.fsds") + " > " + q(log) + " 2>&1") == 0);
  CHECK(run(cli + " split --data " + q(dir + "/d.fsds") + " --mode diagonal --fractions 1,1,1 " +
            "--out " + q(dir + "/s.json") + " >> " + q(log) + " 2>&1") == 2);

  // data error: corrupt dataset file
  write_file(dir + "/bad.fsds", "not a dataset");
  CHECK(run(cli + " split --data " + q(dir + "/bad.fsds") + " --fractions 1,1,1 --out " +
            q(dir + "/s.json") + " >> " + q(log) + " 2>&1") == 3);

  // error messages are one line on stderr
  const int rc = run(cli + " split --data " + q(dir + "/bad.fsds") + " --fractions 1,1,1 --out " +
                     q(dir + "/s.json") + " 2> " + q(dir + "/err.txt") + " >> " + q(log));
  CHECK(rc == 3);
  const std::string err = fsmb::read_text_file(dir + "/err.txt");
  CHECK(err.substr(0, 6) == "error[");
  CHECK(std::count(err.begin(), err.end(), '\n') == 1);
}
