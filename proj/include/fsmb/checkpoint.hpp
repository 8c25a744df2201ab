#pragma once

// FSCK checkpoint file: magic "FSCK", u32 version, architecture descriptor,
// then raw little-endian f32 per layer in declared order, followed by
// optional temperature, classifier-head and training-state sections.
// Round trips are bit-exact.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsmb/encoder.hpp"
#include "fsmb/heads.hpp"

namespace fsmb {

struct TauState {
  Metric metric = Metric::cosine;
  float value = kCosineTauInit;
};

// Enough to restart a run at an epoch boundary and reproduce the exact
// trajectory of an uninterrupted run: optimizer velocities, the epoch
// counter that keys the per-epoch RNG streams, and the best-so-far snapshot
// used for model selection.
struct TrainState {
  std::uint8_t stage = 0;  // 0 classification, 1 meta
  std::uint64_t seed = 0;
  std::uint32_t next_epoch = 0;
  std::vector<std::vector<float>> velocities;
  double best_val_acc = -1.0;
  std::uint32_t best_epoch = 0;
  bool has_best = false;
  Encoder best_encoder;
  std::optional<TauState> best_tau;
  std::optional<ClassifierHead> best_head;
};

struct Checkpoint {
  Encoder encoder;
  std::optional<TauState> tau;
  std::optional<ClassifierHead> head;
  std::optional<TrainState> train;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fsmb
