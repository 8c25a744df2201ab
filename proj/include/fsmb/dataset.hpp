#pragma once

// Dataset model, the FSDS on-disk format, base/val/novel splitting and the
// synthetic hierarchical-Gaussian generator.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsmb/errors.hpp"

namespace fsmb {

struct ClassRecord {
  std::uint32_t class_id = 0;
  std::optional<std::uint32_t> super_category;
  std::uint32_t num_samples = 0;
  std::vector<float> samples;  // num_samples x sample_dim, row-major

  const float* sample(std::uint32_t index, std::uint32_t dim) const {
    return samples.data() + static_cast<std::size_t>(index) * dim;
  }
};

struct FewShotDataset {
  std::string name;
  std::uint32_t sample_dim = 0;
  std::vector<ClassRecord> classes;

  std::uint32_t num_classes() const { return static_cast<std::uint32_t>(classes.size()); }
  // checks dense ids, non-empty classes and consistent dims
  void validate() const;
};

// Hierarchical Gaussian data: super centers ~ N(0, sigma_super^2 I),
// class centers ~ N(super, sigma_class^2 I), samples ~ N(class, sigma_noise^2 I).
struct SyntheticSpec {
  std::uint32_t num_super_categories = 12;
  std::uint32_t classes_per_super = 5;
  std::uint32_t samples_per_class = 50;
  std::uint32_t sample_dim = 32;
  double super_center_scale = 1.0;
  double class_center_scale = 1.0;
  double within_class_noise = 0.3;
  std::uint64_t seed = 0;
  std::string name = "synthetic";
};

FewShotDataset generate_synthetic(const SyntheticSpec& spec);

// Class-count triple per split; interpreted in super-categories for the
// super split and in classes for the shuffled split.
struct SplitCounts {
  std::uint32_t base = 0;
  std::uint32_t val = 0;
  std::uint32_t novel = 0;
};

struct SplitSpec {
  std::vector<std::uint32_t> base_class_ids;
  std::vector<std::uint32_t> val_class_ids;
  std::vector<std::uint32_t> novel_class_ids;
  double holdout_fraction = 0.1;  // per-base-class tail reserved for base-gen eval

  void validate(const FewShotDataset& ds) const;
};

SplitSpec split_by_supercategory(const FewShotDataset& ds, const SplitCounts& counts,
                                 std::uint64_t seed, double holdout_fraction = 0.1);
SplitSpec split_shuffled(const FewShotDataset& ds, const SplitCounts& counts, std::uint64_t seed,
                         double holdout_fraction = 0.1);

// Number of trailing samples of a base class reserved as unseen images.
std::uint32_t holdout_count(std::uint32_t num_samples, double fraction);

// A sampling pool: the sample indices of one class an episode may draw from.
struct ClassPool {
  std::uint32_t class_id = 0;
  std::vector<std::uint32_t> indices;
};

// All samples of the given classes (val / novel evaluation).
std::vector<ClassPool> pools_all(const FewShotDataset& ds, const std::vector<std::uint32_t>& ids);
// Base classes minus the holdout tail; max_per_class 0 means no cap.
std::vector<ClassPool> pools_train(const FewShotDataset& ds, const SplitSpec& split,
                                   std::uint32_t max_per_class = 0);
// Only the holdout tail of each base class (base-generalization evaluation).
std::vector<ClassPool> pools_base_holdout(const FewShotDataset& ds, const SplitSpec& split);

// FSDS binary format, bit-exact round trip.
void save_dataset(const FewShotDataset& ds, const std::string& path);
FewShotDataset load_dataset(const std::string& path);

// JSON helpers used by the CLI and the provenance manifest.
std::string synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const std::string& text);
std::string split_spec_to_json(const SplitSpec& split);
SplitSpec split_spec_from_json(const std::string& text);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace fsmb
