#include "fsmb/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "fsmb/rng.hpp"
#include "json.hpp"

namespace fsmb {

void FewShotDataset::validate() const {
  if (sample_dim == 0) throw ConfigError("dataset '" + name + "' has sample_dim 0");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const ClassRecord& c = classes[i];
    if (c.class_id != i) {
      throw ConfigError("dataset '" + name + "': class ids must be dense, found id " +
                        std::to_string(c.class_id) + " at position " + std::to_string(i));
    }
    if (c.num_samples == 0) {
      throw ConfigError("dataset '" + name + "': class " + std::to_string(i) + " has no samples");
    }
    if (c.samples.size() != static_cast<std::size_t>(c.num_samples) * sample_dim) {
      throw ConfigError("dataset '" + name + "': class " + std::to_string(i) +
                        " sample buffer does not match num_samples x sample_dim");
    }
  }
}

FewShotDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_super_categories < 1 || spec.classes_per_super < 1 || spec.samples_per_class < 1 ||
      spec.sample_dim < 1) {
    throw ConfigError("synthetic spec: all counts must be >= 1");
  }
  if (!(spec.super_center_scale > 0) || !(spec.class_center_scale >= 0) ||
      !(spec.within_class_noise >= 0)) {
    throw ConfigError("synthetic spec: scales must be positive");
  }

  Rng rng = Rng::stream(spec.seed, "data-gen");
  FewShotDataset ds;
  ds.name = spec.name;
  ds.sample_dim = spec.sample_dim;
  ds.classes.reserve(static_cast<std::size_t>(spec.num_super_categories) * spec.classes_per_super);

  std::vector<double> super_center(spec.sample_dim);
  std::vector<double> class_center(spec.sample_dim);
  for (std::uint32_t s = 0; s < spec.num_super_categories; ++s) {
    for (auto& x : super_center) x = rng.gaussian() * spec.super_center_scale;
    for (std::uint32_t c = 0; c < spec.classes_per_super; ++c) {
      for (std::uint32_t d = 0; d < spec.sample_dim; ++d) {
        class_center[d] = super_center[d] + rng.gaussian() * spec.class_center_scale;
      }
      ClassRecord rec;
      rec.class_id = static_cast<std::uint32_t>(ds.classes.size());
      rec.super_category = s;
      rec.num_samples = spec.samples_per_class;
      rec.samples.resize(static_cast<std::size_t>(spec.samples_per_class) * spec.sample_dim);
      for (std::uint32_t i = 0; i < spec.samples_per_class; ++i) {
        for (std::uint32_t d = 0; d < spec.sample_dim; ++d) {
          rec.samples[static_cast<std::size_t>(i) * spec.sample_dim + d] =
              static_cast<float>(class_center[d] + rng.gaussian() * spec.within_class_noise);
        }
      }
      ds.classes.push_back(std::move(rec));
    }
  }
  return ds;
}

void SplitSpec::validate(const FewShotDataset& ds) const {
  std::set<std::uint32_t> seen;
  auto check = [&](const std::vector<std::uint32_t>& ids, const char* which) {
    for (std::uint32_t id : ids) {
      if (id >= ds.num_classes()) {
        throw ConfigError(std::string("split: ") + which + " class id " + std::to_string(id) +
                          " outside dataset");
      }
      if (!seen.insert(id).second) {
        throw ConfigError(std::string("split: class id ") + std::to_string(id) +
                          " appears in more than one split");
      }
    }
  };
  check(base_class_ids, "base");
  check(val_class_ids, "val");
  check(novel_class_ids, "novel");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw ConfigError("split: holdout_fraction must be in (0, 1)");
  }
}

namespace {

SplitSpec assemble_split(std::vector<std::uint32_t> base, std::vector<std::uint32_t> val,
                         std::vector<std::uint32_t> novel, double holdout_fraction) {
  std::sort(base.begin(), base.end());
  std::sort(val.begin(), val.end());
  std::sort(novel.begin(), novel.end());
  SplitSpec s;
  s.base_class_ids = std::move(base);
  s.val_class_ids = std::move(val);
  s.novel_class_ids = std::move(novel);
  s.holdout_fraction = holdout_fraction;
  return s;
}

}  // namespace

SplitSpec split_by_supercategory(const FewShotDataset& ds, const SplitCounts& counts,
                                 std::uint64_t seed, double holdout_fraction) {
  std::set<std::uint32_t> supers_set;
  for (const auto& c : ds.classes) {
    if (!c.super_category) {
      throw ConfigError("super-category split requires every class to carry a super tag");
    }
    supers_set.insert(*c.super_category);
  }
  std::vector<std::uint32_t> supers(supers_set.begin(), supers_set.end());
  if (supers.size() < 3) {
    throw ConfigError("super-category split needs at least 3 super-categories, have " +
                      std::to_string(supers.size()));
  }
  if (counts.base + counts.val + counts.novel > supers.size()) {
    throw ConfigError("split counts exceed the " + std::to_string(supers.size()) +
                      " available super-categories");
  }

  Rng rng = Rng::stream(seed, "split-super");
  rng.shuffle(supers);
  std::set<std::uint32_t> base_supers(supers.begin(), supers.begin() + counts.base);
  std::set<std::uint32_t> val_supers(supers.begin() + counts.base,
                                     supers.begin() + counts.base + counts.val);
  std::set<std::uint32_t> novel_supers(supers.begin() + counts.base + counts.val,
                                       supers.begin() + counts.base + counts.val + counts.novel);

  std::vector<std::uint32_t> base, val, novel;
  for (const auto& c : ds.classes) {
    if (base_supers.count(*c.super_category)) base.push_back(c.class_id);
    else if (val_supers.count(*c.super_category)) val.push_back(c.class_id);
    else if (novel_supers.count(*c.super_category)) novel.push_back(c.class_id);
  }
  return assemble_split(std::move(base), std::move(val), std::move(novel), holdout_fraction);
}

SplitSpec split_shuffled(const FewShotDataset& ds, const SplitCounts& counts, std::uint64_t seed,
                         double holdout_fraction) {
  if (ds.num_classes() < 3) {
    throw ConfigError("shuffled split needs at least 3 classes, have " +
                      std::to_string(ds.num_classes()));
  }
  if (counts.base + counts.val + counts.novel > ds.num_classes()) {
    throw ConfigError("split counts exceed the " + std::to_string(ds.num_classes()) +
                      " available classes");
  }
  std::vector<std::uint32_t> ids(ds.num_classes());
  std::iota(ids.begin(), ids.end(), 0u);
  Rng rng = Rng::stream(seed, "split-shuffled");
  rng.shuffle(ids);
  std::vector<std::uint32_t> base(ids.begin(), ids.begin() + counts.base);
  std::vector<std::uint32_t> val(ids.begin() + counts.base, ids.begin() + counts.base + counts.val);
  std::vector<std::uint32_t> novel(ids.begin() + counts.base + counts.val,
                                   ids.begin() + counts.base + counts.val + counts.novel);
  return assemble_split(std::move(base), std::move(val), std::move(novel), holdout_fraction);
}

std::uint32_t holdout_count(std::uint32_t num_samples, double fraction) {
  if (num_samples < 2) return 0;
  auto h = static_cast<std::uint32_t>(std::lround(fraction * num_samples));
  return std::clamp<std::uint32_t>(h, 1, num_samples - 1);
}

std::vector<ClassPool> pools_all(const FewShotDataset& ds, const std::vector<std::uint32_t>& ids) {
  std::vector<ClassPool> pools;
  pools.reserve(ids.size());
  for (std::uint32_t id : ids) {
    if (id >= ds.num_classes()) throw IndexError("pool class id " + std::to_string(id));
    ClassPool p;
    p.class_id = id;
    p.indices.resize(ds.classes[id].num_samples);
    std::iota(p.indices.begin(), p.indices.end(), 0u);
    pools.push_back(std::move(p));
  }
  return pools;
}

std::vector<ClassPool> pools_train(const FewShotDataset& ds, const SplitSpec& split,
                                   std::uint32_t max_per_class) {
  std::vector<ClassPool> pools;
  pools.reserve(split.base_class_ids.size());
  for (std::uint32_t id : split.base_class_ids) {
    const auto n = ds.classes[id].num_samples;
    const auto h = holdout_count(n, split.holdout_fraction);
    std::uint32_t train_n = n - h;
    if (max_per_class > 0) train_n = std::min(train_n, max_per_class);
    ClassPool p;
    p.class_id = id;
    p.indices.resize(train_n);
    std::iota(p.indices.begin(), p.indices.end(), 0u);
    pools.push_back(std::move(p));
  }
  return pools;
}

std::vector<ClassPool> pools_base_holdout(const FewShotDataset& ds, const SplitSpec& split) {
  std::vector<ClassPool> pools;
  pools.reserve(split.base_class_ids.size());
  for (std::uint32_t id : split.base_class_ids) {
    const auto n = ds.classes[id].num_samples;
    const auto h = holdout_count(n, split.holdout_fraction);
    ClassPool p;
    p.class_id = id;
    p.indices.resize(h);
    std::iota(p.indices.begin(), p.indices.end(), n - h);
    pools.push_back(std::move(p));
  }
  return pools;
}

// ---------------------------------------------------------------------------
// FSDS binary IO
//
// magic "FSDS", u32 version=1, u32 num_classes, u32 sample_dim, then per
// class: u32 class_id, u32 super_category (0xFFFFFFFF when absent),
// u32 num_samples, num_samples x sample_dim little-endian f32.
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kNoSuper = 0xFFFFFFFFu;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string what;

  void need(std::size_t n, const char* field) {
    if (pos + n > buf.size()) {
      throw FormatError(what + ": truncated while reading " + field, pos);
    }
  }
  std::uint32_t u32(const char* field) {
    need(4, field);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
    pos += 4;
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }
};

}  // namespace

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void save_dataset(const FewShotDataset& ds, const std::string& path) {
  ds.validate();
  std::string out;
  out += "FSDS";
  put_u32(out, 1);
  put_u32(out, ds.num_classes());
  put_u32(out, ds.sample_dim);
  for (const auto& c : ds.classes) {
    put_u32(out, c.class_id);
    put_u32(out, c.super_category ? *c.super_category : kNoSuper);
    put_u32(out, c.num_samples);
    for (float f : c.samples) put_f32(out, f);
  }
  write_text_file(path, out);
}

FewShotDataset load_dataset(const std::string& path) {
  const std::string buf = read_text_file(path);
  Reader r{buf, 0, "dataset '" + path + "'"};

  r.need(4, "magic");
  if (buf.compare(0, 4, "FSDS") != 0) throw FormatError(r.what + ": bad magic", 0);
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != 1) throw FormatError(r.what + ": unsupported version " + std::to_string(version), 4);

  FewShotDataset ds;
  ds.name = path;
  const std::uint32_t num_classes = r.u32("num_classes");
  ds.sample_dim = r.u32("sample_dim");
  ds.classes.reserve(num_classes);
  for (std::uint32_t i = 0; i < num_classes; ++i) {
    ClassRecord c;
    c.class_id = r.u32("class_id");
    const std::uint32_t super = r.u32("super_category");
    if (super != kNoSuper) c.super_category = super;
    c.num_samples = r.u32("num_samples");
    const std::size_t n = static_cast<std::size_t>(c.num_samples) * ds.sample_dim;
    r.need(n * 4, "samples");
    c.samples.resize(n);
    for (std::size_t j = 0; j < n; ++j) c.samples[j] = r.f32("samples");
    ds.classes.push_back(std::move(c));
  }
  if (r.pos != buf.size()) {
    throw FormatError(r.what + ": trailing bytes after last class", r.pos);
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

std::string synthetic_spec_to_json(const SyntheticSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["num_super_categories"] = spec.num_super_categories;
  j["classes_per_super"] = spec.classes_per_super;
  j["samples_per_class"] = spec.samples_per_class;
  j["sample_dim"] = spec.sample_dim;
  j["super_center_scale"] = spec.super_center_scale;
  j["class_center_scale"] = spec.class_center_scale;
  j["within_class_noise"] = spec.within_class_noise;
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: invalid JSON: ") + e.what());
  }
  SyntheticSpec spec;
  try {
    spec.name = j.value("name", spec.name);
    spec.num_super_categories = j.value("num_super_categories", spec.num_super_categories);
    spec.classes_per_super = j.value("classes_per_super", spec.classes_per_super);
    spec.samples_per_class = j.value("samples_per_class", spec.samples_per_class);
    spec.sample_dim = j.value("sample_dim", spec.sample_dim);
    spec.super_center_scale = j.value("super_center_scale", spec.super_center_scale);
    spec.class_center_scale = j.value("class_center_scale", spec.class_center_scale);
    spec.within_class_noise = j.value("within_class_noise", spec.within_class_noise);
    spec.seed = j.value("seed", spec.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: bad field: ") + e.what());
  }
  return spec;
}

std::string split_spec_to_json(const SplitSpec& split) {
  nlohmann::json j;
  j["base"] = split.base_class_ids;
  j["val"] = split.val_class_ids;
  j["novel"] = split.novel_class_ids;
  j["holdout_fraction"] = split.holdout_fraction;
  return j.dump(2) + "\n";
}

SplitSpec split_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("split spec: invalid JSON: ") + e.what());
  }
  SplitSpec s;
  try {
    s.base_class_ids = j.at("base").get<std::vector<std::uint32_t>>();
    s.val_class_ids = j.at("val").get<std::vector<std::uint32_t>>();
    s.novel_class_ids = j.at("novel").get<std::vector<std::uint32_t>>();
    s.holdout_fraction = j.value("holdout_fraction", 0.1);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("split spec: bad field: ") + e.what());
  }
  return s;
}

}  // namespace fsmb
