#include "fsmb/manifest.hpp"

#include <cstdio>

#include "fsmb/dataset.hpp"  // read/write_text_file
#include "fsmb/errors.hpp"
#include "json.hpp"

namespace fsmb {

std::uint64_t fnv1a64_bytes(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string file_hash_hex(const std::string& path) {
  const std::string bytes = read_text_file(path);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64_bytes(bytes.data(), bytes.size())));
  return buf;
}

void write_manifest(const ExperimentManifest& m, const std::string& path) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = nlohmann::json::parse(m.config_json);
  j["seed"] = m.seed;
  j["out_dir"] = m.out_dir;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& in : m.inputs) inputs.push_back({{"path", in.path}, {"hash", in.hash}});
  j["inputs"] = inputs;
  j["outputs"] = m.outputs;
  write_text_file(path, j.dump(2) + "\n");
}

ExperimentManifest read_manifest(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest '" + path + "': invalid JSON: " + e.what());
  }
  ExperimentManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config_json = j.at("config").dump();
    m.seed = j.value("seed", 0ULL);
    m.out_dir = j.value("out_dir", "");
    if (j.contains("inputs")) {
      for (const auto& in : j.at("inputs")) {
        m.inputs.push_back({in.at("path").get<std::string>(), in.value("hash", "")});
      }
    }
    if (j.contains("outputs")) m.outputs = j.at("outputs").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest '" + path + "': bad field: " + e.what());
  }
  return m;
}

}  // namespace fsmb
