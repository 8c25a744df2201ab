#pragma once

// Experiment manifest: everything needed to reproduce a run (command,
// resolved config, seeds, input hashes) plus the declared output files.
// Written before any training output.

#include <cstdint>
#include <string>
#include <vector>

namespace fsmb {

std::uint64_t fnv1a64_bytes(const void* data, std::size_t len);
// hex digest of a file's bytes, e.g. "ab54d1..."
std::string file_hash_hex(const std::string& path);

struct ManifestInput {
  std::string path;
  std::string hash;
};

struct ExperimentManifest {
  std::string command;       // CLI subcommand this manifest reproduces
  std::string config_json;   // resolved config, embedded verbatim
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<ManifestInput> inputs;
  std::vector<std::string> outputs;  // paths relative to out_dir
};

void write_manifest(const ExperimentManifest& m, const std::string& path);
ExperimentManifest read_manifest(const std::string& path);

}  // namespace fsmb
