#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prim/core/json_util.hpp"

namespace prim::cli {

/// Record of one CLI run, enough to replay it.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::vector<std::string> config_paths;
  std::uint64_t seed = 0;
  std::string code_version;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
  Json resolved;  // effective configuration after defaults, files and flags
};

std::string code_version();

Json to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& j);
void write_manifest(const std::string& path, const RunManifest& m);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);
/// First 12 hex digits of the FNV-1a hash of a file's bytes.
std::string file_hash(const std::string& path);

}  // namespace prim::cli
