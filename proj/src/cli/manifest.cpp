#include "prim/cli/manifest.hpp"

#include <cstdio>

#ifndef PRIM_VERSION
#define PRIM_VERSION "0.0.0"
#endif
#ifndef PRIM_GIT_REV
#define PRIM_GIT_REV "unknown"
#endif

namespace prim::cli {

std::string code_version() { return std::string(PRIM_VERSION) + "+" + PRIM_GIT_REV; }

Json to_json(const RunManifest& m) {
  return Json{{"command", m.command},
              {"argv", m.argv},
              {"config_paths", m.config_paths},
              {"seed", m.seed},
              {"code_version", m.code_version},
              {"outputs", m.outputs},
              {"wall_seconds", m.wall_seconds},
              {"resolved", m.resolved}};
}

RunManifest manifest_from_json(const Json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.config_paths = j.at("config_paths").get<std::vector<std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.code_version = j.at("code_version").get<std::string>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.wall_seconds = j.at("wall_seconds").get<double>();
  m.resolved = j.at("resolved");
  return m;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  write_file_atomic(path, to_json(m).dump(2) + "\n");
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string file_hash(const std::string& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(read_text_file(path))));
  return std::string(buf, 12);
}

}  // namespace prim::cli
