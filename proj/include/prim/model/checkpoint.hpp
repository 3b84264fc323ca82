#pragma once

#include <string>

#include "prim/model/mace.hpp"

namespace prim::model {

inline constexpr char kCheckpointMagic[8] = {'P', 'R', 'I', 'M', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ParameterStore<float> params;
  Json meta;  // free-form: step, epoch, seed, ...
};

/// Layout: magic, u32 version, u32 header length, JSON header, u32 record
/// count, then per record u32 name length, name, u32 rank, u64 dims, float32
/// values. Little-endian. Written atomically.
std::string serialize_checkpoint(const ModelConfig& cfg, const ParameterStore<float>& params, const Json& meta);
Checkpoint parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParameterStore<float>& params,
                     const Json& meta = Json::object());
/// Throws on a bad magic, version, or a name/shape mismatch with the header config.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace prim::model
