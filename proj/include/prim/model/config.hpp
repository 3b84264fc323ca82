#pragma once

#include <cstddef>

#include "prim/core/json_util.hpp"

namespace prim::model {

struct ModelConfig {
  std::size_t d = 160;
  std::size_t layers = 8;
  std::size_t heads = 8;
  std::size_t head_dim = 32;  // 0 means d / heads
  std::size_t mlp_hidden = 512;
  double dropout = 0.1;
  std::size_t k_max = 100;
  double ln_eps = 1e-5;
  bool int_self_attention = false;  // int samples also attend to int samples

  std::size_t inner() const { return heads * (head_dim ? head_dim : d / heads); }
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Full-size configuration with K_max = 100.
ModelConfig full_config();
/// Small configuration used for desk-scale training.
ModelConfig tiny_config(std::size_t k_max = 5);

Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

}  // namespace prim::model
