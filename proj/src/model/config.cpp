#include "prim/model/config.hpp"

#include <stdexcept>

namespace prim::model {

void ModelConfig::validate() const {
  if (d == 0 || layers == 0 || heads == 0 || mlp_hidden == 0 || k_max == 0)
    throw std::invalid_argument("model config: sizes must be positive");
  if (d % heads != 0) throw std::invalid_argument("model config: d must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("model config: dropout outside [0, 1)");
  if (!(ln_eps > 0.0)) throw std::invalid_argument("model config: ln_eps must be positive");
}

ModelConfig full_config() { return ModelConfig{}; }

ModelConfig tiny_config(std::size_t k_max) {
  ModelConfig c;
  c.d = 32;
  c.layers = 2;
  c.heads = 4;
  c.head_dim = 0;
  c.mlp_hidden = 64;
  c.k_max = k_max;
  return c;
}

Json to_json(const ModelConfig& c) {
  return Json{{"d", c.d},
              {"layers", c.layers},
              {"heads", c.heads},
              {"head_dim", c.head_dim},
              {"mlp_hidden", c.mlp_hidden},
              {"dropout", c.dropout},
              {"k_max", c.k_max},
              {"ln_eps", c.ln_eps},
              {"int_self_attention", c.int_self_attention}};
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  c.d = j.value("d", c.d);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.head_dim = j.value("head_dim", c.head_dim);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.k_max = j.value("k_max", c.k_max);
  c.ln_eps = j.value("ln_eps", c.ln_eps);
  c.int_self_attention = j.value("int_self_attention", c.int_self_attention);
  c.validate();
  return c;
}

}  // namespace prim::model
