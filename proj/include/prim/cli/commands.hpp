#pragma once

#include <iosfwd>
#include <string>

#include "prim/core/json_util.hpp"
#include "prim/model/config.hpp"
#include "prim/scm/episode.hpp"

namespace prim::cli {

/// "train": desk-scale training prior (2-5 nodes, n_obs 5-200, n_int 1-50,
/// linear and tanh mechanisms). "full": every family at the full sample ranges.
scm::PriorConfig prior_preset(const std::string& name);
Json to_json(const scm::PriorConfig& p);
/// Keys present in `j` override `base`; unknown keys are rejected.
scm::PriorConfig prior_config_from_json(const Json& j, scm::PriorConfig base = {});

/// "tiny" or "full"; k_max overrides the preset width when non-zero.
model::ModelConfig model_preset(const std::string& name, std::size_t k_max = 0);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // run error, failed output validation
inline constexpr int kExitUsage = 2;    // unknown flag, malformed config

/// Parses argv (argv[0] is the program name) and runs one subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace prim::cli
