#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace prim {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for a named substream of `base`; distinct names give independent streams.
std::uint64_t substream(std::uint64_t base, std::string_view name);
std::uint64_t substream(std::uint64_t base, std::uint64_t index);

Rng make_rng(std::uint64_t seed);

double uniform(Rng& rng, double lo, double hi);
double log_uniform(Rng& rng, double lo, double hi);
double normal(Rng& rng, double mean = 0.0, double sd = 1.0);
/// Gamma with shape/rate parameterisation (mean shape/rate).
double gamma_shape_rate(Rng& rng, double shape, double rate);
std::size_t uniform_index(Rng& rng, std::size_t n);
/// Integer uniform on the closed range [lo, hi].
std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi);
bool bernoulli(Rng& rng, double p);

}  // namespace prim
