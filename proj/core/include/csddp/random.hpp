#pragma once

#include <cstdint>

namespace csddp {

/// SplitMix64 finaliser; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a parent seed, a purpose tag and an index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index);

/// Counter-based uniform in the open interval (0, 1), keyed by (seed, sample, stage, component).
/// No state is carried between calls so any draw can be reproduced in isolation.
double keyed_uniform(std::uint64_t seed, std::uint64_t sample, std::uint64_t stage, std::uint64_t component);

/// Standard Gaussian by inverse CDF of keyed_uniform.
double keyed_normal(std::uint64_t seed, std::uint64_t sample, std::uint64_t stage, std::uint64_t component);

/// Inverse of the standard normal CDF.
double normal_quantile(double p);

}  // namespace csddp
