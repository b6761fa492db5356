#include "csddp/random.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>

namespace csddp {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ (tag * 0xD1B54A32D192ED03ULL));
  return mix64(h ^ (index * 0xAEF17502108EF2D9ULL));
}

double keyed_uniform(std::uint64_t seed, std::uint64_t sample, std::uint64_t stage, std::uint64_t component) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ (sample * 0xD6E8FEB86659FD93ULL));
  h = mix64(h ^ (stage * 0xCA5A826395121157ULL));
  h = mix64(h ^ (component * 0x9FB21C651E98DF25ULL));
  // 53 random bits, shifted half a step away from 0 and 1.
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

double normal_quantile(double p) { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p); }

double keyed_normal(std::uint64_t seed, std::uint64_t sample, std::uint64_t stage, std::uint64_t component) {
  return normal_quantile(keyed_uniform(seed, sample, stage, component));
}

}  // namespace csddp
