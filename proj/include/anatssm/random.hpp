#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace anatssm {

using Rng = std::mt19937_64;

/// Seed used when none is given.
inline constexpr std::uint64_t default_seed = 1;

/// Independent substream for task `index` under a global seed. Streams for
/// different indices do not overlap in practice, so parallel tasks stay
/// reproducible regardless of scheduling.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

inline Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = dist(rng);
  return out;
}

}  // namespace anatssm
