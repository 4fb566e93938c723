#pragma once

#include "mcglm/model.hpp"

#include <cstdint>
#include <vector>

namespace mcglm {

struct SimSpec {
    ThetaPartition theta_true;
    Index n_replicates = 1;
    std::uint64_t seed = 0;
};

/// Seed of replicate `index`, derived from the master seed by splitmix64.
[[nodiscard]] std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index);

/// Stacked outcome vectors y = M + L z with L the lower Cholesky factor of the
/// full joint covariance at theta_true. Missing entries of the problem's data
/// are ignored; every replicate is complete.
[[nodiscard]] std::vector<VectorXd> simulate_gaussian(const Problem& problem, const SimSpec& spec);

/// Replace the outcomes of `base` by a stacked vector (response-major).
[[nodiscard]] Dataset with_outcomes(const Dataset& base, const VectorXd& stacked);

/// Counts with mean mu and variance mu + tau0 mu^p. p = 1 draws a Neyman
/// Type A (Poisson number of clusters of mean size tau0); p = 2 draws a
/// gamma-mixed Poisson. Other powers are rejected.
[[nodiscard]] std::vector<std::int64_t> simulate_counts_marginal(const VectorXd& mu, double p, double tau0,
                                                                 std::uint64_t seed);

}  // namespace mcglm
