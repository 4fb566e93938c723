#include "mcglm/simulate.hpp"

#include <cmath>
#include <random>
#include <string>

namespace mcglm {

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<VectorXd> simulate_gaussian(const Problem& problem, const SimSpec& spec) {
    problem.check_theta(spec.theta_true);
    if (spec.n_replicates < 0) throw InvalidInput("simulate_gaussian: negative replicate count");
    const MeanEvaluation mean = evaluate_mean(problem, spec.theta_true.beta);
    const JointCovariance jc = assemble_covariance(problem, spec.theta_true, mean, false);
    const MatrixXd L = cholesky_lower(jc.C, "joint covariance C");
    const VectorXd M = mean.stacked_mu();

    std::vector<VectorXd> out(static_cast<std::size_t>(spec.n_replicates));
    parallel_for(spec.n_replicates, [&](Index i) {
        std::mt19937_64 rng(replicate_seed(spec.seed, static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> normal(0.0, 1.0);
        VectorXd z(M.size());
        for (Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
        out[static_cast<std::size_t>(i)] = M + L.triangularView<Eigen::Lower>() * z;
    });
    return out;
}

Dataset with_outcomes(const Dataset& base, const VectorXd& stacked) {
    const Index R = static_cast<Index>(base.y.size());
    if (R == 0) throw InvalidInput("with_outcomes: dataset has no responses");
    const Index n = base.y.front().size();
    if (stacked.size() != n * R) throw InvalidInput("with_outcomes: stacked vector has the wrong length");
    Dataset d = base;
    for (Index r = 0; r < R; ++r) d.y[static_cast<std::size_t>(r)] = stacked.segment(r * n, n);
    return d;
}

std::vector<std::int64_t> simulate_counts_marginal(const VectorXd& mu, double p, double tau0, std::uint64_t seed) {
    if (!(tau0 > 0.0)) throw InvalidInput("simulate_counts_marginal: tau0 must be positive");
    if (p != 1.0 && p != 2.0) {
        throw InvalidInput("simulate_counts_marginal: power " + std::to_string(p) + " is not supported (use 1 or 2)");
    }
    for (Index i = 0; i < mu.size(); ++i) {
        if (!(mu(i) > 0.0) || !std::isfinite(mu(i))) {
            throw InvalidInput("simulate_counts_marginal: mean at index " + std::to_string(i) + " must be positive");
        }
    }
    std::mt19937_64 rng(replicate_seed(seed, 0));
    std::vector<std::int64_t> out(static_cast<std::size_t>(mu.size()));
    for (Index i = 0; i < mu.size(); ++i) {
        if (p == 1.0) {
            // N ~ Poisson(mu/tau0) clusters, each Poisson(tau0): mean mu, variance mu + tau0 mu.
            std::poisson_distribution<std::int64_t> clusters(mu(i) / tau0);
            const std::int64_t n = clusters(rng);
            if (n == 0) {
                out[static_cast<std::size_t>(i)] = 0;
                continue;
            }
            std::poisson_distribution<std::int64_t> total(tau0 * static_cast<double>(n));
            out[static_cast<std::size_t>(i)] = total(rng);
        } else {
            // G ~ Gamma(shape 1/tau0, scale tau0): mean 1, variance tau0.
            std::gamma_distribution<double> gamma(1.0 / tau0, tau0);
            const double rate = mu(i) * gamma(rng);
            if (rate <= 0.0) {
                out[static_cast<std::size_t>(i)] = 0;
                continue;
            }
            std::poisson_distribution<std::int64_t> pois(rate);
            out[static_cast<std::size_t>(i)] = pois(rng);
        }
    }
    return out;
}

}  // namespace mcglm
