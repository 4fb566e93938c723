#pragma once

// Model builders shared by the unit and acceptance tests.

#include "mcglm/model.hpp"
#include "mcglm/simulate.hpp"

#include <random>
#include <string>
#include <vector>

namespace fixture {

using mcglm::Index;
using mcglm::MatrixXd;
using mcglm::VectorXd;

inline mcglm::ResponseSpec gaussian_response(const std::string& name, mcglm::MatrixPredictor predictor,
                                             mcglm::CovLinkKind covlink = mcglm::CovLinkKind::identity) {
    mcglm::ResponseSpec r;
    r.name = name;
    r.link.kind = mcglm::LinkKind::identity;
    r.variance = {mcglm::VarianceKind::constant, true};
    r.covlink.kind = covlink;
    r.predictor = std::move(predictor);
    return r;
}

/// Single response, identity link, constant variance, Omega = tau0 I.
inline mcglm::Problem gaussian_iid(const MatrixXd& X, const VectorXd& y,
                                   mcglm::CovLinkKind covlink = mcglm::CovLinkKind::identity) {
    mcglm::ModelSpec m;
    m.responses.push_back(gaussian_response("y", mcglm::MatrixPredictor({mcglm::mat_identity(y.size())}), covlink));
    return mcglm::Problem(std::move(m), mcglm::Dataset{{y}, {X}});
}

/// Log link, Tweedie variance with p = 1 fixed, Omega = tau0 I.
inline mcglm::Problem quasi_poisson(const MatrixXd& X, const VectorXd& y) {
    mcglm::ResponseSpec r;
    r.name = "count";
    r.link.kind = mcglm::LinkKind::log;
    r.variance = {mcglm::VarianceKind::tweedie_power, true};
    r.power = 1.0;
    r.predictor = mcglm::MatrixPredictor({mcglm::mat_identity(y.size())});
    mcglm::ModelSpec m;
    m.responses.push_back(std::move(r));
    return mcglm::Problem(std::move(m), mcglm::Dataset{{y}, {X}});
}

/// Intercept plus standard normal covariates.
inline MatrixXd design(Index n, Index k, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    MatrixXd X(n, k);
    for (Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (Index j = 1; j < k; ++j) X(i, j) = z(rng);
    }
    return X;
}

/// A problem together with a parameter point used as simulation truth.
struct Truth {
    mcglm::Problem problem;
    mcglm::ThetaPartition theta;
};

/// R = 2 Gaussian McGLM on N units in groups of `group_size`, each response
/// with Omega_r = tau_r0 I + tau_r1 J (compound symmetry), free rho.
inline Truth bivariate_cs(Index N, Index group_size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::string> groups;
    for (Index i = 0; i < N; ++i) groups.push_back("g" + std::to_string(i / group_size));
    const mcglm::MatrixPredictor pred({mcglm::mat_identity(N), mcglm::mat_compound_symmetry(groups)});
    mcglm::ModelSpec m;
    m.responses.push_back(gaussian_response("y1", pred));
    m.responses.push_back(gaussian_response("y2", pred));
    mcglm::Dataset data;
    for (int r = 0; r < 2; ++r) {
        data.X.push_back(design(N, 2, rng));
        data.y.push_back(VectorXd::Zero(N));
    }
    mcglm::ThetaPartition theta;
    theta.beta = (VectorXd(4) << 1.0, 0.5, -0.5, 1.0).finished();
    theta.lambda = (VectorXd(5) << 0.4, 1.0, 0.5, 2.0, 0.8).finished();
    return {mcglm::Problem(std::move(m), std::move(data)), theta};
}

/// Small R-response Gaussian model with Omega = tau0 I + tau1 Z1, Z1 a
/// first-order neighbour structure, for Monte Carlo checks.
inline Truth small_gaussian(Index N, Index R, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<Index, Index>> edges;
    for (Index i = 0; i + 1 < N; ++i) edges.emplace_back(i, i + 1);
    const mcglm::MatrixPredictor pred({mcglm::mat_identity(N), mcglm::mat_neighborhood(N, edges).W});
    mcglm::ModelSpec m;
    mcglm::Dataset data;
    std::vector<double> beta, lambda;
    for (Index r = 0; r < R; ++r) {
        m.responses.push_back(gaussian_response("y" + std::to_string(r + 1), pred));
        data.X.push_back(design(N, 2, rng));
        data.y.push_back(VectorXd::Zero(N));
        beta.push_back(0.5 + static_cast<double>(r));
        beta.push_back(-0.3);
    }
    for (Index i = 0; i < R * (R - 1) / 2; ++i) lambda.push_back(0.3);
    for (Index r = 0; r < R; ++r) {
        lambda.push_back(1.0 + 0.5 * static_cast<double>(r));
        lambda.push_back(0.3);
    }
    mcglm::ThetaPartition theta;
    theta.beta = Eigen::Map<VectorXd>(beta.data(), static_cast<Index>(beta.size()));
    theta.lambda = Eigen::Map<VectorXd>(lambda.data(), static_cast<Index>(lambda.size()));
    return {mcglm::Problem(std::move(m), std::move(data)), theta};
}

/// Problem sharing the model of `base` with outcomes from a stacked vector.
inline mcglm::Problem with_y(const mcglm::Problem& base, const VectorXd& stacked) {
    return mcglm::Problem(base.model(), mcglm::with_outcomes(base.data(), stacked));
}

}  // namespace fixture
