#pragma once

#include "mcglm/model.hpp"

#include <vector>

namespace mcglm {

/// Everything the estimating functions need at one theta. Matrices are
/// restricted to the observed stacked indices.
struct EstimatingState {
    ThetaPartition theta;
    MeanEvaluation mean;
    JointCovariance assembly;  ///< full-size assembly
    VectorXd residual;         ///< y - mu
    MatrixXd D;                ///< d mu / d beta
    MatrixXd C, C_inv;
    std::vector<MatrixXd> dC;       ///< dC / d lambda_i
    std::vector<MatrixXd> Cinv_dC;  ///< C^{-1} dC_i
    std::vector<MatrixXd> weights;  ///< W_i = C^{-1} dC_i C^{-1}
    /// C^{-1} dC / d beta_j; an empty entry means the derivative is zero.
    std::vector<MatrixXd> Cinv_dC_beta;

    [[nodiscard]] Index K() const noexcept { return D.cols(); }
    [[nodiscard]] Index Q() const noexcept { return static_cast<Index>(dC.size()); }
};

struct StateParts {
    bool lambda_derivatives = true;
    bool beta_derivatives = false;
};

/// Throws NotPositiveDefinite when C (or a Sigma_r) fails to factor.
[[nodiscard]] EstimatingState evaluate_state(const Problem& problem, const ThetaPartition& theta,
                                             StateParts parts = {});

/// psi_beta = D^T C^{-1} (y - mu)
[[nodiscard]] VectorXd quasi_score(const EstimatingState& state);
/// S_beta = -D^T C^{-1} D
[[nodiscard]] MatrixXd sensitivity_beta(const EstimatingState& state);
/// V_beta = D^T C^{-1} D
[[nodiscard]] MatrixXd variability_beta(const EstimatingState& state);

/// psi_lambda_i = r^T W_i r - tr(W_i C)
[[nodiscard]] double pearson_fn(const EstimatingState& state, Index i);
[[nodiscard]] VectorXd pearson_score(const EstimatingState& state);

/// S_lambda(i,j) = -tr(W_i C W_j C)
[[nodiscard]] MatrixXd sensitivity_lambda(const EstimatingState& state);
/// V_lambda(i,j) = 2 tr(W_i C W_j C) + sum_l k4_l (W_i)_ll (W_j)_ll
[[nodiscard]] MatrixXd variability_lambda(const EstimatingState& state, const VectorXd& k4);
/// Plug-in fourth cumulants r_l^4 - 3 C_ll^2.
[[nodiscard]] VectorXd empirical_k4(const VectorXd& residual, const MatrixXd& C);

/// S_lambda_beta(i,j) = -tr(W_i C W_beta_j C); requires beta derivatives in the state.
[[nodiscard]] MatrixXd cross_sensitivity_lb(const EstimatingState& state);
/// Plug-in cross variability (r^T W_i r) (D^T C^{-1} r)_j.
[[nodiscard]] MatrixXd cross_variability_lb(const EstimatingState& state, const VectorXd& residual);

struct GodambeResult {
    MatrixXd S_theta;
    MatrixXd V_theta;
    MatrixXd J_inv;  ///< S^{-1} V S^{-T}
};

[[nodiscard]] GodambeResult godambe(const MatrixXd& S_theta, const MatrixXd& V_theta);

/// Assembles the joint sensitivity and variability at the state (which must
/// carry beta derivatives) and inverts the Godambe information.
[[nodiscard]] GodambeResult godambe_at(const EstimatingState& state, const VectorXd& k4);

/// b_i = tr(D^T W_i D J_beta^{-1}).
[[nodiscard]] VectorXd bias_correction(const EstimatingState& state, const MatrixXd& J_beta);
[[nodiscard]] VectorXd bias_correction(const EstimatingState& state);

}  // namespace mcglm
