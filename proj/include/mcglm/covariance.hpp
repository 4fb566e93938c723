#pragma once

#include "mcglm/functions.hpp"
#include "mcglm/linalg.hpp"
#include "mcglm/matpred.hpp"

#include <utility>
#include <vector>

namespace mcglm {

/// Between-response correlation Sigma_b parametrised by its lower triangle
/// stacked by columns: (2,1), (3,1), ..., (R,1), (3,2), ...
struct BetweenCorrelation {
    Index R = 1;
    VectorXd rho;

    [[nodiscard]] MatrixXd matrix() const;
};

[[nodiscard]] inline Index n_correlations(Index R) { return R * (R - 1) / 2; }

/// (row, col), row > col, of the i-th stacked correlation.
[[nodiscard]] std::pair<Index, Index> rho_position(Index i, Index R);

[[nodiscard]] MatrixXd sigma_b_from_rho(const VectorXd& rho, Index R);

/// Within-response covariance Sigma_r = V^{1/2} Omega V^{1/2} (+ diag(mu) for
/// Poisson-Tweedie), its lower Cholesky factor and the pieces needed to
/// differentiate it.
struct ResponseCovariance {
    MatrixXd sigma;
    MatrixXd chol;
    MatrixXd omega;
    MatrixXd U;
    VectorXd v_sqrt;  ///< diagonal of V^{1/2} (power component only for Poisson-Tweedie)
};

struct JointCovariance {
    MatrixXd C;
    MatrixXd C_inv;  ///< empty when the inverse was not requested
    std::vector<ResponseCovariance> responses;
    MatrixXd Sb;

    [[nodiscard]] Index n_responses() const { return static_cast<Index>(responses.size()); }
    [[nodiscard]] Index block_dim() const { return responses.empty() ? 0 : responses.front().sigma.rows(); }
};

[[nodiscard]] ResponseCovariance build_sigma_r(const VectorXd& mu, const VarianceSpec& var, double p,
                                               const VectorXd& tau, const MatrixPredictor& pred,
                                               const CovLinkSpec& cl);

/// C = Bdiag(L_1..L_R) (Sb (x) I) Bdiag(L_1^T..L_R^T). Block (r, s) is
/// Sb_rs L_r L_s^T and diagonal blocks are Sigma_r exactly.
[[nodiscard]] JointCovariance generalized_kronecker(std::vector<ResponseCovariance> responses, const MatrixXd& Sb,
                                                    bool with_inverse = true);

/// Strictly lower part of m, half its diagonal, zero above.
[[nodiscard]] MatrixXd phi_operator(const MatrixXd& m);

/// Directional derivative of the lower Cholesky factor:
/// L Phi(L^{-1} dSigma L^{-T}).
[[nodiscard]] MatrixXd chol_deriv(const MatrixXd& chol, const MatrixXd& d_sigma);

[[nodiscard]] MatrixXd dC_drho(const JointCovariance& assembly, Index i);

/// dC for a parameter that only moves Sigma_r (p_r, tau_rd or beta_j of response r).
[[nodiscard]] MatrixXd dC_dpar_r(const JointCovariance& assembly, Index r, const MatrixXd& d_sigma_r);

[[nodiscard]] MatrixXd dSigma_dp(const ResponseCovariance& rc, const VectorXd& mu, const VarianceSpec& var, double p);
[[nodiscard]] MatrixXd dSigma_dp(const VectorXd& mu, const VarianceSpec& var, double p, const VectorXd& tau,
                                 const MatrixPredictor& pred, const CovLinkSpec& cl);

[[nodiscard]] MatrixXd dSigma_dtau(const ResponseCovariance& rc, const CovLinkSpec& cl, const StructureMatrix& z);
[[nodiscard]] MatrixXd dSigma_dtau(const VectorXd& mu, const VarianceSpec& var, double p, const VectorXd& tau,
                                   const MatrixPredictor& pred, const CovLinkSpec& cl, Index d);

/// dSigma_r along a change d_mu of the mean vector (chain rule through V).
[[nodiscard]] MatrixXd dSigma_dmu(const ResponseCovariance& rc, const VectorXd& mu, const VarianceSpec& var, double p,
                                  const VectorXd& d_mu);

/// W = C^{-1} dC C^{-1} = -dC^{-1}.
[[nodiscard]] MatrixXd weight_matrix(const MatrixXd& C_inv, const MatrixXd& dC);

}  // namespace mcglm
