#include "mcglm/covariance.hpp"

#include <cmath>
#include <string>

namespace mcglm {

namespace {

// Variance spec describing only the mu^p component of a Poisson-Tweedie.
VarianceSpec power_component(const VarianceSpec& var) {
    if (var.kind == VarianceKind::poisson_tweedie) return {VarianceKind::tweedie_power, var.power_known};
    return var;
}

// (a_i b_j + b_i a_j) * m_ij
MatrixXd sandwich_derivative(const VectorXd& a, const VectorXd& b, const MatrixXd& m) {
    MatrixXd out(m.rows(), m.cols());
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) out(i, j) = (a(i) * b(j) + b(i) * a(j)) * m(i, j);
    }
    return symmetrize(out);
}

}  // namespace

MatrixXd BetweenCorrelation::matrix() const { return sigma_b_from_rho(rho, R); }

std::pair<Index, Index> rho_position(Index i, Index R) {
    Index k = 0;
    for (Index col = 0; col < R; ++col) {
        for (Index row = col + 1; row < R; ++row) {
            if (k == i) return {row, col};
            ++k;
        }
    }
    throw InvalidInput("rho index " + std::to_string(i) + " out of range for R=" + std::to_string(R));
}

MatrixXd sigma_b_from_rho(const VectorXd& rho, Index R) {
    if (rho.size() != n_correlations(R)) {
        throw InvalidInput("sigma_b_from_rho: expected " + std::to_string(n_correlations(R)) + " correlations, got " +
                           std::to_string(rho.size()));
    }
    MatrixXd sb = MatrixXd::Identity(R, R);
    Index k = 0;
    for (Index col = 0; col < R; ++col) {
        for (Index row = col + 1; row < R; ++row) {
            sb(row, col) = rho(k);
            sb(col, row) = rho(k);
            ++k;
        }
    }
    return sb;
}

ResponseCovariance build_sigma_r(const VectorXd& mu, const VarianceSpec& var, double p, const VectorXd& tau,
                                 const MatrixPredictor& pred, const CovLinkSpec& cl) {
    if (mu.size() != pred.dim()) {
        throw InvalidInput("build_sigma_r: mean has length " + std::to_string(mu.size()) + ", predictor dimension is " +
                           std::to_string(pred.dim()));
    }
    ResponseCovariance rc;
    rc.U = assemble_U(tau, pred);
    rc.omega = covlink_apply_inverse(cl, rc.U);
    rc.v_sqrt = variance_eval(power_component(var), mu, p).array().sqrt().matrix();
    const Index n = mu.size();
    rc.sigma.resize(n, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) rc.sigma(i, j) = rc.v_sqrt(i) * rc.omega(i, j) * rc.v_sqrt(j);
    }
    if (var.kind == VarianceKind::poisson_tweedie) rc.sigma.diagonal() += mu;
    rc.sigma = symmetrize(rc.sigma);
    rc.chol = cholesky_lower(rc.sigma, "response covariance Sigma_r");
    return rc;
}

JointCovariance generalized_kronecker(std::vector<ResponseCovariance> responses, const MatrixXd& Sb,
                                      bool with_inverse) {
    const Index R = static_cast<Index>(responses.size());
    if (R == 0) throw InvalidInput("generalized_kronecker: no responses");
    if (Sb.rows() != R || Sb.cols() != R) throw InvalidInput("generalized_kronecker: Sigma_b has the wrong shape");
    const Index n = responses.front().sigma.rows();
    for (const auto& rc : responses) {
        if (rc.sigma.rows() != n) throw InvalidInput("generalized_kronecker: responses differ in dimension");
    }
    if (R > 1) (void)cholesky_lower(Sb, "between-response correlation Sigma_b");

    JointCovariance jc;
    jc.Sb = Sb;
    jc.C.resize(n * R, n * R);
    for (Index r = 0; r < R; ++r) {
        jc.C.block(r * n, r * n, n, n) = responses[static_cast<std::size_t>(r)].sigma;
        for (Index s = 0; s < r; ++s) {
            const MatrixXd block = Sb(r, s) * (responses[static_cast<std::size_t>(r)].chol *
                                               responses[static_cast<std::size_t>(s)].chol.transpose());
            jc.C.block(r * n, s * n, n, n) = block;
            jc.C.block(s * n, r * n, n, n) = block.transpose();
        }
    }
    if (with_inverse) jc.C_inv = spd_inverse(jc.C, "joint covariance C");
    jc.responses = std::move(responses);
    return jc;
}

MatrixXd phi_operator(const MatrixXd& m) {
    MatrixXd out = m.triangularView<Eigen::StrictlyLower>();
    out.diagonal() = 0.5 * m.diagonal();
    return out;
}

MatrixXd chol_deriv(const MatrixXd& chol, const MatrixXd& d_sigma) {
    for (Index i = 0; i < chol.rows(); ++i) {
        if (chol(i, i) == 0.0) throw FactorizationError("chol_deriv: singular Cholesky factor", i);
    }
    const auto lower = chol.triangularView<Eigen::Lower>();
    // L^{-1} dSigma L^{-T} = L^{-1} (L^{-1} dSigma)^T for symmetric dSigma.
    const MatrixXd half = lower.solve(d_sigma);
    const MatrixXd inner = lower.solve(half.transpose());
    return chol * phi_operator(inner);
}

MatrixXd dC_drho(const JointCovariance& assembly, Index i) {
    const Index R = assembly.n_responses();
    const Index n = assembly.block_dim();
    const auto [a, b] = rho_position(i, R);
    MatrixXd dc = MatrixXd::Zero(n * R, n * R);
    const MatrixXd block = assembly.responses[static_cast<std::size_t>(a)].chol *
                           assembly.responses[static_cast<std::size_t>(b)].chol.transpose();
    dc.block(a * n, b * n, n, n) = block;
    dc.block(b * n, a * n, n, n) = block.transpose();
    return dc;
}

MatrixXd dC_dpar_r(const JointCovariance& assembly, Index r, const MatrixXd& d_sigma_r) {
    const Index R = assembly.n_responses();
    const Index n = assembly.block_dim();
    if (r < 0 || r >= R) throw InvalidInput("dC_dpar_r: response index out of range");
    MatrixXd dc = MatrixXd::Zero(n * R, n * R);
    dc.block(r * n, r * n, n, n) = symmetrize(d_sigma_r);
    if (R == 1) return dc;
    const MatrixXd d_chol = chol_deriv(assembly.responses[static_cast<std::size_t>(r)].chol, d_sigma_r);
    for (Index s = 0; s < R; ++s) {
        if (s == r) continue;
        const MatrixXd block = assembly.Sb(r, s) * (d_chol * assembly.responses[static_cast<std::size_t>(s)].chol.transpose());
        dc.block(r * n, s * n, n, n) = block;
        dc.block(s * n, r * n, n, n) = block.transpose();
    }
    return dc;
}

MatrixXd dSigma_dp(const ResponseCovariance& rc, const VectorXd& mu, const VarianceSpec& var, double p) {
    // d V^{1/2} / dp = (1/2) V^{-1/2} dV/dp
    const VectorXd dv = variance_deriv_p(power_component(var), mu, p);
    const VectorXd dv_sqrt = (0.5 * dv.array() / rc.v_sqrt.array()).matrix();
    return sandwich_derivative(dv_sqrt, rc.v_sqrt, rc.omega);
}

MatrixXd dSigma_dp(const VectorXd& mu, const VarianceSpec& var, double p, const VectorXd& tau,
                   const MatrixPredictor& pred, const CovLinkSpec& cl) {
    return dSigma_dp(build_sigma_r(mu, var, p, tau, pred, cl), mu, var, p);
}

MatrixXd dSigma_dtau(const ResponseCovariance& rc, const CovLinkSpec& cl, const StructureMatrix& z) {
    const MatrixXd d_omega = covlink_deriv_at(cl, rc.omega, z.to_dense());
    MatrixXd out(d_omega.rows(), d_omega.cols());
    for (Index j = 0; j < out.cols(); ++j) {
        for (Index i = 0; i < out.rows(); ++i) out(i, j) = rc.v_sqrt(i) * d_omega(i, j) * rc.v_sqrt(j);
    }
    return symmetrize(out);
}

MatrixXd dSigma_dtau(const VectorXd& mu, const VarianceSpec& var, double p, const VectorXd& tau,
                     const MatrixPredictor& pred, const CovLinkSpec& cl, Index d) {
    if (d < 0 || d >= pred.size()) throw InvalidInput("dSigma_dtau: component index out of range");
    return dSigma_dtau(build_sigma_r(mu, var, p, tau, pred, cl), cl, pred[d]);
}

MatrixXd dSigma_dmu(const ResponseCovariance& rc, const VectorXd& mu, const VarianceSpec& var, double p,
                    const VectorXd& d_mu) {
    const Index n = mu.size();
    MatrixXd out = MatrixXd::Zero(n, n);
    if (var.kind != VarianceKind::constant) {
        const VectorXd dv = variance_deriv_mu(power_component(var), mu, p);
        const VectorXd dv_sqrt = (0.5 * dv.array() * d_mu.array() / rc.v_sqrt.array()).matrix();
        out = sandwich_derivative(dv_sqrt, rc.v_sqrt, rc.omega);
    }
    if (var.kind == VarianceKind::poisson_tweedie) out.diagonal() += d_mu;
    return out;
}

MatrixXd weight_matrix(const MatrixXd& C_inv, const MatrixXd& dC) {
    if (C_inv.rows() != dC.rows() || C_inv.cols() != dC.cols()) throw InvalidInput("weight_matrix: shape mismatch");
    return symmetrize(C_inv * dC * C_inv);
}

}  // namespace mcglm
