#include "mcglm/estfun.hpp"

#include <string>

namespace mcglm {

namespace {

// t(i,j) = tr(C^{-1} dC_i C^{-1} dC_j), filled symmetrically.
MatrixXd trace_products(const EstimatingState& state) {
    const Index Q = state.Q();
    MatrixXd t(Q, Q);
    std::vector<std::pair<Index, Index>> pairs;
    for (Index j = 0; j < Q; ++j) {
        for (Index i = j; i < Q; ++i) pairs.emplace_back(i, j);
    }
    parallel_for(static_cast<Index>(pairs.size()), [&](Index k) {
        const auto [i, j] = pairs[static_cast<std::size_t>(k)];
        const double v = trace_of_product(state.Cinv_dC[static_cast<std::size_t>(i)],
                                          state.Cinv_dC[static_cast<std::size_t>(j)]);
        t(i, j) = v;
        t(j, i) = v;
    });
    return t;
}

void require_lambda_parts(const EstimatingState& state) {
    if (state.weights.size() != state.dC.size() || state.Cinv_dC.size() != state.dC.size()) {
        throw InvalidInput("estimating state was built without dispersion derivatives");
    }
}

}  // namespace

EstimatingState evaluate_state(const Problem& problem, const ThetaPartition& theta, StateParts parts) {
    problem.check_theta(theta);
    EstimatingState st;
    st.theta = theta;
    st.mean = evaluate_mean(problem, theta.beta);
    const bool missing = problem.has_missing();
    st.assembly = assemble_covariance(problem, theta, st.mean, !missing);
    const auto& obs = problem.observed();
    if (missing) {
        st.C = select_symmetric(st.assembly.C, obs);
        st.C_inv = spd_inverse(st.C, "observed joint covariance C");
    } else {
        st.C = st.assembly.C;
        st.C_inv = st.assembly.C_inv;
    }
    const VectorXd mu = st.mean.stacked_mu();
    st.residual = problem.y_observed() - (missing ? select(mu, obs) : mu);
    const MatrixXd D_full = mean_gradient(problem, st.mean);
    st.D = missing ? select_rows(D_full, obs) : D_full;

    auto restrict = [&](MatrixXd m) { return missing ? select_symmetric(m, obs) : m; };

    if (parts.lambda_derivatives) {
        const Index Q = problem.layout().Q();
        st.dC.resize(static_cast<std::size_t>(Q));
        st.Cinv_dC.resize(static_cast<std::size_t>(Q));
        st.weights.resize(static_cast<std::size_t>(Q));
        parallel_for(Q, [&](Index i) {
            const auto k = static_cast<std::size_t>(i);
            st.dC[k] = restrict(dC_dlambda(problem, theta, st.mean, st.assembly, i));
            st.Cinv_dC[k] = st.C_inv * st.dC[k];
            st.weights[k] = symmetrize(st.Cinv_dC[k] * st.C_inv);
        });
    }
    if (parts.beta_derivatives) {
        const Index K = problem.layout().K();
        st.Cinv_dC_beta.resize(static_cast<std::size_t>(K));
        parallel_for(K, [&](Index j) {
            MatrixXd d = dC_dbeta(problem, theta, st.mean, st.assembly, j);
            if (d.size() == 0) return;
            st.Cinv_dC_beta[static_cast<std::size_t>(j)] = st.C_inv * restrict(std::move(d));
        });
    }
    return st;
}

VectorXd quasi_score(const EstimatingState& state) { return state.D.transpose() * (state.C_inv * state.residual); }

MatrixXd sensitivity_beta(const EstimatingState& state) { return -variability_beta(state); }

MatrixXd variability_beta(const EstimatingState& state) {
    return symmetrize(state.D.transpose() * state.C_inv * state.D);
}

double pearson_fn(const EstimatingState& state, Index i) {
    require_lambda_parts(state);
    if (i < 0 || i >= state.Q()) throw InvalidInput("pearson_fn: index out of range");
    const auto k = static_cast<std::size_t>(i);
    return state.residual.dot(state.weights[k] * state.residual) - state.Cinv_dC[k].trace();
}

VectorXd pearson_score(const EstimatingState& state) {
    require_lambda_parts(state);
    VectorXd psi(state.Q());
    for (Index i = 0; i < state.Q(); ++i) psi(i) = pearson_fn(state, i);
    return psi;
}

MatrixXd sensitivity_lambda(const EstimatingState& state) {
    require_lambda_parts(state);
    return -trace_products(state);
}

MatrixXd variability_lambda(const EstimatingState& state, const VectorXd& k4) {
    require_lambda_parts(state);
    const Index Q = state.Q();
    if (k4.size() != state.C.rows()) throw InvalidInput("variability_lambda: k4 has the wrong length");
    MatrixXd v = 2.0 * trace_products(state);
    if (k4.isZero(0.0)) return v;
    for (Index j = 0; j < Q; ++j) {
        const VectorXd wj = state.weights[static_cast<std::size_t>(j)].diagonal();
        for (Index i = j; i < Q; ++i) {
            const VectorXd wi = state.weights[static_cast<std::size_t>(i)].diagonal();
            const double extra = (k4.array() * wi.array() * wj.array()).sum();
            v(i, j) += extra;
            if (i != j) v(j, i) += extra;
        }
    }
    return v;
}

VectorXd empirical_k4(const VectorXd& residual, const MatrixXd& C) {
    if (residual.size() != C.rows()) throw InvalidInput("empirical_k4: residual and C differ in size");
    return (residual.array().pow(4) - 3.0 * C.diagonal().array().square()).matrix();
}

MatrixXd cross_sensitivity_lb(const EstimatingState& state) {
    require_lambda_parts(state);
    const Index K = state.K();
    const Index Q = state.Q();
    if (static_cast<Index>(state.Cinv_dC_beta.size()) != K) {
        throw InvalidInput("cross_sensitivity_lb: state was built without regression derivatives");
    }
    MatrixXd s = MatrixXd::Zero(Q, K);
    parallel_for(K, [&](Index j) {
        const auto& b = state.Cinv_dC_beta[static_cast<std::size_t>(j)];
        if (b.size() == 0) return;
        for (Index i = 0; i < Q; ++i) s(i, j) = -trace_of_product(state.Cinv_dC[static_cast<std::size_t>(i)], b);
    });
    return s;
}

MatrixXd cross_variability_lb(const EstimatingState& state, const VectorXd& residual) {
    require_lambda_parts(state);
    if (residual.size() != state.C.rows()) throw InvalidInput("cross_variability_lb: residual has the wrong length");
    const VectorXd a = state.D.transpose() * (state.C_inv * residual);
    VectorXd q(state.Q());
    for (Index i = 0; i < state.Q(); ++i) {
        q(i) = residual.dot(state.weights[static_cast<std::size_t>(i)] * residual);
    }
    return q * a.transpose();
}

GodambeResult godambe(const MatrixXd& S_theta, const MatrixXd& V_theta) {
    if (S_theta.rows() != S_theta.cols() || V_theta.rows() != S_theta.rows() || V_theta.cols() != S_theta.cols()) {
        throw InvalidInput("godambe: sensitivity and variability must be square and of equal size");
    }
    GodambeResult g;
    g.S_theta = S_theta;
    g.V_theta = V_theta;
    const MatrixXd s_inv = general_solve(S_theta, MatrixXd::Identity(S_theta.rows(), S_theta.cols()),
                                         "joint sensitivity matrix");
    g.J_inv = symmetrize(s_inv * V_theta * s_inv.transpose());
    return g;
}

GodambeResult godambe_at(const EstimatingState& state, const VectorXd& k4) {
    const Index K = state.K();
    const Index Q = state.Q();
    MatrixXd S = MatrixXd::Zero(K + Q, K + Q);
    MatrixXd V = MatrixXd::Zero(K + Q, K + Q);
    S.topLeftCorner(K, K) = sensitivity_beta(state);
    S.bottomLeftCorner(Q, K) = cross_sensitivity_lb(state);
    S.bottomRightCorner(Q, Q) = sensitivity_lambda(state);
    V.topLeftCorner(K, K) = variability_beta(state);
    const MatrixXd v_lb = cross_variability_lb(state, state.residual);
    V.bottomLeftCorner(Q, K) = v_lb;
    V.topRightCorner(K, Q) = v_lb.transpose();
    V.bottomRightCorner(Q, Q) = variability_lambda(state, k4);
    return godambe(S, V);
}

VectorXd bias_correction(const EstimatingState& state, const MatrixXd& J_beta) {
    require_lambda_parts(state);
    const Index K = state.K();
    VectorXd b = VectorXd::Zero(state.Q());
    if (K == 0) return b;
    if (J_beta.rows() != K || J_beta.cols() != K) throw InvalidInput("bias_correction: J_beta has the wrong shape");
    const MatrixXd j_inv = spd_inverse(J_beta, "regression information D^T C^{-1} D");
    for (Index i = 0; i < state.Q(); ++i) {
        const MatrixXd m = state.D.transpose() * state.weights[static_cast<std::size_t>(i)] * state.D;
        b(i) = trace_of_product(m, j_inv);
    }
    return b;
}

VectorXd bias_correction(const EstimatingState& state) { return bias_correction(state, variability_beta(state)); }

}  // namespace mcglm
