#include "mcglm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mcglm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double max_abs(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Full variance function (mu + mu^p for Poisson-Tweedie) for working weights.
VectorXd full_variance(const VarianceSpec& var, const VectorXd& mu, double p) {
    VectorXd v = variance_eval(var, mu, p);
    if (var.kind == VarianceKind::poisson_tweedie) v += mu;
    return v;
}

double initial_power(const ResponseSpec& resp) {
    if (!resp.variance.has_power()) return 0.0;
    if (resp.variance.power_known) return resp.power;
    return resp.variance.kind == VarianceKind::poisson_tweedie ? 1.5 : 1.0;
}

VectorXd starting_mean(const LinkSpec& link, const VectorXd& y) {
    switch (link.kind) {
        case LinkKind::identity:
            return y;
        case LinkKind::log: {
            const double m = std::max(y.mean(), 1e-8);
            return ((y.array() + m) / 2.0).max(1e-8).matrix();
        }
        case LinkKind::logit:
            return ((y.array() + 0.5) / 2.0).matrix();
    }
    return y;
}

}  // namespace

void SolverOptions::validate() const {
    if (!(tol_score > 0.0)) throw InvalidInput("solver option tol_score must be positive");
    if (!(tol_param > 0.0)) throw InvalidInput("solver option tol_param must be positive");
    if (max_iter < 0) throw InvalidInput("solver option max_iter must be non-negative");
    if (!(alpha_step > 0.0)) throw InvalidInput("solver option alpha_step must be positive");
    if (!(alpha_step <= alpha_max)) throw InvalidInput("solver option alpha_step must not exceed alpha_max");
}

Algorithm parse_algorithm(std::string_view name) {
    if (name == "chaser") return Algorithm::chaser;
    if (name == "reciprocal") return Algorithm::reciprocal;
    throw InvalidInput("unknown algorithm '" + std::string(name) + "' (expected chaser or reciprocal)");
}

std::string_view to_string(Algorithm a) { return a == Algorithm::chaser ? "chaser" : "reciprocal"; }

std::string_view to_string(FitStatus s) {
    switch (s) {
        case FitStatus::converged: return "converged";
        case FitStatus::max_iterations: return "max_iterations";
        case FitStatus::alpha_cap: return "alpha_cap";
        case FitStatus::singular: return "singular";
        case FitStatus::not_positive_definite: return "not_positive_definite";
    }
    return "unknown";
}

double alpha_strategy(double previous_alpha, ProposalOutcome outcome, const SolverOptions& opts) {
    if (outcome == ProposalOutcome::pd_ok) return 0.0;
    if (previous_alpha >= opts.alpha_max) {
        throw AlphaCapExceeded("covariance stays non-positive-definite with alpha at its cap " +
                               std::to_string(opts.alpha_max) + "; rescale the data or try different starting values");
    }
    return std::min(previous_alpha + opts.alpha_step, opts.alpha_max);
}

VectorXd beta_update(const EstimatingState& state) {
    if (state.K() == 0) return state.theta.beta;
    const VectorXd psi = quasi_score(state);
    return state.theta.beta + spd_solve(variability_beta(state), psi, "regression sensitivity S_beta");
}

VectorXd lambda_score(const EstimatingState& state, const SolverOptions& opts) {
    VectorXd psi = pearson_score(state);
    if (opts.correct_pearson) psi += bias_correction(state);
    return psi;
}

LambdaStepInputs lambda_inputs(const EstimatingState& state, const SolverOptions& opts, bool with_variability) {
    LambdaStepInputs in;
    in.psi = lambda_score(state, opts);
    in.S = sensitivity_lambda(state);
    if (with_variability) {
        const VectorXd k4 = opts.fourth_cumulant == FourthCumulant::empirical
                                ? empirical_k4(state.residual, state.C)
                                : VectorXd::Zero(state.C.rows()).eval();
        in.V = variability_lambda(state, k4);
    }
    return in;
}

VectorXd lambda_update(const VectorXd& lambda, const LambdaStepInputs& in, double alpha) {
    if (lambda.size() == 0) return lambda;
    MatrixXd M;
    if (alpha == 0.0) {
        M = in.S;
    } else {
        if (in.V.rows() != in.S.rows()) throw InvalidInput("lambda_update: V_lambda is required when alpha > 0");
        M = alpha * in.psi.squaredNorm() * general_solve(in.V, in.S, "dispersion variability V_lambda") + in.S;
    }
    return lambda - general_solve(M, in.psi, "dispersion sensitivity S_lambda");
}

ThetaPartition chaser_step(const Problem& problem, const ThetaPartition& theta, const SolverOptions& opts) {
    const EstimatingState state = evaluate_state(problem, theta, {false, false});
    const ThetaPartition mid{beta_update(state), theta.lambda};
    const EstimatingState mid_state = evaluate_state(problem, mid);
    return {mid.beta, lambda_update(theta.lambda, lambda_inputs(mid_state, opts, false), 0.0)};
}

ThetaPartition reciprocal_step(const Problem& problem, const ThetaPartition& theta, double alpha,
                               const SolverOptions& opts) {
    if (!(alpha >= 0.0)) throw InvalidInput("reciprocal_step: alpha must be non-negative");
    const EstimatingState state = evaluate_state(problem, theta, {false, false});
    const ThetaPartition mid{beta_update(state), theta.lambda};
    const EstimatingState mid_state = evaluate_state(problem, mid);
    return {mid.beta, lambda_update(theta.lambda, lambda_inputs(mid_state, opts, alpha > 0.0), alpha)};
}

ThetaPartition initialize(const Problem& problem) {
    const auto& layout = problem.layout();
    ThetaPartition theta{VectorXd::Zero(layout.K()), VectorXd::Zero(layout.Q())};
    for (Index r = 0; r < problem.n_responses(); ++r) {
        const auto& resp = problem.response(r);
        const std::string who = "initial fit for response '" + resp.name + "'";
        const std::vector<Index> rows = problem.observed_rows(r);
        if (rows.empty()) throw InvalidInput(who + ": no observed outcomes");
        const MatrixXd X = select_rows(problem.data().X[static_cast<std::size_t>(r)], rows);
        const VectorXd y = select(problem.data().y[static_cast<std::size_t>(r)], rows);
        const double p = initial_power(resp);
        const Index k = X.cols();
        if (static_cast<Index>(rows.size()) < k) throw InvalidInput(who + ": fewer observations than regression parameters");

        VectorXd beta = VectorXd::Zero(k);
        VectorXd mu;
        try {
            if (k > 0) {
                VectorXd eta = link_forward(resp.link, starting_mean(resp.link, y));
                for (int it = 0; it < 10; ++it) {
                    const VectorXd m = link_inverse(resp.link, eta);
                    const VectorXd d = link_inverse_deriv(resp.link, eta);
                    const VectorXd v = full_variance(resp.variance, m, p);
                    const VectorXd w = (d.array().square() / v.array()).matrix();
                    const VectorXd z = eta + ((y - m).array() / d.array()).matrix();
                    const MatrixXd xtw = X.transpose() * w.asDiagonal();
                    beta = spd_solve(xtw * X, xtw * z, "weighted cross-product X^T W X");
                    eta = X * beta;
                }
            }
            mu = link_inverse(resp.link, X * beta);
            const VectorXd res = y - mu;
            double phi = 0.0;
            if (resp.variance.kind == VarianceKind::poisson_tweedie) {
                const VectorXd vp = variance_eval(resp.variance, mu, p);
                phi = ((res.array().square() - mu.array()) / vp.array()).mean();
                phi = std::max(phi, 1e-3);
            } else {
                phi = (res.array().square() / full_variance(resp.variance, mu, p).array()).mean();
            }
            if (!(phi > 0.0) || !std::isfinite(phi)) throw InvalidInput("degenerate Pearson dispersion");
            double zbar = resp.predictor[0].to_dense().diagonal().mean();
            if (!(zbar > 0.0)) zbar = 1.0;
            const double tau0 = resp.covlink.kind == CovLinkKind::identity ? phi / zbar : 1.0 / (phi * zbar);
            theta.lambda(layout.tau_offset(r)) = tau0;
        } catch (const std::exception& e) {
            throw InvalidInput(who + " failed: " + e.what());
        }
        theta.beta.segment(layout.beta_offset(r), k) = beta;
        if (layout.power_index(r) >= 0) theta.lambda(layout.power_index(r)) = p;
    }
    return theta;
}

FitResult fit(const Problem& problem, const SolverOptions& opts, const std::optional<ThetaPartition>& start) {
    opts.validate();
    FitResult res;
    res.layout = problem.layout();
    ThetaPartition theta = start ? *start : initialize(problem);
    problem.check_theta(theta);
    const bool reciprocal = opts.algorithm == Algorithm::reciprocal;

    res.theta_hat = theta;
    EstimatingState state;
    try {
        state = evaluate_state(problem, theta);
    } catch (const FactorizationError& e) {
        res.status = FitStatus::not_positive_definite;
        res.message = std::string("covariance is not positive definite at the starting value: ") + e.what();
        return res;
    }

    double last_step = std::numeric_limits<double>::infinity();
    double alpha_used = 0.0;
    for (int iter = 0;; ++iter) {
        res.score_beta = quasi_score(state);
        res.score_lambda = lambda_score(state, opts);
        const double score = std::max(max_abs(res.score_beta), max_abs(res.score_lambda));
        res.trace.push_back({iter, theta.flat(), score, iter == 0 ? kNaN : last_step, alpha_used});
        res.iterations = iter;
        if (score < opts.tol_score && last_step < opts.tol_param) {
            res.converged = true;
            res.status = FitStatus::converged;
            break;
        }
        if (iter >= opts.max_iter) {
            res.status = FitStatus::max_iterations;
            res.message = "no convergence after " + std::to_string(opts.max_iter) + " iterations";
            break;
        }
        try {
            const ThetaPartition mid{beta_update(state), theta.lambda};
            const EstimatingState mid_state = evaluate_state(problem, mid);
            const LambdaStepInputs in = lambda_inputs(mid_state, opts, reciprocal);
            double alpha = 0.0;
            ThetaPartition proposal;
            EstimatingState next;
            for (;;) {
                proposal = {mid.beta, lambda_update(theta.lambda, in, alpha)};
                try {
                    next = evaluate_state(problem, proposal);
                    break;
                } catch (const NotPositiveDefinite&) {
                    if (!reciprocal) throw;
                    alpha = alpha_strategy(alpha, ProposalOutcome::pd_fail, opts);
                    ++res.n_alpha_escalations;
                }
            }
            alpha_used = alpha;
            last_step = std::max(max_abs(proposal.beta - theta.beta), max_abs(proposal.lambda - theta.lambda));
            theta = std::move(proposal);
            state = std::move(next);
        } catch (const AlphaCapExceeded& e) {
            res.status = FitStatus::alpha_cap;
            res.message = "iteration " + std::to_string(iter + 1) + ": " + e.what();
            break;
        } catch (const SingularMatrixError& e) {
            res.status = FitStatus::singular;
            res.message = "iteration " + std::to_string(iter + 1) + ": " + e.what();
            break;
        } catch (const FactorizationError& e) {
            res.status = FitStatus::not_positive_definite;
            res.message = "iteration " + std::to_string(iter + 1) + ": " + e.what() +
                          (reciprocal ? "" : "; the reciprocal algorithm can recover from such proposals");
            break;
        } catch (const InvalidInput& e) {
            res.status = FitStatus::not_positive_definite;
            res.message = "iteration " + std::to_string(iter + 1) + ": proposal left the model domain: " + e.what();
            break;
        }
    }

    res.theta_hat = theta;
    res.fitted = state.mean.mu;
    res.Sb = state.assembly.Sb;
    try {
        const EstimatingState full = evaluate_state(problem, theta, {true, true});
        const VectorXd k4 = opts.fourth_cumulant == FourthCumulant::empirical
                                ? empirical_k4(full.residual, full.C)
                                : VectorXd::Zero(full.C.rows()).eval();
        res.godambe = godambe_at(full, k4);
        const VectorXd d = res.godambe.J_inv.diagonal();
        res.std_errors = d.unaryExpr([](double v) { return v >= 0.0 ? std::sqrt(v) : kNaN; });
    } catch (const std::exception& e) {
        res.std_errors = VectorXd::Constant(res.layout.K() + res.layout.Q(), kNaN);
        if (!res.message.empty()) res.message += "; ";
        res.message += std::string("standard errors unavailable: ") + e.what();
    }
    return res;
}

RatioEstimate dispersion_ratio(const FitResult& result, Index lambda_num, Index lambda_den) {
    const Index K = result.layout.K();
    const Index Q = result.layout.Q();
    if (lambda_num < 0 || lambda_num >= Q || lambda_den < 0 || lambda_den >= Q) {
        throw InvalidInput("dispersion_ratio: index out of range");
    }
    const double a = result.theta_hat.lambda(lambda_num);
    const double b = result.theta_hat.lambda(lambda_den);
    RatioEstimate out;
    out.value = a / b;
    if (result.godambe.J_inv.rows() != K + Q) {
        out.std_error = kNaN;
        return out;
    }
    const Index ia = K + lambda_num;
    const Index ib = K + lambda_den;
    const double ga = 1.0 / b;
    const double gb = -a / (b * b);
    const auto& J = result.godambe.J_inv;
    double var = ga * ga * J(ia, ia) + gb * gb * J(ib, ib);
    if (ia != ib) var += 2.0 * ga * gb * J(ia, ib);
    out.std_error = var >= 0.0 ? std::sqrt(var) : kNaN;
    return out;
}

}  // namespace mcglm
