#include "mcglm/model.hpp"

#include <cmath>
#include <string>

namespace mcglm {

ParameterLayout::ParameterLayout(const ModelSpec& model, const std::vector<Index>& beta_sizes) {
    const Index R = static_cast<Index>(model.responses.size());
    if (static_cast<Index>(beta_sizes.size()) != R) throw InvalidInput("layout: one design size per response");

    auto rname = [&](Index r) { return model.responses[static_cast<std::size_t>(r)].name; };

    for (Index r = 0; r < R; ++r) {
        const auto& resp = model.responses[static_cast<std::size_t>(r)];
        beta_offset_.push_back(static_cast<Index>(beta_slots_.size()));
        beta_size_.push_back(beta_sizes[static_cast<std::size_t>(r)]);
        for (Index j = 0; j < beta_sizes[static_cast<std::size_t>(r)]; ++j) {
            std::string col = static_cast<std::size_t>(j) < resp.design_names.size()
                                  ? resp.design_names[static_cast<std::size_t>(j)]
                                  : "b" + std::to_string(j);
            beta_slots_.push_back({ParamRole::beta, r, j, rname(r) + ":" + col});
        }
    }
    if (!model.fixed_rho) {
        n_rho_free_ = n_correlations(R);
        for (Index i = 0; i < n_rho_free_; ++i) {
            const auto [a, b] = rho_position(i, R);
            lambda_slots_.push_back({ParamRole::rho, b, i, "rho(" + rname(a) + "," + rname(b) + ")"});
        }
    }
    for (Index r = 0; r < R; ++r) {
        if (model.responses[static_cast<std::size_t>(r)].variance.power_estimated()) {
            power_index_.push_back(static_cast<Index>(lambda_slots_.size()));
            lambda_slots_.push_back({ParamRole::power, r, 0, rname(r) + ":power"});
        } else {
            power_index_.push_back(-1);
        }
    }
    for (Index r = 0; r < R; ++r) {
        const Index d_count = model.responses[static_cast<std::size_t>(r)].predictor.size();
        tau_offset_.push_back(static_cast<Index>(lambda_slots_.size()));
        tau_size_.push_back(d_count);
        for (Index d = 0; d < d_count; ++d) {
            lambda_slots_.push_back({ParamRole::tau, r, d, rname(r) + ":tau" + std::to_string(d)});
        }
    }
}

const ParamSlot& ParameterLayout::slot(Index theta_index) const {
    if (theta_index < K()) return beta_slots_.at(static_cast<std::size_t>(theta_index));
    return lambda_slots_.at(static_cast<std::size_t>(theta_index - K()));
}

VectorXd ThetaPartition::flat() const {
    VectorXd out(beta.size() + lambda.size());
    out << beta, lambda;
    return out;
}

ThetaPartition ThetaPartition::from_flat(const VectorXd& theta, Index K) {
    if (K < 0 || K > theta.size()) throw InvalidInput("theta shorter than the regression block");
    return {theta.head(K), theta.tail(theta.size() - K)};
}

VectorXd MeanEvaluation::stacked_mu() const {
    Index total = 0;
    for (const auto& m : mu) total += m.size();
    VectorXd out(total);
    Index at = 0;
    for (const auto& m : mu) {
        out.segment(at, m.size()) = m;
        at += m.size();
    }
    return out;
}

// ---------------------------------------------------------------------------

Problem::Problem(ModelSpec model, Dataset data) : model_(std::move(model)), data_(std::move(data)) {
    const Index R = static_cast<Index>(model_.responses.size());
    if (R < 1) throw InvalidInput("model has no responses");
    if (static_cast<Index>(data_.y.size()) != R || static_cast<Index>(data_.X.size()) != R) {
        throw InvalidInput("dataset must carry one outcome vector and one design matrix per response");
    }
    n_ = data_.y.front().size();
    if (n_ < 1) throw InvalidInput("dataset has no rows");
    std::vector<Index> beta_sizes;
    for (Index r = 0; r < R; ++r) {
        const auto& resp = model_.responses[static_cast<std::size_t>(r)];
        const auto& y = data_.y[static_cast<std::size_t>(r)];
        const auto& X = data_.X[static_cast<std::size_t>(r)];
        const std::string who = "response '" + resp.name + "'";
        if (y.size() != n_) throw InvalidInput(who + ": outcome length differs from the first response");
        if (X.rows() != n_) throw InvalidInput(who + ": design matrix has " + std::to_string(X.rows()) + " rows, expected " + std::to_string(n_));
        if (!X.allFinite()) throw InvalidInput(who + ": design matrix has missing or non-finite entries");
        if (resp.predictor.size() < 1) throw InvalidInput(who + ": matrix linear predictor is empty");
        if (resp.predictor.dim() != n_) {
            throw InvalidInput(who + ": matrix linear predictor has dimension " + std::to_string(resp.predictor.dim()) +
                               ", expected " + std::to_string(n_));
        }
        if (resp.variance.has_power() && resp.variance.power_known && !std::isfinite(resp.power)) {
            throw InvalidInput(who + ": fixed power is not finite");
        }
        beta_sizes.push_back(X.cols());
    }
    if (model_.fixed_rho && model_.fixed_rho->size() != n_correlations(R)) {
        throw InvalidInput("fixed correlations: expected " + std::to_string(n_correlations(R)) + " values");
    }
    layout_ = ParameterLayout(model_, beta_sizes);

    std::vector<double> yobs;
    for (Index r = 0; r < R; ++r) {
        const auto& y = data_.y[static_cast<std::size_t>(r)];
        for (Index i = 0; i < n_; ++i) {
            if (std::isfinite(y(i))) {
                observed_.push_back(r * n_ + i);
                yobs.push_back(y(i));
            }
        }
    }
    if (observed_.empty()) throw InvalidInput("dataset has no observed outcomes");
    y_observed_ = Eigen::Map<VectorXd>(yobs.data(), static_cast<Index>(yobs.size()));
}

std::vector<Index> Problem::observed_rows(Index r) const {
    std::vector<Index> rows;
    for (Index k : observed_) {
        if (k / n_ == r) rows.push_back(k % n_);
    }
    return rows;
}

VectorXd Problem::beta(const ThetaPartition& theta, Index r) const {
    return theta.beta.segment(layout_.beta_offset(r), layout_.beta_size(r));
}

VectorXd Problem::rho(const ThetaPartition& theta) const {
    if (model_.fixed_rho) return *model_.fixed_rho;
    return theta.lambda.head(layout_.n_rho_free());
}

double Problem::power(const ThetaPartition& theta, Index r) const {
    const Index idx = layout_.power_index(r);
    if (idx >= 0) return theta.lambda(idx);
    return response(r).power;
}

VectorXd Problem::tau(const ThetaPartition& theta, Index r) const {
    return theta.lambda.segment(layout_.tau_offset(r), layout_.tau_size(r));
}

void Problem::check_theta(const ThetaPartition& theta) const {
    if (theta.beta.size() != layout_.K() || theta.lambda.size() != layout_.Q()) {
        throw InvalidInput("theta has " + std::to_string(theta.beta.size()) + " regression and " +
                           std::to_string(theta.lambda.size()) + " dispersion entries; model expects " +
                           std::to_string(layout_.K()) + " and " + std::to_string(layout_.Q()));
    }
    if (!theta.beta.allFinite() || !theta.lambda.allFinite()) throw InvalidInput("theta has non-finite entries");
}

// ---------------------------------------------------------------------------

MeanEvaluation evaluate_mean(const Problem& problem, const VectorXd& beta) {
    const Index R = problem.n_responses();
    const auto& layout = problem.layout();
    if (beta.size() != layout.K()) throw InvalidInput("evaluate_mean: beta has the wrong length");
    MeanEvaluation ev;
    for (Index r = 0; r < R; ++r) {
        const auto& X = problem.data().X[static_cast<std::size_t>(r)];
        const VectorXd eta = X * beta.segment(layout.beta_offset(r), layout.beta_size(r));
        bool sat = false;
        ev.mu.push_back(link_inverse(problem.response(r).link, eta, &sat));
        ev.dmu_deta.push_back(link_inverse_deriv(problem.response(r).link, eta));
        ev.eta.push_back(eta);
        ev.saturated = ev.saturated || sat;
    }
    return ev;
}

JointCovariance assemble_covariance(const Problem& problem, const ThetaPartition& theta, const MeanEvaluation& mean,
                                    bool with_inverse) {
    const Index R = problem.n_responses();
    std::vector<ResponseCovariance> parts;
    parts.reserve(static_cast<std::size_t>(R));
    for (Index r = 0; r < R; ++r) {
        const auto& resp = problem.response(r);
        parts.push_back(build_sigma_r(mean.mu[static_cast<std::size_t>(r)], resp.variance, problem.power(theta, r),
                                      problem.tau(theta, r), resp.predictor, resp.covlink));
    }
    return generalized_kronecker(std::move(parts), sigma_b_from_rho(problem.rho(theta), R), with_inverse);
}

MatrixXd dC_dlambda(const Problem& problem, const ThetaPartition& theta, const MeanEvaluation& mean,
                    const JointCovariance& assembly, Index i) {
    const auto& slot = problem.layout().lambda_slots().at(static_cast<std::size_t>(i));
    const Index r = slot.response;
    switch (slot.role) {
        case ParamRole::rho:
            return dC_drho(assembly, slot.component);
        case ParamRole::power: {
            const auto& resp = problem.response(r);
            const MatrixXd ds = dSigma_dp(assembly.responses[static_cast<std::size_t>(r)],
                                          mean.mu[static_cast<std::size_t>(r)], resp.variance, problem.power(theta, r));
            return dC_dpar_r(assembly, r, ds);
        }
        case ParamRole::tau: {
            const auto& resp = problem.response(r);
            const MatrixXd ds = dSigma_dtau(assembly.responses[static_cast<std::size_t>(r)], resp.covlink,
                                            resp.predictor[slot.component]);
            return dC_dpar_r(assembly, r, ds);
        }
        case ParamRole::beta:
            break;
    }
    throw InvalidInput("dC_dlambda: slot is not a dispersion parameter");
}

MatrixXd dC_dbeta(const Problem& problem, const ThetaPartition& theta, const MeanEvaluation& mean,
                  const JointCovariance& assembly, Index j) {
    const auto& slot = problem.layout().beta_slots().at(static_cast<std::size_t>(j));
    const Index r = slot.response;
    const auto& resp = problem.response(r);
    if (resp.variance.kind == VarianceKind::constant) return {};
    const auto& X = problem.data().X[static_cast<std::size_t>(r)];
    const VectorXd d_mu = mean.dmu_deta[static_cast<std::size_t>(r)].cwiseProduct(X.col(slot.component));
    const MatrixXd ds = dSigma_dmu(assembly.responses[static_cast<std::size_t>(r)], mean.mu[static_cast<std::size_t>(r)],
                                   resp.variance, problem.power(theta, r), d_mu);
    return dC_dpar_r(assembly, r, ds);
}

MatrixXd mean_gradient(const Problem& problem, const MeanEvaluation& mean) {
    const Index R = problem.n_responses();
    const Index n = problem.n_units();
    const auto& layout = problem.layout();
    MatrixXd D = MatrixXd::Zero(n * R, layout.K());
    for (Index r = 0; r < R; ++r) {
        const auto& X = problem.data().X[static_cast<std::size_t>(r)];
        D.block(r * n, layout.beta_offset(r), n, layout.beta_size(r)) =
            mean.dmu_deta[static_cast<std::size_t>(r)].asDiagonal() * X;
    }
    return D;
}

}  // namespace mcglm
