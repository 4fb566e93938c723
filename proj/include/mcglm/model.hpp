#pragma once

#include "mcglm/covariance.hpp"
#include "mcglm/functions.hpp"
#include "mcglm/matpred.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mcglm {

struct ResponseSpec {
    std::string name;
    LinkSpec link;
    VarianceSpec variance;
    /// Value of p when variance.power_known; ignored otherwise.
    double power = 1.0;
    CovLinkSpec covlink;
    MatrixPredictor predictor;
    /// Optional labels for the design columns, used in reports.
    std::vector<std::string> design_names;
};

struct ModelSpec {
    std::vector<ResponseSpec> responses;
    /// When set, Sigma_b is held at these correlations and rho leaves lambda.
    std::optional<VectorXd> fixed_rho;
};

/// Per-response N-vectors of outcomes (NaN marks a missing value) and N x k_r
/// design matrices.
struct Dataset {
    std::vector<VectorXd> y;
    std::vector<MatrixXd> X;
};

enum class ParamRole { beta, rho, power, tau };

struct ParamSlot {
    ParamRole role;
    Index response;   ///< owning response (first response of the pair for rho)
    Index component;  ///< design column, correlation index or tau index
    std::string name;
};

/// Flat ordering of theta = (beta, lambda), lambda = (rho..., p..., tau_1..., tau_R...).
class ParameterLayout {
public:
    ParameterLayout() = default;
    ParameterLayout(const ModelSpec& model, const std::vector<Index>& beta_sizes);

    [[nodiscard]] Index K() const noexcept { return static_cast<Index>(beta_slots_.size()); }
    [[nodiscard]] Index Q() const noexcept { return static_cast<Index>(lambda_slots_.size()); }
    [[nodiscard]] Index n_responses() const noexcept { return static_cast<Index>(beta_offset_.size()); }

    [[nodiscard]] Index beta_offset(Index r) const { return beta_offset_.at(static_cast<std::size_t>(r)); }
    [[nodiscard]] Index beta_size(Index r) const { return beta_size_.at(static_cast<std::size_t>(r)); }
    [[nodiscard]] Index n_rho_free() const noexcept { return n_rho_free_; }
    /// Position of p_r in lambda, or -1 when p_r is fixed or absent.
    [[nodiscard]] Index power_index(Index r) const { return power_index_.at(static_cast<std::size_t>(r)); }
    [[nodiscard]] Index tau_offset(Index r) const { return tau_offset_.at(static_cast<std::size_t>(r)); }
    [[nodiscard]] Index tau_size(Index r) const { return tau_size_.at(static_cast<std::size_t>(r)); }

    [[nodiscard]] const std::vector<ParamSlot>& beta_slots() const noexcept { return beta_slots_; }
    [[nodiscard]] const std::vector<ParamSlot>& lambda_slots() const noexcept { return lambda_slots_; }
    /// Slot of the flat theta position (beta first, then lambda).
    [[nodiscard]] const ParamSlot& slot(Index theta_index) const;

private:
    std::vector<Index> beta_offset_, beta_size_, power_index_, tau_offset_, tau_size_;
    Index n_rho_free_ = 0;
    std::vector<ParamSlot> beta_slots_, lambda_slots_;
};

struct ThetaPartition {
    VectorXd beta;
    VectorXd lambda;

    [[nodiscard]] VectorXd flat() const;
    [[nodiscard]] static ThetaPartition from_flat(const VectorXd& theta, Index K);
};

struct MeanEvaluation {
    std::vector<VectorXd> eta;
    std::vector<VectorXd> mu;
    std::vector<VectorXd> dmu_deta;
    bool saturated = false;

    [[nodiscard]] VectorXd stacked_mu() const;
};

/// A validated model paired with its data.
class Problem {
public:
    Problem(ModelSpec model, Dataset data);

    [[nodiscard]] const ModelSpec& model() const noexcept { return model_; }
    [[nodiscard]] const Dataset& data() const noexcept { return data_; }
    [[nodiscard]] const ParameterLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const ResponseSpec& response(Index r) const { return model_.responses.at(static_cast<std::size_t>(r)); }

    [[nodiscard]] Index n_units() const noexcept { return n_; }
    [[nodiscard]] Index n_responses() const noexcept { return static_cast<Index>(model_.responses.size()); }

    /// Stacked (response-major) indices of observed outcomes.
    [[nodiscard]] const std::vector<Index>& observed() const noexcept { return observed_; }
    [[nodiscard]] bool has_missing() const noexcept { return static_cast<Index>(observed_.size()) != n_ * n_responses(); }
    [[nodiscard]] const VectorXd& y_observed() const noexcept { return y_observed_; }
    /// Observed row indices of response r.
    [[nodiscard]] std::vector<Index> observed_rows(Index r) const;

    [[nodiscard]] VectorXd beta(const ThetaPartition& theta, Index r) const;
    [[nodiscard]] VectorXd rho(const ThetaPartition& theta) const;
    [[nodiscard]] double power(const ThetaPartition& theta, Index r) const;
    [[nodiscard]] VectorXd tau(const ThetaPartition& theta, Index r) const;

    /// Throws InvalidInput unless theta has the layout's K and Q.
    void check_theta(const ThetaPartition& theta) const;

private:
    ModelSpec model_;
    Dataset data_;
    ParameterLayout layout_;
    Index n_ = 0;
    std::vector<Index> observed_;
    VectorXd y_observed_;
};

[[nodiscard]] MeanEvaluation evaluate_mean(const Problem& problem, const VectorXd& beta);

/// Full (NR x NR, missing rows included) joint covariance at theta.
[[nodiscard]] JointCovariance assemble_covariance(const Problem& problem, const ThetaPartition& theta,
                                                  const MeanEvaluation& mean, bool with_inverse);

/// Full-size dC / d lambda_i.
[[nodiscard]] MatrixXd dC_dlambda(const Problem& problem, const ThetaPartition& theta, const MeanEvaluation& mean,
                                  const JointCovariance& assembly, Index i);

/// Full-size dC / d beta_j by the chain rule through mu. Empty matrix when
/// the owning response's covariance does not depend on its mean.
[[nodiscard]] MatrixXd dC_dbeta(const Problem& problem, const ThetaPartition& theta, const MeanEvaluation& mean,
                                const JointCovariance& assembly, Index j);

/// Full-size NR x K gradient of the stacked mean.
[[nodiscard]] MatrixXd mean_gradient(const Problem& problem, const MeanEvaluation& mean);

}  // namespace mcglm
