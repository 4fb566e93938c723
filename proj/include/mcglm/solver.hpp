#pragma once

#include "mcglm/estfun.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcglm {

enum class Algorithm { chaser, reciprocal };
/// Fourth cumulants used in V_lambda: plug-in from residuals, or zero (Gaussian).
enum class FourthCumulant { empirical, zero };

struct SolverOptions {
    Algorithm algorithm = Algorithm::chaser;
    double tol_score = 1e-6;
    double tol_param = 1e-8;
    int max_iter = 200;
    double alpha_step = 0.01;
    double alpha_max = 1.0;
    bool correct_pearson = true;
    FourthCumulant fourth_cumulant = FourthCumulant::empirical;

    /// Throws InvalidInput when a field is out of range.
    void validate() const;
};

[[nodiscard]] Algorithm parse_algorithm(std::string_view name);
[[nodiscard]] std::string_view to_string(Algorithm a);

enum class FitStatus { converged, max_iterations, alpha_cap, singular, not_positive_definite };
[[nodiscard]] std::string_view to_string(FitStatus s);

struct TraceEntry {
    int iteration = 0;
    VectorXd theta;
    double score_norm = 0.0;  ///< max(|psi_beta|, |psi_lambda (+ b)|)
    double step_norm = 0.0;   ///< max-abs parameter change into this iterate
    double alpha = 0.0;       ///< alpha that produced this iterate
};

struct FitResult {
    ParameterLayout layout;
    ThetaPartition theta_hat;
    GodambeResult godambe;  ///< empty matrices when unavailable
    VectorXd std_errors;
    std::vector<TraceEntry> trace;
    bool converged = false;
    FitStatus status = FitStatus::max_iterations;
    std::string message;
    int iterations = 0;
    int n_alpha_escalations = 0;
    VectorXd score_beta;
    VectorXd score_lambda;  ///< corrected when correct_pearson is on
    std::vector<VectorXd> fitted;
    MatrixXd Sb;
};

class AlphaCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ProposalOutcome { pd_ok, pd_fail };

/// pd_ok resets to 0; pd_fail adds the step, capped at alpha_max. Throws
/// AlphaCapExceeded when the previous value already sat at the cap.
[[nodiscard]] double alpha_strategy(double previous_alpha, ProposalOutcome outcome, const SolverOptions& opts);

/// Ingredients of the dispersion update at (beta_new, lambda).
struct LambdaStepInputs {
    VectorXd psi;  ///< Pearson score, bias-corrected when requested
    MatrixXd S;    ///< S_lambda
    MatrixXd V;    ///< V_lambda (only filled when needed)
};

[[nodiscard]] VectorXd beta_update(const EstimatingState& state);
[[nodiscard]] LambdaStepInputs lambda_inputs(const EstimatingState& state, const SolverOptions& opts,
                                             bool with_variability);
/// lambda - [alpha psi^T psi V^{-1} S + S]^{-1} psi; alpha = 0 uses S alone.
[[nodiscard]] VectorXd lambda_update(const VectorXd& lambda, const LambdaStepInputs& in, double alpha);

[[nodiscard]] ThetaPartition chaser_step(const Problem& problem, const ThetaPartition& theta,
                                         const SolverOptions& opts = {});
[[nodiscard]] ThetaPartition reciprocal_step(const Problem& problem, const ThetaPartition& theta, double alpha,
                                             const SolverOptions& opts = {});

[[nodiscard]] ThetaPartition initialize(const Problem& problem);

/// Corrected (or raw) Pearson score and the quasi-score at theta.
[[nodiscard]] VectorXd lambda_score(const EstimatingState& state, const SolverOptions& opts);

[[nodiscard]] FitResult fit(const Problem& problem, const SolverOptions& opts = {},
                            const std::optional<ThetaPartition>& start = std::nullopt);

/// Estimate and delta-method standard error of lambda_a / lambda_b
/// (CAR autocorrelation from a pair of dispersion parameters).
struct RatioEstimate {
    double value = 0.0;
    double std_error = 0.0;
};
[[nodiscard]] RatioEstimate dispersion_ratio(const FitResult& result, Index lambda_num, Index lambda_den);

}  // namespace mcglm
