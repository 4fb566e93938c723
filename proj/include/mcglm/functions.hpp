#pragma once

#include "mcglm/linalg.hpp"

#include <string>
#include <string_view>

namespace mcglm {

enum class LinkKind { identity, log, logit };
enum class VarianceKind { constant, tweedie_power, poisson_tweedie, binomial };
enum class CovLinkKind { identity, inverse };

struct LinkSpec {
    LinkKind kind = LinkKind::identity;
};

struct VarianceSpec {
    VarianceKind kind = VarianceKind::constant;
    /// Fixed power parameter. Ignored by kinds without a power.
    bool power_known = true;

    [[nodiscard]] bool has_power() const noexcept {
        return kind == VarianceKind::tweedie_power || kind == VarianceKind::poisson_tweedie;
    }
    /// True when p is part of the estimated parameter vector.
    [[nodiscard]] bool power_estimated() const noexcept { return has_power() && !power_known; }
};

struct CovLinkSpec {
    CovLinkKind kind = CovLinkKind::identity;
};

// Saturation bounds applied to eta before exponentiation.
inline constexpr double kLogitEtaBound = 30.0;
inline constexpr double kLogEtaBound = 700.0;

/// g: mean to linear predictor scale.
[[nodiscard]] VectorXd link_forward(const LinkSpec& link, const VectorXd& mu);

/// g^{-1}. When eta lies outside the saturation bound it is clamped and
/// `*saturated` (if given) is set.
[[nodiscard]] VectorXd link_inverse(const LinkSpec& link, const VectorXd& eta, bool* saturated = nullptr);

/// d g^{-1} / d eta, evaluated at the clamped eta (so always > 0).
[[nodiscard]] VectorXd link_inverse_deriv(const LinkSpec& link, const VectorXd& eta);

/// theta(mu; p). For poisson_tweedie only the mu^p component is returned;
/// the additive diag(mu) term belongs to the covariance assembly.
[[nodiscard]] VectorXd variance_eval(const VarianceSpec& var, const VectorXd& mu, double p);

/// d theta / d p = mu^p log(mu) for the power component.
[[nodiscard]] VectorXd variance_deriv_p(const VarianceSpec& var, const VectorXd& mu, double p);

/// d theta / d mu. For poisson_tweedie this is the full mu + mu^p derivative.
[[nodiscard]] VectorXd variance_deriv_mu(const VarianceSpec& var, const VectorXd& mu, double p);

/// Omega = h^{-1}(U).
[[nodiscard]] MatrixXd covlink_apply_inverse(const CovLinkSpec& cl, const MatrixXd& u);

/// d Omega / d tau_d for U = sum tau_d Z_d.
[[nodiscard]] MatrixXd covlink_deriv(const CovLinkSpec& cl, const MatrixXd& u, const MatrixXd& z);

/// Same as covlink_deriv when Omega = h^{-1}(U) is already known.
[[nodiscard]] MatrixXd covlink_deriv_at(const CovLinkSpec& cl, const MatrixXd& omega, const MatrixXd& z);

[[nodiscard]] LinkKind parse_link(std::string_view name);
[[nodiscard]] VarianceKind parse_variance(std::string_view name);
[[nodiscard]] CovLinkKind parse_covlink(std::string_view name);
[[nodiscard]] std::string_view to_string(LinkKind kind);
[[nodiscard]] std::string_view to_string(VarianceKind kind);
[[nodiscard]] std::string_view to_string(CovLinkKind kind);

}  // namespace mcglm
