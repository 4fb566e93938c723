#include "mcglm/functions.hpp"

#include <cmath>
#include <string>

namespace mcglm {

namespace {

void check_domain(const VarianceSpec& var, const VectorXd& mu) {
    for (Index i = 0; i < mu.size(); ++i) {
        const double m = mu(i);
        switch (var.kind) {
            case VarianceKind::constant:
                if (!std::isfinite(m)) throw InvalidInput("variance: non-finite mean at index " + std::to_string(i));
                break;
            case VarianceKind::tweedie_power:
            case VarianceKind::poisson_tweedie:
                if (!(m > 0.0) || !std::isfinite(m)) {
                    throw InvalidInput("variance: power family needs mu > 0, got " + std::to_string(m) +
                                       " at index " + std::to_string(i));
                }
                break;
            case VarianceKind::binomial:
                if (!(m > 0.0 && m < 1.0)) {
                    throw InvalidInput("variance: binomial needs 0 < mu < 1, got " + std::to_string(m) +
                                       " at index " + std::to_string(i));
                }
                break;
        }
    }
}

double clamp_eta(LinkKind kind, double eta, bool& hit) {
    const double bound = kind == LinkKind::logit ? kLogitEtaBound : kLogEtaBound;
    if (eta > bound) {
        hit = true;
        return bound;
    }
    if (eta < -bound) {
        hit = true;
        return -bound;
    }
    return eta;
}

}  // namespace

VectorXd link_forward(const LinkSpec& link, const VectorXd& mu) {
    switch (link.kind) {
        case LinkKind::identity:
            return mu;
        case LinkKind::log:
            return mu.array().log().matrix();
        case LinkKind::logit:
            return (mu.array() / (1.0 - mu.array())).log().matrix();
    }
    return mu;
}

VectorXd link_inverse(const LinkSpec& link, const VectorXd& eta, bool* saturated) {
    if (!eta.allFinite()) throw InvalidInput("link_inverse: non-finite linear predictor");
    VectorXd mu(eta.size());
    bool hit = false;
    for (Index i = 0; i < eta.size(); ++i) {
        switch (link.kind) {
            case LinkKind::identity:
                mu(i) = eta(i);
                break;
            case LinkKind::log:
                mu(i) = std::exp(clamp_eta(link.kind, eta(i), hit));
                break;
            case LinkKind::logit:
                mu(i) = 1.0 / (1.0 + std::exp(-clamp_eta(link.kind, eta(i), hit)));
                break;
        }
    }
    if (saturated) *saturated = hit;
    return mu;
}

VectorXd link_inverse_deriv(const LinkSpec& link, const VectorXd& eta) {
    if (!eta.allFinite()) throw InvalidInput("link_inverse_deriv: non-finite linear predictor");
    VectorXd d(eta.size());
    bool hit = false;
    for (Index i = 0; i < eta.size(); ++i) {
        switch (link.kind) {
            case LinkKind::identity:
                d(i) = 1.0;
                break;
            case LinkKind::log:
                d(i) = std::exp(clamp_eta(link.kind, eta(i), hit));
                break;
            case LinkKind::logit: {
                const double m = 1.0 / (1.0 + std::exp(-clamp_eta(link.kind, eta(i), hit)));
                d(i) = m * (1.0 - m);
                break;
            }
        }
    }
    return d;
}

VectorXd variance_eval(const VarianceSpec& var, const VectorXd& mu, double p) {
    check_domain(var, mu);
    switch (var.kind) {
        case VarianceKind::constant:
            return VectorXd::Ones(mu.size());
        case VarianceKind::tweedie_power:
        case VarianceKind::poisson_tweedie:
            return mu.array().pow(p).matrix();
        case VarianceKind::binomial:
            return (mu.array() * (1.0 - mu.array())).matrix();
    }
    return VectorXd::Ones(mu.size());
}

VectorXd variance_deriv_p(const VarianceSpec& var, const VectorXd& mu, double p) {
    if (!var.has_power()) throw InvalidInput("variance_deriv_p: variance kind has no power parameter");
    check_domain(var, mu);
    return (mu.array().pow(p) * mu.array().log()).matrix();
}

VectorXd variance_deriv_mu(const VarianceSpec& var, const VectorXd& mu, double p) {
    check_domain(var, mu);
    switch (var.kind) {
        case VarianceKind::constant:
            return VectorXd::Zero(mu.size());
        case VarianceKind::tweedie_power:
            return (p * mu.array().pow(p - 1.0)).matrix();
        case VarianceKind::poisson_tweedie:
            return (1.0 + p * mu.array().pow(p - 1.0)).matrix();
        case VarianceKind::binomial:
            return (1.0 - 2.0 * mu.array()).matrix();
    }
    return VectorXd::Zero(mu.size());
}

MatrixXd covlink_apply_inverse(const CovLinkSpec& cl, const MatrixXd& u) {
    if (u.rows() != u.cols()) throw InvalidInput("covlink: matrix linear predictor is not square");
    switch (cl.kind) {
        case CovLinkKind::identity:
            return u;
        case CovLinkKind::inverse:
            return spd_inverse(u, "matrix linear predictor U");
    }
    return u;
}

MatrixXd covlink_deriv(const CovLinkSpec& cl, const MatrixXd& u, const MatrixXd& z) {
    return covlink_deriv_at(cl, covlink_apply_inverse(cl, u), z);
}

MatrixXd covlink_deriv_at(const CovLinkSpec& cl, const MatrixXd& omega, const MatrixXd& z) {
    switch (cl.kind) {
        case CovLinkKind::identity:
            return z;
        case CovLinkKind::inverse:
            return symmetrize(-(omega * z * omega));
    }
    return z;
}

LinkKind parse_link(std::string_view name) {
    if (name == "identity") return LinkKind::identity;
    if (name == "log") return LinkKind::log;
    if (name == "logit") return LinkKind::logit;
    throw InvalidInput("unknown link '" + std::string(name) + "' (expected identity, log or logit)");
}

VarianceKind parse_variance(std::string_view name) {
    if (name == "constant") return VarianceKind::constant;
    if (name == "tweedie" || name == "tweedie_power") return VarianceKind::tweedie_power;
    if (name == "poisson_tweedie") return VarianceKind::poisson_tweedie;
    if (name == "binomial") return VarianceKind::binomial;
    throw InvalidInput("unknown variance '" + std::string(name) +
                       "' (expected constant, tweedie, poisson_tweedie or binomial)");
}

CovLinkKind parse_covlink(std::string_view name) {
    if (name == "identity") return CovLinkKind::identity;
    if (name == "inverse") return CovLinkKind::inverse;
    throw InvalidInput("unknown covariance link '" + std::string(name) + "' (expected identity or inverse)");
}

std::string_view to_string(LinkKind kind) {
    switch (kind) {
        case LinkKind::identity: return "identity";
        case LinkKind::log: return "log";
        case LinkKind::logit: return "logit";
    }
    return "?";
}

std::string_view to_string(VarianceKind kind) {
    switch (kind) {
        case VarianceKind::constant: return "constant";
        case VarianceKind::tweedie_power: return "tweedie";
        case VarianceKind::poisson_tweedie: return "poisson_tweedie";
        case VarianceKind::binomial: return "binomial";
    }
    return "?";
}

std::string_view to_string(CovLinkKind kind) {
    switch (kind) {
        case CovLinkKind::identity: return "identity";
        case CovLinkKind::inverse: return "inverse";
    }
    return "?";
}

}  // namespace mcglm
