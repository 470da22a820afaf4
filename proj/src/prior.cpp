#include "msmetr/prior.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace msmetr {

namespace {

double softening_ratio(const Hyperparameters& h) {
    // a_sigma / b_sigma; an infinite b_sigma encodes "softening off".
    if (std::isinf(h.b_sigma)) return 0.0;
    return h.a_sigma / h.b_sigma;
}

double hard_scale_term(const Hyperparameters& h) {
    if (!(h.a_lambda > 2.0))
        throw std::domain_error("prior variance requires a_lambda > 2");
    return 2.0 * h.b_lambda * h.b_lambda / ((h.a_lambda - 1.0) * (h.a_lambda - 2.0));
}

double entry_variance_with_ratio(const Hyperparameters& h, double ratio) {
    const Eigen::Index m = h.modes;
    const double tau_moment =
        std::exp(std::lgamma(h.a_tau + static_cast<double>(m)) - std::lgamma(h.a_tau)) /
        std::pow(h.b_tau, static_cast<double>(m));
    const double comp = component_moment_term(h.alpha, h.rank, m);
    const double scale = ratio + hard_scale_term(h);
    return tau_moment * comp * std::pow(scale, static_cast<double>(m));
}

}  // namespace

Hyperparameters Hyperparameters::standard(Eigen::Index rank, Eigen::Index modes, Eigen::Index regimes) {
    Hyperparameters h;
    h.rank = rank;
    h.modes = modes;
    h.regimes = regimes;
    h.b_lambda = std::pow(h.a_lambda, 1.0 / (2.0 * static_cast<double>(modes)));
    h.nu = Eigen::VectorXd::Ones(regimes);
    if (modes == 2) {
        const ElicitedScales scales = elicit({1.0, 0.10}, h);
        h.b_tau = scales.b_tau;
        h.b_sigma = scales.b_sigma;
    }
    h.validate();
    return h;
}

void Hyperparameters::validate() const {
    if (!(alpha > 0.0) || !(a_tau > 0.0) || !(b_tau > 0.0) || !(a_sigma > 0.0) ||
        !(b_sigma > 0.0) || !(a_lambda > 0.0) || !(b_lambda > 0.0))
        throw std::invalid_argument("hyperparameters: shape/scale values must be positive");
    if (!(a_lambda > 2.0)) throw std::invalid_argument("hyperparameters: a_lambda must exceed 2");
    if (rank < 1) throw std::invalid_argument("hyperparameters: rank must be >= 1");
    if (modes < 2) throw std::invalid_argument("hyperparameters: modes must be >= 2");
    if (regimes < 1) throw std::invalid_argument("hyperparameters: regimes must be >= 1");
    if (!(sigma_mu_sq > 0.0) || !(a_noise > 0.0) || !(b_noise > 0.0))
        throw std::invalid_argument("hyperparameters: intercept/noise priors must be positive");
    if (nu.size() != 0 && nu.size() != regimes)
        throw std::invalid_argument("hyperparameters: nu length must equal number of regimes");
    for (Eigen::Index i = 0; i < nu.size(); ++i)
        if (!(nu[i] > 0.0)) throw std::invalid_argument("hyperparameters: nu must be positive");
}

double component_moment_term(double alpha, Eigen::Index rank, Eigen::Index modes) {
    double prod = 1.0;
    const double a_d = alpha / static_cast<double>(rank);
    for (Eigen::Index r = 0; r < modes; ++r) {
        prod *= (a_d + static_cast<double>(r)) / (alpha + static_cast<double>(r));
    }
    return static_cast<double>(rank) * prod;
}

double prior_entry_variance(const Hyperparameters& h) {
    return entry_variance_with_ratio(h, softening_ratio(h));
}

double prior_entry_variance_hard(const Hyperparameters& h) {
    return entry_variance_with_ratio(h, 0.0);
}

double relative_additional_variance(const Hyperparameters& h) {
    const double v = prior_entry_variance(h);
    return (v - prior_entry_variance_hard(h)) / v;
}

ElicitedScales elicit(const ElicitationTargets& targets, const Hyperparameters& fixed) {
    if (fixed.modes != 2)
        throw std::invalid_argument("elicit: derived for matrix coefficients (modes == 2) only");
    if (!(targets.entry_variance > 0.0))
        throw std::invalid_argument("elicit: target variance must be positive");
    if (!(targets.additional_variance >= 0.0) || !(targets.additional_variance < 1.0))
        throw std::invalid_argument("elicit: target additional variance must lie in [0, 1)");

    const double hard = hard_scale_term(fixed);
    const double comp = component_moment_term(fixed.alpha, fixed.rank, 2);
    // Total scale S = a_sigma/b_sigma + hard solves V* given b_tau; the AV*
    // equation fixes the split between its two parts.
    const double root = std::sqrt(1.0 - targets.additional_variance);
    const double total_scale = hard / root;
    const double b_tau = fixed.a_tau * total_scale *
                         std::sqrt((fixed.a_tau + 1.0) * comp /
                                   (fixed.a_tau * targets.entry_variance));
    const double ratio = total_scale * (1.0 - root);
    const double b_sigma =
        ratio > 0.0 ? fixed.a_sigma / ratio : std::numeric_limits<double>::infinity();
    if (!(b_tau > 0.0) || std::isnan(b_sigma))
        throw std::runtime_error("elicit: targets are infeasible");
    return {b_tau, b_sigma};
}

}  // namespace msmetr
