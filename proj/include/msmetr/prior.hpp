#pragma once

#include <Eigen/Core>

namespace msmetr {

/// Hyperparameters of the three-stage shrinkage prior plus the Markov-chain,
/// intercept and observation-noise priors.
struct Hyperparameters {
    double alpha = 1.0;
    double a_tau = 3.0;
    double b_tau = 1.0;
    double a_sigma = 0.5;
    double b_sigma = 1.0;
    double a_lambda = 3.0;
    double b_lambda = 1.0;
    Eigen::Index rank = 3;     ///< D, number of PARAFAC components
    Eigen::Index modes = 2;    ///< M
    Eigen::Index regimes = 1;  ///< K
    Eigen::VectorXd nu;        ///< Dirichlet prior on each transition row (default: all ones)
    double sigma_mu_sq = 100.0;
    double a_noise = 0.01;
    double b_noise = 0.01;

    /// Default configuration: alpha=1, a_tau=3, a_sigma=0.5, a_lambda=3,
    /// b_lambda=a_lambda^{1/(2M)}, with (b_tau, b_sigma) elicited for unit
    /// entry variance and 10% relative additional variance.
    static Hyperparameters standard(Eigen::Index rank, Eigen::Index modes, Eigen::Index regimes);

    void validate() const;
};

/// D * prod_{r=0}^{M-1} (alpha/D + r) / (alpha + r): the Dirichlet moment
/// term of the induced prior entry variance. Equals (alpha/D + 1)/(alpha + 1)
/// when M = 2.
double component_moment_term(double alpha, Eigen::Index rank, Eigen::Index modes);

/// Marginal prior variance of one entry of the composed coefficient tensor
/// under the full hierarchy.
double prior_entry_variance(const Hyperparameters& h);

/// Same variance with the factor-level softening removed (the rigid
/// rank-D limit).
double prior_entry_variance_hard(const Hyperparameters& h);

/// AV = (V - V_hard) / V, in [0, 1).
double relative_additional_variance(const Hyperparameters& h);

struct ElicitationTargets {
    double entry_variance;        ///< V* > 0
    double additional_variance;   ///< AV* in [0, 1)
};

struct ElicitedScales {
    double b_tau;
    double b_sigma;  ///< +inf when AV* = 0 (softening exactly switched off)
};

/// Solve (b_tau, b_sigma) so the induced prior hits the targets exactly,
/// holding (alpha, a_tau, a_sigma, a_lambda, b_lambda, D) fixed. Matrix
/// coefficients only (modes must be 2).
ElicitedScales elicit(const ElicitationTargets& targets, const Hyperparameters& fixed);

}  // namespace msmetr
