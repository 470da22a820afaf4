#pragma once

#include <Eigen/Core>

#include "msmetr/rng.hpp"

namespace msmetr {

/// Parameters of the Generalized Inverse Gaussian with density kernel
/// x^{p-1} exp(-(a x + b / x) / 2) on (0, inf).
///
/// Integrable iff (a>0, b>0) or (a>0, b=0, p>0) or (a=0, b>0, p<0);
/// the two boundary cases are exactly Gamma(p, a/2) and
/// InverseGamma(-p, b/2) and are dispatched to those samplers.
struct GigParams {
    double p;
    double a;
    double b;
};

bool gig_integrable(const GigParams& params);

double sample_gig(const GigParams& params, Rng& rng);

/// Gamma(shape, rate): mean shape/rate.
double sample_gamma(double shape, double rate, Rng& rng);

/// Inverse gamma with shape alpha and scale s: mean s/(alpha-1).
double sample_inverse_gamma(double shape, double scale, Rng& rng);

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& conc, Rng& rng);

/// Categorical draw over weights proportional to probs (renormalized
/// internally); throws if any entry is negative or the total mass is zero.
Eigen::Index sample_categorical(const Eigen::VectorXd& probs, Rng& rng);

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng);

/// Precision-form multivariate normal N(Lambda^{-1} h, Lambda^{-1}); solves
/// Lambda mu = h through one Cholesky factorisation (no explicit inverse).
/// A failed factorisation is retried with a small diagonal jitter.
Eigen::VectorXd sample_mvn_precision(const Eigen::MatrixXd& precision, const Eigen::VectorXd& h,
                                     Rng& rng);

double normal_logpdf(double x, double mean, double var);
double gamma_logpdf(double x, double shape, double rate);
double inverse_gamma_logpdf(double x, double shape, double scale);

/// Normalized GiG log-density (uses log K_p for the normalising constant).
double gig_logpdf(double x, const GigParams& params);

/// log K_nu(z), modified Bessel function of the second kind, real order.
double log_bessel_k(double nu, double z);

}  // namespace msmetr
