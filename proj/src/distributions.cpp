#include "msmetr/distributions.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace msmetr {

namespace {

// Log kernel of the standardized two-parameter GIG(lambda, omega):
// f(x) = x^{lambda-1} exp(-omega (x + 1/x) / 2).
double gig_log_kernel(double x, double lambda, double omega) {
    return (lambda - 1.0) * std::log(x) - 0.5 * omega * (x + 1.0 / x);
}

// Mode of the standardized GIG.
double gig_mode(double lambda, double omega) {
    if (lambda >= 1.0)
        return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
    // Equivalent form that stays accurate for lambda < 1.
    return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// Ratio-of-uniforms without mode shift; valid for 0 <= lambda <= 1 and any
// omega (efficient when omega is not too small).
double gig_rou_noshift(double lambda, double omega, Rng& rng) {
    const double m = gig_mode(lambda, omega);
    const double lfm = gig_log_kernel(m, lambda, omega);
    // Maximizer of x^2 f(x) gives the u-extent of the acceptance region.
    const double xpos =
        ((1.0 + lambda) + std::sqrt((1.0 + lambda) * (1.0 + lambda) + omega * omega)) / omega;
    const double umax = xpos * std::exp(0.5 * (gig_log_kernel(xpos, lambda, omega) - lfm));
    for (;;) {
        const double u = umax * rng.uniform();
        const double v = rng.uniform_pos();
        const double x = u / v;
        if (x <= 0.0) continue;
        if (2.0 * std::log(v) <= gig_log_kernel(x, lambda, omega) - lfm) return x;
    }
}

// Ratio-of-uniforms with mode shift; the u-extents come from the two
// positive roots of a cubic. The cubic is solved on the mode-normalized
// variable y = x / m so its coefficients stay O(1) even when the mode is
// astronomically large (tiny omega with large lambda).
double gig_rou_shift(double lambda, double omega, Rng& rng) {
    const double m = gig_mode(lambda, omega);
    const double lfm = gig_log_kernel(m, lambda, omega);

    const double wm = omega * m;
    const double c2 = -(1.0 + 2.0 * (lambda + 1.0) / wm);
    const double c1 = 2.0 * (lambda - 1.0) / wm - 1.0 / (m * m);
    const double c0 = 1.0 / (m * m);

    // Depressed cubic w^3 + pw + q via y = w - c2/3; three real roots here.
    const double p = c1 - c2 * c2 / 3.0;
    const double q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    const double s = std::sqrt(std::max(-p / 3.0, 0.0));
    double cosarg = 0.0;
    if (s > 0.0) cosarg = std::clamp(3.0 * q / (2.0 * p * s), -1.0, 1.0);
    const double theta = std::acos(cosarg);

    double ylow = std::numeric_limits<double>::quiet_NaN();
    double yhigh = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < 3; ++k) {
        const double y = 2.0 * s * std::cos(theta / 3.0 - 2.0943951023931953 * k) - c2 / 3.0;
        if (y > 0.0 && y < 1.0 && (!(ylow == ylow) || y > ylow)) ylow = y;
        if (y > 1.0 && (!(yhigh == yhigh) || y < yhigh)) yhigh = y;
    }
    if (!(ylow == ylow) || !(yhigh == yhigh))
        throw std::runtime_error("gig sampler: cubic root bracketing failed");

    const double xlow = m * ylow;
    const double xhigh = m * yhigh;
    const double ulow = (xlow - m) * std::exp(0.5 * (gig_log_kernel(xlow, lambda, omega) - lfm));
    const double uhigh = (xhigh - m) * std::exp(0.5 * (gig_log_kernel(xhigh, lambda, omega) - lfm));

    for (;;) {
        const double u = ulow + (uhigh - ulow) * rng.uniform();
        const double v = rng.uniform_pos();
        const double x = u / v + m;
        if (x <= 0.0) continue;
        if (2.0 * std::log(v) <= gig_log_kernel(x, lambda, omega) - lfm) return x;
    }
}

// Small-omega branch for 0 < lambda < 1: the Gamma(lambda, omega/2) kernel
// dominates x^{lambda-1} exp(-omega(x+1/x)/2); acceptance exp(-omega/(2x))
// approaches one as omega -> 0.
double gig_gamma_envelope(double lambda, double omega, Rng& rng) {
    for (;;) {
        const double x = sample_gamma(lambda, 0.5 * omega, rng);
        if (x <= 0.0) continue;
        if (std::log(rng.uniform_pos()) <= -0.5 * omega / x) return x;
    }
}

double gig_standard(double lambda, double omega, Rng& rng) {
    if (lambda < 0.0) return 1.0 / gig_standard(-lambda, omega, rng);
    if (lambda >= 1.0 || omega > 1.0) return gig_rou_shift(lambda, omega, rng);
    if (omega >= std::min(0.5, 2.0 / 3.0 * std::sqrt(1.0 - lambda)))
        return gig_rou_noshift(lambda, omega, rng);
    if (lambda > 0.0) return gig_gamma_envelope(lambda, omega, rng);
    return gig_rou_noshift(lambda, omega, rng);  // lambda == 0, tiny omega: rare, still exact
}

}  // namespace

bool gig_integrable(const GigParams& params) {
    if (!(params.a >= 0.0) || !(params.b >= 0.0)) return false;  // also rejects NaN
    if (!(params.p == params.p)) return false;
    if (params.a > 0.0 && params.b > 0.0) return true;
    if (params.a > 0.0 && params.b == 0.0) return params.p > 0.0;
    if (params.a == 0.0 && params.b > 0.0) return params.p < 0.0;
    return false;
}

double sample_gig(const GigParams& params, Rng& rng) {
    if (!gig_integrable(params))
        throw std::invalid_argument("sample_gig: non-integrable parameter triple");
    if (params.b == 0.0) return sample_gamma(params.p, 0.5 * params.a, rng);
    if (params.a == 0.0) return sample_inverse_gamma(-params.p, 0.5 * params.b, rng);
    const double scale = std::sqrt(params.b / params.a);
    const double omega = std::sqrt(params.a * params.b);
    return scale * gig_standard(params.p, omega, rng);
}

double sample_gamma(double shape, double rate, Rng& rng) {
    if (!(shape > 0.0) || !(rate > 0.0))
        throw std::invalid_argument("sample_gamma: shape and rate must be positive");
    double boost = 1.0;
    if (shape < 1.0) {
        boost = std::pow(rng.uniform_pos(), 1.0 / shape);
        shape += 1.0;
    }
    // Marsaglia-Tsang squeeze.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = rng.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = rng.uniform_pos();
        if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v / rate;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v / rate;
    }
}

double sample_inverse_gamma(double shape, double scale, Rng& rng) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw std::invalid_argument("sample_inverse_gamma: parameters must be positive");
    return scale / sample_gamma(shape, 1.0, rng);
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& conc, Rng& rng) {
    if (conc.size() == 0) throw std::invalid_argument("sample_dirichlet: empty concentration");
    for (Eigen::Index i = 0; i < conc.size(); ++i)
        if (!(conc[i] > 0.0))
            throw std::invalid_argument("sample_dirichlet: concentrations must be positive");
    Eigen::VectorXd out(conc.size());
    for (;;) {
        for (Eigen::Index i = 0; i < conc.size(); ++i) out[i] = sample_gamma(conc[i], 1.0, rng);
        const double total = out.sum();
        if (total > 0.0) return out / total;
    }
}

Eigen::Index sample_categorical(const Eigen::VectorXd& probs, Rng& rng) {
    if (probs.size() == 0) throw std::invalid_argument("sample_categorical: empty vector");
    double total = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (!(probs[i] >= 0.0))
            throw std::invalid_argument("sample_categorical: negative or NaN probability");
        total += probs[i];
    }
    if (!(total > 0.0)) throw std::invalid_argument("sample_categorical: zero total mass");
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng) {
    if (cov.rows() != cov.cols() || cov.rows() != mean.size())
        throw std::invalid_argument("sample_mvn: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("sample_mvn: covariance is not positive definite");
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return mean + llt.matrixL() * z;
}

Eigen::VectorXd sample_mvn_precision(const Eigen::MatrixXd& precision, const Eigen::VectorXd& h,
                                     Rng& rng) {
    const Eigen::Index n = h.size();
    if (precision.rows() != n || precision.cols() != n)
        throw std::invalid_argument("sample_mvn_precision: dimension mismatch");
    Eigen::MatrixXd lam = precision;
    Eigen::LLT<Eigen::MatrixXd> llt(lam);
    if (llt.info() != Eigen::Success) {
        const double jitter = 1e-10 * lam.trace() / static_cast<double>(n);
        for (int attempt = 0; attempt < 3 && llt.info() != Eigen::Success; ++attempt) {
            lam.diagonal().array() += jitter * std::pow(10.0, attempt);
            llt.compute(lam);
        }
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("sample_mvn_precision: precision is not positive definite");
    }
    Eigen::VectorXd mu = llt.solve(h);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    // x = mu + L^{-T} z has covariance (L L')^{-1} = Lambda^{-1}.
    return mu + llt.matrixU().solve(z);
}

double normal_logpdf(double x, double mean, double var) {
    const double d = x - mean;
    return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

double gamma_logpdf(double x, double shape, double rate) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double inverse_gamma_logpdf(double x, double shape, double scale) {
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double gig_logpdf(double x, const GigParams& params) {
    if (!gig_integrable(params)) throw std::invalid_argument("gig_logpdf: non-integrable parameters");
    if (x <= 0.0) return -std::numeric_limits<double>::infinity();
    if (params.b == 0.0) return gamma_logpdf(x, params.p, 0.5 * params.a);
    if (params.a == 0.0) return inverse_gamma_logpdf(x, -params.p, 0.5 * params.b);
    const double omega = std::sqrt(params.a * params.b);
    const double half_log_ratio = 0.5 * (std::log(params.a) - std::log(params.b));
    const double log_norm = params.p * half_log_ratio - std::log(2.0) - log_bessel_k(params.p, omega);
    return log_norm + (params.p - 1.0) * std::log(x) - 0.5 * (params.a * x + params.b / x);
}

double log_bessel_k(double nu, double z) {
    nu = std::fabs(nu);
    if (!(z > 0.0)) throw std::invalid_argument("log_bessel_k: z must be positive");
    // Small-argument asymptote K_nu(z) ~ Gamma(nu) 2^{nu-1} / z^nu.
    if (nu >= 0.5 && z <= 1e-6 * std::sqrt(nu + 1.0))
        return std::lgamma(nu) + (nu - 1.0) * std::log(2.0) - nu * std::log(z);

    // K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt, integrated by
    // composite Simpson in log space with interval doubling.
    const double log_z = std::log(z);
    const double peak = (nu > z) ? std::asinh(nu / z) : 0.0;
    const double tmax = peak + 50.0;
    auto log_integrand = [&](double t) {
        double log_cosh_t = (t > 30.0) ? t - std::log(2.0) : std::log(std::cosh(t));
        double zc = log_z + log_cosh_t;
        double lin = (zc > 700.0) ? std::numeric_limits<double>::infinity() : std::exp(zc);
        double nut = nu * t;
        double log_cosh_nut = (nut > 30.0) ? nut - std::log(2.0)
                                           : (nu == 0.0 ? 0.0 : std::log(std::cosh(nut)));
        return -lin + log_cosh_nut;
    };
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (long n = 1 << 12; n <= (1 << 21); n <<= 1) {
        const double hstep = tmax / static_cast<double>(n);
        double maxlog = -std::numeric_limits<double>::infinity();
        for (long i = 0; i <= n; ++i)
            maxlog = std::max(maxlog, log_integrand(hstep * static_cast<double>(i)));
        double acc = 0.0;
        for (long i = 0; i <= n; ++i) {
            const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            acc += w * std::exp(log_integrand(hstep * static_cast<double>(i)) - maxlog);
        }
        const double value = maxlog + std::log(acc * hstep / 3.0);
        if (prev == prev && std::fabs(value - prev) < 1e-12 * std::max(1.0, std::fabs(value)))
            return value;
        prev = value;
    }
    return prev;
}

}  // namespace msmetr
