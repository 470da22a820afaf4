#include "msmetr/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "msmetr/distributions.hpp"

namespace msmetr {

namespace {

double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

// Duality gap of 0.5||y - Xb||^2 + lambda ||b||_1 at b, using the scaled
// residual as the dual feasible point.
double lasso_duality_gap(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& beta, double lambda) {
    const Eigen::VectorXd resid = y - x * beta;
    const double primal = 0.5 * resid.squaredNorm() + lambda * beta.lpNorm<1>();
    const double corr_inf = (x.transpose() * resid).lpNorm<Eigen::Infinity>();
    const double scale = (lambda > 0.0 && corr_inf > lambda) ? lambda / corr_inf : 1.0;
    const Eigen::VectorXd theta = scale * resid;
    const double dual = 0.5 * y.squaredNorm() - 0.5 * (y - theta).squaredNorm();
    return primal - dual;
}

void eval_window(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted, double& mse,
                 double& mae) {
    const Eigen::VectorXd err = actual - predicted;
    mse = err.squaredNorm() / static_cast<double>(err.size());
    mae = err.cwiseAbs().sum() / static_cast<double>(err.size());
}

}  // namespace

Eigen::VectorXd fit_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& design) {
    if (design.rows() != y.size()) throw std::invalid_argument("fit_ols: dimension mismatch");
    Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd xty = design.transpose() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    Eigen::VectorXd beta = ldlt.solve(xty);
    if (ldlt.info() != Eigen::Success || !beta.allFinite() ||
        (gram.selfadjointView<Eigen::Lower>() * beta - xty).norm() >
            1e-6 * std::max(1.0, xty.norm())) {
        gram.diagonal().array() += 1e-10 * gram.trace() / static_cast<double>(gram.rows());
        beta = gram.ldlt().solve(xty);
    }
    return beta;
}

LassoFit fit_lasso(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, double lambda) {
    if (design.rows() != y.size()) throw std::invalid_argument("fit_lasso: dimension mismatch");
    if (lambda < 0.0) throw std::invalid_argument("fit_lasso: lambda must be nonnegative");
    const Eigen::Index p = design.cols();
    Eigen::VectorXd col_sq(p);
    for (Eigen::Index j = 0; j < p; ++j) col_sq[j] = design.col(j).squaredNorm();

    LassoFit fit;
    fit.lambda = lambda;
    fit.beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd resid = y;

    const int max_iters = 100000;
    for (fit.iterations = 0; fit.iterations < max_iters; ++fit.iterations) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (col_sq[j] <= 0.0) continue;
            const double old = fit.beta[j];
            const double z = design.col(j).dot(resid) + col_sq[j] * old;
            const double updated = soft_threshold(z, lambda) / col_sq[j];
            if (updated != old) {
                resid -= (updated - old) * design.col(j);
                fit.beta[j] = updated;
                max_change = std::max(max_change, std::fabs(updated - old));
            }
        }
        if (max_change < 1e-12) {
            fit.duality_gap = lasso_duality_gap(y, design, fit.beta, lambda);
            if (fit.duality_gap <= 1e-8 * std::max(1.0, 0.5 * y.squaredNorm())) break;
        }
    }
    fit.duality_gap = lasso_duality_gap(y, design, fit.beta, lambda);
    return fit;
}

double lasso_kkt_violation(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& beta, double lambda) {
    const Eigen::VectorXd corr = design.transpose() * (y - design * beta);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (beta[j] == 0.0)
            worst = std::max(worst, std::fabs(corr[j]) - lambda);
        else
            worst = std::max(worst, std::fabs(std::fabs(corr[j]) - lambda));
    }
    return worst;
}

double lasso_cv_lambda(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, int folds,
                       int grid_size, Rng& rng) {
    const Eigen::Index n = y.size();
    if (folds < 2 || n < folds) throw std::invalid_argument("lasso_cv_lambda: bad fold count");
    const double lambda_max = (design.transpose() * y).lpNorm<Eigen::Infinity>();
    if (!(lambda_max > 0.0)) return 0.0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    for (Eigen::Index i = n - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);

    double best_lambda = lambda_max;
    double best_score = std::numeric_limits<double>::infinity();
    for (int g = 0; g < grid_size; ++g) {
        const double frac = static_cast<double>(g) / static_cast<double>(grid_size - 1);
        const double lambda = lambda_max * std::pow(1e-4, frac);
        double score = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<Eigen::Index> train, test;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (static_cast<int>(i % folds) == f)
                    test.push_back(order[static_cast<std::size_t>(i)]);
                else
                    train.push_back(order[static_cast<std::size_t>(i)]);
            }
            Eigen::MatrixXd x_train(static_cast<Eigen::Index>(train.size()), design.cols());
            Eigen::VectorXd y_train(static_cast<Eigen::Index>(train.size()));
            for (std::size_t i = 0; i < train.size(); ++i) {
                x_train.row(static_cast<Eigen::Index>(i)) = design.row(train[i]);
                y_train[static_cast<Eigen::Index>(i)] = y[train[i]];
            }
            const LassoFit fit = fit_lasso(y_train, x_train, lambda);
            for (Eigen::Index i : test) {
                const double e = y[i] - design.row(i).dot(fit.beta);
                score += e * e;
            }
        }
        if (score < best_score) {
            best_score = score;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

Eigen::MatrixXd vectorized_design(const Dataset& data, Eigen::Index equation) {
    const Eigen::Index t_n = data.num_obs();
    const Eigen::Index p = data.covariate(equation, 0).size();
    Eigen::MatrixXd design(t_n, p + 1);
    design.col(0).setOnes();
    for (Eigen::Index t = 0; t < t_n; ++t)
        design.row(t).tail(p) = data.covariate(equation, t).data().transpose();
    return design;
}

PosteriorMeanParams PosteriorMeanParams::from_draws(const PosteriorDraws& draws) {
    PosteriorMeanParams pm;
    const Eigen::Index n_eq = draws.num_equations();
    const Eigen::Index k_n = draws.num_regimes();
    pm.mu.resize(n_eq, k_n);
    pm.noise_var.resize(n_eq, k_n);
    for (Eigen::Index l = 0; l < n_eq; ++l) {
        for (Eigen::Index k = 0; k < k_n; ++k) {
            pm.coeff.push_back(draws.coeff_mean(l, k));
            pm.mu(l, k) = draws.mu_mean(l, k);
            pm.noise_var(l, k) = draws.noise_var_mean(l, k);
        }
    }
    pm.trans = draws.trans_mean();
    pm.smoothed = draws.smoothed_mean();
    return pm;
}

FitReport forecast_msmetr(const PosteriorMeanParams& params, const Dataset& data,
                          Eigen::Index equation, Eigen::Index train_obs,
                          const std::vector<int>& horizons) {
    const Eigen::Index t_n = data.num_obs();
    const Eigen::Index k_n = params.trans.rows();
    if (train_obs < 1 || train_obs > t_n)
        throw std::invalid_argument("forecast_msmetr: bad training length");

    // Regime-conditional means for every t, then filter over all equations'
    // responses to track the regime distribution through the holdout.
    const Eigen::Index n_eq = params.mu.rows();
    Eigen::MatrixXd cond_mean(t_n, k_n);
    Eigen::MatrixXd loge = Eigen::MatrixXd::Zero(t_n, k_n);
    for (Eigen::Index l = 0; l < n_eq; ++l) {
        for (Eigen::Index k = 0; k < k_n; ++k) {
            const Tensor& coeff = params.coeff[static_cast<std::size_t>(l * k_n + k)];
            for (Eigen::Index t = 0; t < t_n; ++t) {
                const double mean = params.mu(l, k) + coeff.data().dot(data.covariate(l, t).data());
                if (l == equation) cond_mean(t, k) = mean;
                loge(t, k) += normal_logpdf(data.response(l, t), mean, params.noise_var(l, k));
            }
        }
    }
    const FilterResult fr = hamilton_filter(loge, params.trans, stationary_distribution(params.trans));

    FitReport report;
    report.method = "msmetr";
    report.horizons = horizons;

    // In-sample: posterior smoothed regime mix over the training window.
    Eigen::VectorXd fitted(train_obs), actual_in(train_obs);
    for (Eigen::Index t = 0; t < train_obs; ++t) {
        double yhat = 0.0;
        for (Eigen::Index k = 0; k < k_n; ++k) yhat += params.smoothed(t, k) * cond_mean(t, k);
        fitted[t] = yhat;
        actual_in[t] = data.response(equation, t);
    }
    eval_window(actual_in, fitted, report.in_mse, report.in_mae);

    for (int h : horizons) {
        if (train_obs >= t_n) {
            report.out_mse.push_back(std::numeric_limits<double>::quiet_NaN());
            report.out_mae.push_back(report.out_mse.back());
            continue;
        }
        Eigen::VectorXd pred(t_n - train_obs), actual(t_n - train_obs);
        for (Eigen::Index target = train_obs; target < t_n; ++target) {
            const Eigen::Index origin = std::max<Eigen::Index>(target - h, 0);
            Eigen::VectorXd probs = origin > 0
                                        ? Eigen::VectorXd(fr.filtered.row(origin - 1).transpose())
                                        : stationary_distribution(params.trans);
            for (int step = 0; step < h; ++step) probs = params.trans.transpose() * probs;
            double yhat = 0.0;
            for (Eigen::Index k = 0; k < k_n; ++k) yhat += probs[k] * cond_mean(target, k);
            pred[target - train_obs] = yhat;
            actual[target - train_obs] = data.response(equation, target);
        }
        double mse = 0.0, mae = 0.0;
        eval_window(actual, pred, mse, mae);
        report.out_mse.push_back(mse);
        report.out_mae.push_back(mae);
    }
    return report;
}

FitReport forecast_linear(const std::string& method, const Eigen::VectorXd& beta,
                          const Dataset& data, Eigen::Index equation, Eigen::Index train_obs,
                          const std::vector<int>& horizons) {
    const Eigen::MatrixXd design = vectorized_design(data, equation);
    const Eigen::VectorXd predicted = design * beta;
    const Eigen::VectorXd actual = data.responses().col(equation);

    FitReport report;
    report.method = method;
    report.horizons = horizons;
    eval_window(actual.head(train_obs), predicted.head(train_obs), report.in_mse, report.in_mae);
    for (int h : horizons) {
        (void)h;  // plug-in predictions do not depend on the horizon
        if (train_obs >= data.num_obs()) {
            report.out_mse.push_back(std::numeric_limits<double>::quiet_NaN());
            report.out_mae.push_back(report.out_mse.back());
            continue;
        }
        double mse = 0.0, mae = 0.0;
        eval_window(actual.tail(actual.size() - train_obs),
                    predicted.tail(predicted.size() - train_obs), mse, mae);
        report.out_mse.push_back(mse);
        report.out_mae.push_back(mae);
    }
    return report;
}

}  // namespace msmetr
