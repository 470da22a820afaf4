#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "msmetr/model.hpp"
#include "msmetr/sampler.hpp"

namespace msmetr {

/// Least squares on a T x P design (normal equations, symmetric solve with a
/// ridge fallback when the Gram matrix is numerically singular).
Eigen::VectorXd fit_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& design);

struct LassoFit {
    Eigen::VectorXd beta;
    double lambda = 0.0;
    double duality_gap = 0.0;
    int iterations = 0;
};

/// Coordinate-descent minimiser of 0.5 ||y - X b||^2 + lambda ||b||_1.
LassoFit fit_lasso(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, double lambda);

/// 5-fold cross-validated penalty over a log-spaced grid below ||X'y||_inf.
double lasso_cv_lambda(const Eigen::VectorXd& y, const Eigen::MatrixXd& design, int folds,
                       int grid_size, Rng& rng);

/// Largest KKT violation of a LASSO solution: max_j of
/// |x_j'(y - X b)| - lambda for active coordinates (absolute excess for
/// inactive ones). Non-positive (up to tolerance) at an exact solution.
double lasso_kkt_violation(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& beta, double lambda);

/// Vectorised covariates of one equation with a leading intercept column.
Eigen::MatrixXd vectorized_design(const Dataset& data, Eigen::Index equation);

struct FitReport {
    std::string method;
    double in_mse = 0.0;
    double in_mae = 0.0;
    std::vector<int> horizons;
    std::vector<double> out_mse;
    std::vector<double> out_mae;
};

/// Posterior-mean parameters pulled out of a chain for plug-in prediction.
struct PosteriorMeanParams {
    std::vector<Tensor> coeff;     ///< indexed equation * K + regime
    Eigen::MatrixXd mu;            ///< N x K
    Eigen::MatrixXd noise_var;     ///< N x K
    Eigen::MatrixXd trans;         ///< K x K
    Eigen::MatrixXd smoothed;      ///< T_train x K (posterior smoothed mean)

    static PosteriorMeanParams from_draws(const PosteriorDraws& draws);
};

/// In-sample fit plus h-step conditional forecasts over [train_T, T): the
/// regime distribution is filtered up to t-h and propagated h steps through
/// the transition matrix; future covariates are taken as observed.
FitReport forecast_msmetr(const PosteriorMeanParams& params, const Dataset& data,
                          Eigen::Index equation, Eigen::Index train_obs,
                          const std::vector<int>& horizons);

/// Plug-in forecasts for a fixed coefficient vector on the vectorised design.
FitReport forecast_linear(const std::string& method, const Eigen::VectorXd& beta,
                          const Dataset& data, Eigen::Index equation, Eigen::Index train_obs,
                          const std::vector<int>& horizons);

}  // namespace msmetr
