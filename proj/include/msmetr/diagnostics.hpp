#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "msmetr/tensor.hpp"

namespace msmetr {

/// Sample autocorrelation at the requested lags (lag-0 autocovariance in the
/// denominator); nullopt for a constant series.
std::optional<std::vector<double>> acf(const Eigen::VectorXd& series, const std::vector<int>& lags);

/// Mean over entries of the squared error.
double mse_coeff(const Tensor& post_mean, const Tensor& truth);

double mae_coeff(const Tensor& post_mean, const Tensor& truth);

struct StateScore {
    double mse = 0.0;       ///< mean squared indicator error after label alignment
    double hit_rate = 0.0;  ///< fraction of time points whose MAP state matches truth
    std::vector<Eigen::Index> permutation;  ///< best label map: truth label -> estimate label
};

/// Score smoothed probabilities against a true path, maximising the hit rate
/// over all label permutations (labels are an in-chain convention only).
StateScore state_accuracy(const Eigen::MatrixXd& smoothed, const Eigen::VectorXi& true_path);

struct HpdEllipse {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    double radius_sq = 0.0;            ///< chi-square(2) quantile at the level
    bool intersects_diagonal = false;  ///< whether the ellipse meets the 45-degree line
};

/// Gaussian-approximation highest-density ellipse over paired draws (n x 2).
HpdEllipse hpd_region(const Eigen::MatrixXd& pairs, double level);

struct ScalarSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double q05 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
    double acf1 = 0.0;
    double acf5 = 0.0;
    double acf10 = 0.0;
    bool acf_defined = false;
};

ScalarSummary summarize_series(const std::string& name, const Eigen::VectorXd& draws);

double quantile(const Eigen::VectorXd& values, double q);

}  // namespace msmetr
