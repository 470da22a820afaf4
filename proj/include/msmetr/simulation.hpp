#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msmetr/model.hpp"
#include "msmetr/rng.hpp"
#include "msmetr/tensor.hpp"

namespace msmetr {

enum class Pattern { Diagonal, AntiDiagonal, Cross, Circle, CorePeriphery };

Pattern pattern_from_string(const std::string& name);
std::string to_string(Pattern pattern);

enum class CovariateKind { Iid, Ar1 };

/// Regime block of a Markov-switching DGP: one pattern, intercept and noise
/// variance per regime, plus the transition matrix driving the hidden chain.
struct RegimeSpec {
    std::vector<Pattern> patterns;
    Eigen::MatrixXd trans;
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma_sq;

    /// Two persistent regimes (0.95 stay probability), zero intercepts,
    /// variances (2, 0.1).
    static RegimeSpec two_state(Pattern first, Pattern second);
};

struct SimSetting {
    Pattern pattern = Pattern::Diagonal;
    Eigen::Index rows = 20;
    Eigen::Index cols = 20;
    bool noisy = false;                       ///< add N(0, 0.1^2) to every coefficient entry
    CovariateKind covariate_kind = CovariateKind::Iid;
    double rho = 0.5;                         ///< AR(1) coefficient when covariate_kind == Ar1
    Eigen::Index num_obs = 400;
    double noise_sd = 1.0;                    ///< observation noise of the single-regime DGP
    std::optional<RegimeSpec> regimes;        ///< present: Markov-switching DGP
};

/// Ground truth attached to a generated dataset, for scoring.
struct SimTruth {
    std::vector<Tensor> coefficients;  ///< one per regime (single entry without regimes)
    Eigen::VectorXi path;              ///< empty without regimes
    Eigen::MatrixXd trans;
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma_sq;
    std::uint64_t seed = 0;
};

/// Binary structured coefficient (optionally noise-contaminated).
Tensor gen_coefficient(Pattern pattern, Eigen::Index rows, Eigen::Index cols, bool noisy, Rng& rng);

/// T covariate tensors of the given shape; iid standard normal entries or
/// entrywise AR(1) with stationary N(0,1) margins.
std::vector<Tensor> gen_covariates(CovariateKind kind, const std::vector<Eigen::Index>& shape,
                                   Eigen::Index num_obs, double rho, Rng& rng);

std::pair<Dataset, SimTruth> gen_dataset(const SimSetting& setting, Rng& rng);

/// Named settings: s1..s4 are the single-regime 20x20 patterns, s1ms/s2ms the
/// two-regime 12x12 switching designs.
SimSetting named_setting(const std::string& name);

}  // namespace msmetr
