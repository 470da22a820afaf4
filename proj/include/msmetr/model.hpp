#pragma once

#include <Eigen/Core>

#include <memory>
#include <vector>

#include "msmetr/prior.hpp"
#include "msmetr/rng.hpp"
#include "msmetr/tensor.hpp"

namespace msmetr {

/// Responses plus per-equation covariate tensor sequences. Equations that
/// share covariates alias one stored sequence.
class Dataset {
public:
    Dataset() = default;

    /// All equations observe the same covariate sequence.
    static Dataset shared(Eigen::MatrixXd responses, std::vector<Tensor> covariates);

    /// Equation-specific covariate sequences (one per response column).
    static Dataset per_equation(Eigen::MatrixXd responses,
                                std::vector<std::vector<Tensor>> covariates);

    Eigen::Index num_obs() const { return responses_.rows(); }
    Eigen::Index num_equations() const { return responses_.cols(); }
    const std::vector<Eigen::Index>& covariate_shape(Eigen::Index equation) const {
        return sequences_[static_cast<std::size_t>(equation)]->front().shape();
    }

    double response(Eigen::Index equation, Eigen::Index t) const { return responses_(t, equation); }
    const Eigen::MatrixXd& responses() const { return responses_; }

    const Tensor& covariate(Eigen::Index equation, Eigen::Index t) const {
        return (*sequences_[static_cast<std::size_t>(equation)])[static_cast<std::size_t>(t)];
    }

    /// Restrict to observations [0, t_end), keeping covariate aliasing.
    Dataset head(Eigen::Index t_end) const;

private:
    void attach(Eigen::MatrixXd responses,
                std::vector<std::shared_ptr<const std::vector<Tensor>>> sequences);

    Eigen::MatrixXd responses_;  // T x N
    std::vector<std::shared_ptr<const std::vector<Tensor>>> sequences_;  // one per equation
};

/// Every regime- and equation-specific parameter of one (equation, regime)
/// cell of the model.
struct StateParams {
    FactorSet factors;                   ///< D x M full-shape factor tensors
    Marginals marginals;                 ///< gamma(d, m), length p_m each
    Eigen::VectorXd zeta;                ///< D, positive, sums to 1
    double tau = 1.0;
    Eigen::VectorXd sigma_mode_sq;       ///< M
    std::vector<Eigen::VectorXd> w;      ///< indexed d*M+m, length p_m
    Eigen::MatrixXd lambda;              ///< D x M
    double mu = 0.0;
    double noise_var = 1.0;

    Eigen::VectorXd& w_vec(Eigen::Index d, Eigen::Index m) {
        return w[static_cast<std::size_t>(d * lambda.cols() + m)];
    }
    const Eigen::VectorXd& w_vec(Eigen::Index d, Eigen::Index m) const {
        return w[static_cast<std::size_t>(d * lambda.cols() + m)];
    }
};

struct MarkovChain {
    Eigen::MatrixXd trans;     ///< K x K, row stochastic
    Eigen::VectorXi path;      ///< length T, values in [0, K)
    Eigen::MatrixXd smoothed;  ///< T x K, rows sum to 1
};

/// Full model state for one MCMC chain: data, per-(equation, regime)
/// parameters, and the hidden Markov chain.
class Model {
public:
    Model(Dataset data, Hyperparameters hyper);

    /// Diffuse-but-small random start; scales start at their prior means.
    void initialize(Rng& rng);

    Eigen::Index num_obs() const { return data.num_obs(); }
    Eigen::Index num_equations() const { return data.num_equations(); }
    Eigen::Index num_regimes() const { return hyper.regimes; }

    StateParams& state(Eigen::Index equation, Eigen::Index regime) {
        return params[static_cast<std::size_t>(equation)][static_cast<std::size_t>(regime)];
    }
    const StateParams& state(Eigen::Index equation, Eigen::Index regime) const {
        return params[static_cast<std::size_t>(equation)][static_cast<std::size_t>(regime)];
    }

    Tensor composed_coeff(Eigen::Index equation, Eigen::Index regime) const {
        return hadamard_compose(state(equation, regime).factors);
    }

    /// Gaussian log density of y_{lt} under regime k's parameters.
    double loglik_point(Eigen::Index equation, Eigen::Index regime, Eigen::Index t) const;

    /// Joint log density of the data and a given state path: emissions plus
    /// initial-distribution and transition terms.
    double loglik_path(const Eigen::VectorXi& path) const;

    /// Stationary distribution of the current transition matrix; uniform
    /// fallback when the linear solve is unreliable.
    Eigen::VectorXd initial_distribution() const;

    Dataset data;
    Hyperparameters hyper;
    std::vector<std::vector<StateParams>> params;  // [equation][regime]
    MarkovChain chain;

    /// Emission means mu + <B, X> cached by the last filtering pass,
    /// laid out (equation * K + regime, t).
    Eigen::MatrixXd emission_mean_cache;

    /// Mean squared residual of the fitted outcomes at the current state,
    /// refreshed once per sweep.
    double last_outcome_mse = 0.0;
};

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& trans);

}  // namespace msmetr
