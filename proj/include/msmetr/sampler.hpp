#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "msmetr/model.hpp"
#include "msmetr/rng.hpp"

namespace msmetr {

/// One sweep's randomly chosen (component, mode) blocks, in update order.
/// Every size-k subset is equiprobable and every ordering of the chosen
/// subset is equiprobable.
struct ScanPlan {
    Eigen::Index subset_size = 0;
    std::vector<Eigen::Index> order;  ///< selected block ids in update order

    static ScanPlan draw(Eigen::Index total_blocks, Eigen::Index subset_size, Rng& rng);
};

enum class IdentRule { None, TraceOrder, FrobeniusOrder };

IdentRule ident_rule_from_string(const std::string& name);
std::string to_string(IdentRule rule);

struct ChainConfig {
    long iterations = 3000;
    long burn_in = 1500;
    long thin = 5;
    std::uint64_t seed = 1;
    /// Fraction of the D*M factor blocks refreshed per sweep; the subset size
    /// is ceil(scan_fraction * D * M). Values <= 0 select one block per sweep.
    double scan_fraction = 0.0;
    IdentRule ident_rule = IdentRule::None;
    Eigen::Index ident_equation = 0;
    bool track_outcome_mse = true;

    void validate() const;
    Eigen::Index blocks_per_sweep(Eigen::Index total_blocks) const;
};

/// Thinned post-burn-in draws of every reported quantity, plus the running
/// smoothed-probability mean and the per-iteration outcome MSE trajectory.
class PosteriorDraws {
public:
    PosteriorDraws() = default;
    PosteriorDraws(Eigen::Index n_eq, Eigen::Index n_regimes, Eigen::Index rank,
                   Eigen::Index n_obs, std::vector<Eigen::Index> coeff_shape,
                   const ChainConfig& cfg);

    void append(const Model& model);
    void add_smoothed(const Eigen::MatrixXd& smoothed);

    long count() const { return count_; }
    Eigen::Index num_equations() const { return n_eq_; }
    Eigen::Index num_regimes() const { return n_regimes_; }
    Eigen::Index rank() const { return rank_; }
    Eigen::Index num_obs() const { return n_obs_; }
    const std::vector<Eigen::Index>& coeff_shape() const { return coeff_shape_; }
    const ChainConfig& config() const { return config_; }

    /// Posterior-mean composed coefficient tensor of one (equation, regime).
    Tensor coeff_mean(Eigen::Index equation, Eigen::Index regime) const;
    /// All stored draws of one coefficient entry (flat index).
    Eigen::VectorXd coeff_entry_draws(Eigen::Index equation, Eigen::Index regime,
                                      Eigen::Index flat) const;
    double mu_mean(Eigen::Index equation, Eigen::Index regime) const;
    double noise_var_mean(Eigen::Index equation, Eigen::Index regime) const;
    Eigen::MatrixXd trans_mean() const;
    Eigen::MatrixXd smoothed_mean() const;
    Eigen::VectorXi map_path() const;

    Eigen::VectorXd mu_draws(Eigen::Index equation, Eigen::Index regime) const;
    Eigen::VectorXd noise_var_draws(Eigen::Index equation, Eigen::Index regime) const;
    Eigen::VectorXd tau_draws(Eigen::Index equation, Eigen::Index regime) const;
    Eigen::VectorXd trans_entry_draws(Eigen::Index from, Eigen::Index to) const;
    Eigen::VectorXd zeta_draws(Eigen::Index equation, Eigen::Index regime, Eigen::Index d) const;

    const std::vector<double>& outcome_mse() const { return outcome_mse_; }
    void push_outcome_mse(double v) { outcome_mse_.push_back(v); }

    // Raw record access for serialization (one row per stored draw).
    const Eigen::MatrixXd& records() const { return records_; }
    Eigen::MatrixXd& records() { return records_; }
    Eigen::Index record_length() const;
    // Field offsets inside a record, in order: coeff, mu, noise_var, trans,
    // zeta, tau, path.
    Eigen::Index coeff_offset(Eigen::Index equation, Eigen::Index regime) const;
    Eigen::Index mu_offset() const;
    Eigen::Index noise_offset() const;
    Eigen::Index trans_offset() const;
    Eigen::Index zeta_offset() const;
    Eigen::Index tau_offset() const;
    Eigen::Index path_offset() const;

    void set_count(long c) { count_ = c; }
    Eigen::MatrixXd& smoothed_sum() { return smoothed_sum_; }
    const Eigen::MatrixXd& smoothed_sum() const { return smoothed_sum_; }
    long smoothed_count() const { return smoothed_count_; }
    void set_smoothed_count(long c) { smoothed_count_ = c; }
    std::vector<double>& outcome_mse_mutable() { return outcome_mse_; }

private:
    Eigen::Index n_eq_ = 0;
    Eigen::Index n_regimes_ = 0;
    Eigen::Index rank_ = 0;
    Eigen::Index n_obs_ = 0;
    Eigen::Index coeff_size_ = 0;
    std::vector<Eigen::Index> coeff_shape_;
    ChainConfig config_;
    long count_ = 0;
    Eigen::MatrixXd records_;        // capacity x record_length
    Eigen::MatrixXd smoothed_sum_;   // T x K
    long smoothed_count_ = 0;
    std::vector<double> outcome_mse_;
};

// --- Gibbs blocks -----------------------------------------------------------

/// Collapsed draw of one factor slice beta^{(d)}_{m,j} with its marginal
/// integrated out; writes the draw back into the factor tensor.
void step_beta(Model& model, Eigen::Index equation, Eigen::Index regime, Eigen::Index d,
               Eigen::Index m, Eigen::Index j, Rng& rng);

/// Conjugate refresh of the marginal gamma^{(d)}_{m,j} given its slice.
void step_gamma(Model& model, Eigen::Index equation, Eigen::Index regime, Eigen::Index d,
                Eigen::Index m, Eigen::Index j, Rng& rng);

/// Joint refresh of (zeta, tau) through independent GiG draws of the
/// products phi^{(d)} = tau * zeta^{(d)}.
void step_zeta_tau(Model& model, Eigen::Index equation, Eigen::Index regime, Rng& rng);

void step_lambda_w(Model& model, Eigen::Index equation, Eigen::Index regime, Rng& rng);

void step_sigma_mode(Model& model, Eigen::Index equation, Eigen::Index regime, Eigen::Index m,
                     Rng& rng);

void step_noise_and_mu(Model& model, Eigen::Index equation, Eigen::Index regime, Rng& rng);

/// Dirichlet refresh of every transition row from the path's counts.
void step_transition(Model& model, Rng& rng);

/// Equation-parallel block update of all slices (and marginals) of factor
/// block (d, m); numerically equivalent to calling step_beta then step_gamma
/// slice by slice, with the shared per-t quantities computed once.
void update_beta_gamma_block(Model& model, Eigen::Index equation, Eigen::Index regime,
                             Eigen::Index d, Eigen::Index m, Rng& rng);

// --- Hidden states ----------------------------------------------------------

struct FilterResult {
    Eigen::MatrixXd filtered;   ///< T x K, rows normalised
    Eigen::MatrixXd predicted;  ///< T x K, one-step-ahead state probabilities
    double loglik = 0.0;
};

/// Hamilton filter over precomputed per-time log emission densities.
FilterResult hamilton_filter(const Eigen::MatrixXd& log_emission, const Eigen::MatrixXd& trans,
                             const Eigen::VectorXd& init);

/// Forward-filter backward-sample draw of the full state path; also updates
/// the smoothed probabilities and the emission-mean cache on the model.
Eigen::VectorXi ffbs(Model& model, Rng& rng);

// --- Scheduling and identification ------------------------------------------

/// One random-partial-scan sweep: a random subset of (d, m) blocks in random
/// order, then the scale/noise/transition blocks, FFBS, and relabeling.
void rpsg_sweep(Model& model, const ChainConfig& cfg, Rng& rng);

/// Permute regime labels so the identification rule holds; returns the
/// permutation applied (new label of each old regime).
std::vector<Eigen::Index> relabel(Model& model, IdentRule rule, Eigen::Index ident_equation = 0);

/// Run a full chain; deterministic given cfg.seed.
PosteriorDraws run_chain(const Dataset& data, const Hyperparameters& hyper, const ChainConfig& cfg);

/// Independent chains with independently seeded streams, run in parallel.
std::vector<PosteriorDraws> run_chains(const Dataset& data, const Hyperparameters& hyper,
                                       const ChainConfig& cfg, int n_chains);

}  // namespace msmetr
