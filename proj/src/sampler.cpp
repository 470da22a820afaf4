#include "msmetr/sampler.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "msmetr/distributions.hpp"

namespace msmetr {

namespace {

constexpr double kGigFloor = 1e-300;

std::vector<Eigen::Index> regime_times(const Model& model, Eigen::Index regime) {
    std::vector<Eigen::Index> times;
    for (Eigen::Index t = 0; t < model.num_obs(); ++t)
        if (model.chain.path[t] == regime) times.push_back(t);
    return times;
}

// I0 = sum_m p_m (q_m + 1) = M prod_m p_m + sum_m p_m.
double information_count(const std::vector<Eigen::Index>& shape) {
    double prod = 1.0, sum = 0.0;
    for (Eigen::Index p : shape) {
        prod *= static_cast<double>(p);
        sum += static_cast<double>(p);
    }
    return static_cast<double>(shape.size()) * prod + sum;
}

// C_d = sum_m sum_j [ ||beta - gamma iota||^2 / sigma_m^2 + gamma^2 / w ].
double component_quadratic(const StateParams& sp, Eigen::Index d) {
    const Eigen::Index modes = sp.factors.modes();
    double acc = 0.0;
    for (Eigen::Index m = 0; m < modes; ++m) {
        ModeIndexer indexer(sp.factors.shape(), m);
        const auto& gamma = sp.marginals.gamma(d, m);
        const auto& w = sp.w_vec(d, m);
        const double inv_sig = 1.0 / sp.sigma_mode_sq[m];
        for (Eigen::Index j = 0; j < indexer.num_slices(); ++j) {
            const Eigen::VectorXd beta = indexer.gather(sp.factors.factor(d, m), j);
            acc += inv_sig * (beta.array() - gamma[j]).square().sum();
            acc += gamma[j] * gamma[j] / w[j];
        }
    }
    return acc;
}

double slice_prior_variance(const StateParams& sp, Eigen::Index d, Eigen::Index m, Eigen::Index j) {
    const double xi = sp.tau * sp.zeta[d] * (sp.w_vec(d, m)[j] + sp.sigma_mode_sq[m]);
    return std::max(xi, kGigFloor);
}

void draw_beta_slice(Model& model, Eigen::Index equation, Eigen::Index regime, Eigen::Index d,
                     Eigen::Index m, Eigen::Index j, const Eigen::MatrixXd& psi,
                     const Eigen::VectorXd& resid, Rng& rng) {
    StateParams& sp = model.state(equation, regime);
    const Eigen::Index q = psi.rows();
    const double inv_noise = 1.0 / sp.noise_var;
    Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(q, q);
    for (Eigen::Index c = 0; c < psi.cols(); ++c)
        lam.selfadjointView<Eigen::Lower>().rankUpdate(psi.col(c), inv_noise);
    lam = lam.selfadjointView<Eigen::Lower>();
    lam.diagonal().array() += 1.0 / slice_prior_variance(sp, d, m, j);
    const Eigen::VectorXd h = inv_noise * (psi * resid);
    const Eigen::VectorXd beta = sample_mvn_precision(lam, h, rng);
    set_mode_slice_vec(sp.factors.factor(d, m), m, j, beta);
}

Eigen::MatrixXd log_emissions(Model& model) {
    const Eigen::Index t_n = model.num_obs();
    const Eigen::Index n_eq = model.num_equations();
    const Eigen::Index k_n = model.num_regimes();
    model.emission_mean_cache.resize(n_eq * k_n, t_n);
    Eigen::MatrixXd loge = Eigen::MatrixXd::Zero(t_n, k_n);
    for (Eigen::Index l = 0; l < n_eq; ++l) {
        for (Eigen::Index k = 0; k < k_n; ++k) {
            const StateParams& sp = model.state(l, k);
            const Tensor coeff = hadamard_compose(sp.factors);
            auto cache_row = model.emission_mean_cache.row(l * k_n + k);
            for (Eigen::Index t = 0; t < t_n; ++t) {
                const double mean = sp.mu + coeff.data().dot(model.data.covariate(l, t).data());
                cache_row[t] = mean;
                loge(t, k) += normal_logpdf(model.data.response(l, t), mean, sp.noise_var);
            }
        }
    }
    return loge;
}

double outcome_mse_from_cache(const Model& model) {
    const Eigen::Index k_n = model.num_regimes();
    double acc = 0.0;
    for (Eigen::Index l = 0; l < model.num_equations(); ++l) {
        for (Eigen::Index t = 0; t < model.num_obs(); ++t) {
            const double fitted = model.emission_mean_cache(l * k_n + model.chain.path[t], t);
            const double e = model.data.response(l, t) - fitted;
            acc += e * e;
        }
    }
    return acc / static_cast<double>(model.num_obs() * model.num_equations());
}

}  // namespace

ScanPlan ScanPlan::draw(Eigen::Index total_blocks, Eigen::Index subset_size, Rng& rng) {
    if (subset_size < 1 || subset_size > total_blocks)
        throw std::invalid_argument("scan plan: subset size out of range");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(total_blocks));
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    // Partial Fisher-Yates: the first subset_size entries are a uniform
    // subset in uniform random order.
    for (Eigen::Index i = 0; i < subset_size; ++i) {
        const Eigen::Index pick =
            i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(total_blocks - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick)]);
    }
    ScanPlan plan;
    plan.subset_size = subset_size;
    plan.order.assign(idx.begin(), idx.begin() + subset_size);
    return plan;
}

IdentRule ident_rule_from_string(const std::string& name) {
    if (name == "trace-order") return IdentRule::TraceOrder;
    if (name == "frobenius-order") return IdentRule::FrobeniusOrder;
    if (name == "none") return IdentRule::None;
    throw std::invalid_argument("unknown identification rule: " + name);
}

std::string to_string(IdentRule rule) {
    switch (rule) {
        case IdentRule::TraceOrder: return "trace-order";
        case IdentRule::FrobeniusOrder: return "frobenius-order";
        default: return "none";
    }
}

void ChainConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("chain config: iterations must be >= 1");
    if (burn_in < 0 || burn_in >= iterations)
        throw std::invalid_argument("chain config: burn_in must lie in [0, iterations)");
    if (thin < 1) throw std::invalid_argument("chain config: thin must be >= 1");
    if (scan_fraction > 1.0) throw std::invalid_argument("chain config: scan_fraction must be <= 1");
}

Eigen::Index ChainConfig::blocks_per_sweep(Eigen::Index total_blocks) const {
    if (scan_fraction <= 0.0) return 1;
    const double k = std::ceil(scan_fraction * static_cast<double>(total_blocks) - 1e-12);
    return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(k), 1, total_blocks);
}

// --- Gibbs blocks -----------------------------------------------------------

void step_beta(Model& model, Eigen::Index equation, Eigen::Index regime, Eigen::Index d,
               Eigen::Index m, Eigen::Index j, Rng& rng) {
    StateParams& sp = model.state(equation, regime);
    const std::vector<Eigen::Index> times = regime_times(model, regime);
    ModeIndexer indexer(sp.factors.shape(), m);
    const Eigen::Index q = indexer.slice_len();
    Eigen::MatrixXd psi(q, static_cast<Eigen::Index>(times.size()));
    Eigen::VectorXd resid(static_cast<Eigen::Index>(times.size()));
    Eigen::Index c = 0;
    for (Eigen::Index t : times) {
        const BackfitTerms<double> terms =
            backfit_terms(sp.factors, model.data.covariate(equation, t), d, m, j);
        psi.col(c) = terms.psi;
        resid[c] = model.data.response(equation, t) - sp.mu - terms.r_slice - terms.r_comp;
        ++c;
    }
    draw_beta_slice(model, equation, regime, d, m, j, psi, resid, rng);
}

void step_gamma(Model& model, Eigen::Index equation, Eigen::Index regime, Eigen::Index d,
                Eigen::Index m, Eigen::Index j, Rng& rng) {
    StateParams& sp = model.state(equation, regime);
    ModeIndexer indexer(sp.factors.shape(), m);
    const Eigen::VectorXd beta = indexer.gather(sp.factors.factor(d, m), j);
    const double q = static_cast<double>(indexer.slice_len());
    const double w = sp.w_vec(d, m)[j];
    const double sig = sp.sigma_mode_sq[m];
    const double denom = q * w + sig;
    const double mean = w / denom * beta.sum();
    const double var = sp.tau * sp.zeta[d] * w * sig / denom;
    sp.marginals.gamma(d, m)[j] = mean + std::sqrt(std::max(var, 0.0)) * rng.normal();
}

void step_zeta_tau(Model& model, Eigen::Index equation, Eigen::Index regime, Rng& rng) {
    StateParams& sp = model.state(equation, regime);
    const Eigen::Index rank = sp.factors.rank();
    const double i0 = information_count(sp.factors.shape());
    const Hyperparameters& h = model.hyper;

    Eigen::VectorXd c_d(rank);
    for (Eigen::Index d = 0; d < rank; ++d) c_d[d] = component_quadratic(sp, d);

    Eigen::VectorXd phi(rank);
    const double phi_order = h.alpha / static_cast<double>(rank) - 0.5 * i0;
    for (Eigen::Index d = 0; d < rank; ++d)
        phi[d] = sample_gig({phi_order, 2.0 * h.b_tau, std::max(c_d[d], kGigFloor)}, rng);
    sp.zeta = phi / phi.sum();

    double tau_quadratic = 0.0;
    for (Eigen::Index d = 0; d < rank; ++d)
        tau_quadratic += std::min(c_d[d] / std::max(sp.zeta[d], 1e-290), 1e290);
    const double tau_order = h.a_tau - 0.5 * static_cast<double>(rank) * i0;
    sp.tau = sample_gig({tau_order, 2.0 * h.b_tau, std::max(tau_quadratic, kGigFloor)}, rng);
}

void step_lambda_w(Model& model, Eigen::Index equation, Eigen::Index regime, Rng& rng) {
    StateParams& sp = model.state(equation, regime);
    const Hyperparameters& h = model.hyper;
    for (Eigen::Index d = 0; d < sp.factors.rank(); ++d) {
        const double root_tz = std::sqrt(sp.tau * sp.zeta[d]);
        for (Eigen::Index m = 0; m < sp.factors.modes(); ++m) {
            const auto& gamma = sp.marginals.gamma(d, m);
            const double p_m = static_cast<double>(gamma.size());
            const double rate = gamma.cwiseAbs().sum() / root_tz + h.b_lambda;
            sp.lambda(d, m) = sample_gamma(h.a_lambda + p_m, rate, rng);
            const double lam_sq = sp.lambda(d, m) * sp.lambda(d, m);
            auto& w = sp.w_vec(d, m);
            for (Eigen::Index j = 0; j < gamma.size(); ++j)
                w[j] = sample_gig({0.5, lam_sq, gamma[j] * gamma[j] / (sp.tau * sp.zeta[d])}, rng);
        }
    }
}

void step_sigma_mode(Model& model, Eigen::Index equation, Eigen::Index regime, Eigen::Index m,
                     Rng& rng) {
    StateParams& sp = model.state(equation, regime);
    const Hyperparameters& h = model.hyper;
    ModeIndexer indexer(sp.factors.shape(), m);
    const double p_m = static_cast<double>(indexer.num_slices());
    const double q_m = static_cast<double>(indexer.slice_len());

    double quad = 0.0;
    for (Eigen::Index d = 0; d < sp.factors.rank(); ++d) {
        const auto& gamma = sp.marginals.gamma(d, m);
        double dev = 0.0;
        for (Eigen::Index j = 0; j < indexer.num_slices(); ++j) {
            const Eigen::VectorXd beta = indexer.gather(sp.factors.factor(d, m), j);
            dev += (beta.array() - gamma[j]).square().sum();
        }
        quad += dev / (sp.tau * sp.zeta[d]);
    }
    const double order = h.a_sigma - 0.5 * static_cast<double>(sp.factors.rank()) * p_m * q_m;
    sp.sigma_mode_sq[m] = sample_gig({order, 2.0 * h.b_sigma, std::max(quad, kGigFloor)}, rng);
}

void step_noise_and_mu(Model& model, Eigen::Index equation, Eigen::Index regime, Rng& rng) {
    StateParams& sp = model.state(equation, regime);
    const Hyperparameters& h = model.hyper;
    const std::vector<Eigen::Index> times = regime_times(model, regime);
    const Tensor coeff = hadamard_compose(sp.factors);

    double rss = 0.0, resid_sum = 0.0;
    for (Eigen::Index t : times) {
        const double base =
            model.data.response(equation, t) - coeff.data().dot(model.data.covariate(equation, t).data());
        const double e = base - sp.mu;
        rss += e * e;
        resid_sum += base;
    }
    const double n = static_cast<double>(times.size());
    sp.noise_var = sample_inverse_gamma(h.a_noise + 0.5 * n, h.b_noise + 0.5 * rss, rng);

    const double post_var = 1.0 / (n / sp.noise_var + 1.0 / h.sigma_mu_sq);
    const double post_mean = post_var * resid_sum / sp.noise_var;
    sp.mu = post_mean + std::sqrt(post_var) * rng.normal();
}

void step_transition(Model& model, Rng& rng) {
    const Eigen::Index k_n = model.num_regimes();
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k_n, k_n);
    for (Eigen::Index t = 1; t < model.num_obs(); ++t)
        counts(model.chain.path[t - 1], model.chain.path[t]) += 1.0;
    for (Eigen::Index i = 0; i < k_n; ++i) {
        const Eigen::VectorXd conc = model.hyper.nu + counts.row(i).transpose();
        model.chain.trans.row(i) = sample_dirichlet(conc, rng).transpose();
    }
}

void update_beta_gamma_block(Model& model, Eigen::Index equation, Eigen::Index regime,
                             Eigen::Index d, Eigen::Index m, Rng& rng) {
    StateParams& sp = model.state(equation, regime);
    const std::vector<Eigen::Index> times = regime_times(model, regime);
    const Eigen::Index n_t = static_cast<Eigen::Index>(times.size());
    const Eigen::Index size = sp.factors.factor(0, 0).size();
    ModeIndexer indexer(sp.factors.shape(), m);
    const Eigen::Index q = indexer.slice_len();

    // Shared per-t pieces: the other-mode Hadamard product against X_t, the
    // within-component totals, and the other components' inner products.
    const Tensor partial = hadamard_component(sp.factors, d, m);
    Eigen::MatrixXd others_x(size, n_t);
    Eigen::VectorXd c_other = Eigen::VectorXd::Zero(n_t);
    Eigen::VectorXd c_own(n_t);
    for (Eigen::Index c = 0; c < n_t; ++c)
        others_x.col(c) = partial.data().cwiseProduct(model.data.covariate(equation, times[c]).data());
    for (Eigen::Index dp = 0; dp < sp.factors.rank(); ++dp) {
        if (dp == d) continue;
        const Tensor comp = hadamard_component(sp.factors, dp);
        for (Eigen::Index c = 0; c < n_t; ++c)
            c_other[c] += comp.data().dot(model.data.covariate(equation, times[c]).data());
    }
    for (Eigen::Index c = 0; c < n_t; ++c)
        c_own[c] = sp.factors.factor(d, m).data().dot(others_x.col(c));

    Eigen::MatrixXd psi(q, n_t);
    Eigen::VectorXd resid(n_t);
    for (Eigen::Index j = 0; j < indexer.num_slices(); ++j) {
        Eigen::VectorXd beta_old = indexer.gather(sp.factors.factor(d, m), j);
        for (Eigen::Index c = 0; c < n_t; ++c) {
            for (Eigen::Index r = 0; r < q; ++r) psi(r, c) = others_x(indexer.offset(r, j), c);
            const double own_slice = beta_old.dot(psi.col(c));
            const double r_slice = c_own[c] - own_slice;
            resid[c] = model.data.response(equation, times[c]) - sp.mu - r_slice - c_other[c];
        }
        draw_beta_slice(model, equation, regime, d, m, j, psi, resid, rng);
        const Eigen::VectorXd beta_new = indexer.gather(sp.factors.factor(d, m), j);
        for (Eigen::Index c = 0; c < n_t; ++c)
            c_own[c] += (beta_new - beta_old).dot(psi.col(c));
    }
    for (Eigen::Index j = 0; j < indexer.num_slices(); ++j)
        step_gamma(model, equation, regime, d, m, j, rng);
}

// --- Hidden states ----------------------------------------------------------

FilterResult hamilton_filter(const Eigen::MatrixXd& log_emission, const Eigen::MatrixXd& trans,
                             const Eigen::VectorXd& init) {
    const Eigen::Index t_n = log_emission.rows();
    const Eigen::Index k_n = log_emission.cols();
    FilterResult res;
    res.filtered.resize(t_n, k_n);
    res.predicted.resize(t_n, k_n);
    Eigen::VectorXd pred = init;
    for (Eigen::Index t = 0; t < t_n; ++t) {
        res.predicted.row(t) = pred.transpose();
        const double shift = log_emission.row(t).maxCoeff();
        if (!std::isfinite(shift))
            throw std::runtime_error("hamilton filter: all emission densities underflowed");
        Eigen::VectorXd f =
            pred.array() * (log_emission.row(t).transpose().array() - shift).exp();
        const double total = f.sum();
        if (!(total > 0.0) || !std::isfinite(total))
            throw std::runtime_error("hamilton filter: filtered probabilities vanished");
        f /= total;
        res.filtered.row(t) = f.transpose();
        res.loglik += std::log(total) + shift;
        pred = trans.transpose() * f;
    }
    return res;
}

Eigen::VectorXi ffbs(Model& model, Rng& rng) {
    const Eigen::Index t_n = model.num_obs();
    const Eigen::Index k_n = model.num_regimes();
    const Eigen::MatrixXd loge = log_emissions(model);
    const FilterResult fr = hamilton_filter(loge, model.chain.trans, model.initial_distribution());

    Eigen::VectorXi path(t_n);
    path[t_n - 1] = static_cast<int>(sample_categorical(fr.filtered.row(t_n - 1).transpose(), rng));
    for (Eigen::Index t = t_n - 2; t >= 0; --t) {
        Eigen::VectorXd weights(k_n);
        for (Eigen::Index k = 0; k < k_n; ++k)
            weights[k] = fr.filtered(t, k) * model.chain.trans(k, path[t + 1]);
        path[t] = static_cast<int>(sample_categorical(weights, rng));
    }

    // Smoothed probabilities by the backward recursion on filtered/predicted.
    Eigen::MatrixXd smoothed(t_n, k_n);
    smoothed.row(t_n - 1) = fr.filtered.row(t_n - 1);
    for (Eigen::Index t = t_n - 2; t >= 0; --t) {
        Eigen::VectorXd ratio(k_n);
        for (Eigen::Index k = 0; k < k_n; ++k) {
            const double pred = fr.predicted(t + 1, k);
            ratio[k] = pred > 0.0 ? smoothed(t + 1, k) / pred : 0.0;
        }
        Eigen::VectorXd row = fr.filtered.row(t).transpose().array() *
                              (model.chain.trans * ratio).array();
        const double total = row.sum();
        if (total > 0.0)
            smoothed.row(t) = row.transpose() / total;
        else
            smoothed.row(t) = fr.filtered.row(t);
    }

    model.chain.path = path;
    model.chain.smoothed = std::move(smoothed);
    return model.chain.path;
}

// --- Scheduling and identification ------------------------------------------

void rpsg_sweep(Model& model, const ChainConfig& cfg, Rng& rng) {
    const Eigen::Index total_blocks = model.hyper.rank * model.hyper.modes;
    const ScanPlan plan = ScanPlan::draw(total_blocks, cfg.blocks_per_sweep(total_blocks), rng);

    for (Eigen::Index block : plan.order) {
        const Eigen::Index d = block / model.hyper.modes;
        const Eigen::Index m = block % model.hyper.modes;
        for (Eigen::Index k = 0; k < model.num_regimes(); ++k)
            for (Eigen::Index l = 0; l < model.num_equations(); ++l)
                update_beta_gamma_block(model, l, k, d, m, rng);
    }

    for (Eigen::Index l = 0; l < model.num_equations(); ++l) {
        for (Eigen::Index k = 0; k < model.num_regimes(); ++k) {
            step_zeta_tau(model, l, k, rng);
            step_lambda_w(model, l, k, rng);
            for (Eigen::Index m = 0; m < model.hyper.modes; ++m)
                step_sigma_mode(model, l, k, m, rng);
            step_noise_and_mu(model, l, k, rng);
        }
    }
    step_transition(model, rng);
    ffbs(model, rng);
    model.last_outcome_mse = outcome_mse_from_cache(model);
    if (cfg.ident_rule != IdentRule::None && model.num_regimes() > 1)
        relabel(model, cfg.ident_rule, cfg.ident_equation);
}

std::vector<Eigen::Index> relabel(Model& model, IdentRule rule, Eigen::Index ident_equation) {
    const Eigen::Index k_n = model.num_regimes();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k_n));
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    if (rule == IdentRule::None || k_n == 1) return order;

    Eigen::VectorXd stat(k_n);
    for (Eigen::Index k = 0; k < k_n; ++k) {
        const Tensor coeff = model.composed_coeff(ident_equation, k);
        if (rule == IdentRule::TraceOrder) {
            if (coeff.order() != 2 || coeff.dim(0) != coeff.dim(1))
                throw std::invalid_argument("trace-order relabeling needs square matrix coefficients");
            stat[k] = coeff.to_matrix().trace();
        } else {
            stat[k] = coeff.data().norm();
        }
    }
    // trace: ascending; Frobenius: descending.
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return rule == IdentRule::TraceOrder ? stat[a] < stat[b] : stat[a] > stat[b];
    });

    std::vector<Eigen::Index> to_new(static_cast<std::size_t>(k_n));
    bool identity = true;
    for (Eigen::Index pos = 0; pos < k_n; ++pos) {
        to_new[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos;
        identity = identity && order[static_cast<std::size_t>(pos)] == pos;
    }
    if (identity) return to_new;

    for (Eigen::Index l = 0; l < model.num_equations(); ++l) {
        std::vector<StateParams> reordered(static_cast<std::size_t>(k_n));
        for (Eigen::Index k = 0; k < k_n; ++k)
            reordered[static_cast<std::size_t>(to_new[static_cast<std::size_t>(k)])] =
                std::move(model.params[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)]);
        model.params[static_cast<std::size_t>(l)] = std::move(reordered);
    }
    Eigen::MatrixXd new_trans(k_n, k_n);
    for (Eigen::Index i = 0; i < k_n; ++i)
        for (Eigen::Index j = 0; j < k_n; ++j)
            new_trans(to_new[static_cast<std::size_t>(i)], to_new[static_cast<std::size_t>(j)]) =
                model.chain.trans(i, j);
    model.chain.trans = std::move(new_trans);
    for (Eigen::Index t = 0; t < model.num_obs(); ++t)
        model.chain.path[t] = static_cast<int>(to_new[static_cast<std::size_t>(model.chain.path[t])]);
    Eigen::MatrixXd new_smoothed(model.chain.smoothed.rows(), k_n);
    for (Eigen::Index k = 0; k < k_n; ++k)
        new_smoothed.col(to_new[static_cast<std::size_t>(k)]) = model.chain.smoothed.col(k);
    model.chain.smoothed = std::move(new_smoothed);
    return to_new;
}

// --- Chain driver -------------------------------------------------------------

PosteriorDraws run_chain(const Dataset& data, const Hyperparameters& hyper, const ChainConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed, 0);
    Model model(data, hyper);
    model.initialize(rng);

    PosteriorDraws draws(model.num_equations(), model.num_regimes(), hyper.rank, model.num_obs(),
                         data.covariate_shape(0), cfg);
    for (long it = 0; it < cfg.iterations; ++it) {
        rpsg_sweep(model, cfg, rng);
        if (cfg.track_outcome_mse) draws.push_outcome_mse(model.last_outcome_mse);
        if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
            draws.append(model);
            draws.add_smoothed(model.chain.smoothed);
        }
    }
    return draws;
}

std::vector<PosteriorDraws> run_chains(const Dataset& data, const Hyperparameters& hyper,
                                       const ChainConfig& cfg, int n_chains) {
    std::vector<PosteriorDraws> out(static_cast<std::size_t>(std::max(n_chains, 1)));
    std::vector<std::thread> workers;
    workers.reserve(out.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        workers.emplace_back([&, c]() {
            ChainConfig chain_cfg = cfg;
            chain_cfg.seed = cfg.seed + static_cast<std::uint64_t>(c);
            out[c] = run_chain(data, hyper, chain_cfg);
        });
    }
    for (auto& w : workers) w.join();
    return out;
}

// --- PosteriorDraws -----------------------------------------------------------

PosteriorDraws::PosteriorDraws(Eigen::Index n_eq, Eigen::Index n_regimes, Eigen::Index rank,
                               Eigen::Index n_obs, std::vector<Eigen::Index> coeff_shape,
                               const ChainConfig& cfg)
    : n_eq_(n_eq), n_regimes_(n_regimes), rank_(rank), n_obs_(n_obs),
      coeff_shape_(std::move(coeff_shape)), config_(cfg) {
    coeff_size_ = 1;
    for (Eigen::Index p : coeff_shape_) coeff_size_ *= p;
    const long capacity =
        cfg.iterations > cfg.burn_in ? (cfg.iterations - cfg.burn_in + cfg.thin - 1) / cfg.thin : 0;
    records_.resize(capacity, record_length());
    smoothed_sum_ = Eigen::MatrixXd::Zero(n_obs_, n_regimes_);
}

Eigen::Index PosteriorDraws::record_length() const {
    const Eigen::Index cells = n_eq_ * n_regimes_;
    return cells * coeff_size_ + cells + cells + n_regimes_ * n_regimes_ + cells * rank_ + cells +
           n_obs_;
}

Eigen::Index PosteriorDraws::coeff_offset(Eigen::Index equation, Eigen::Index regime) const {
    return (equation * n_regimes_ + regime) * coeff_size_;
}
Eigen::Index PosteriorDraws::mu_offset() const { return n_eq_ * n_regimes_ * coeff_size_; }
Eigen::Index PosteriorDraws::noise_offset() const { return mu_offset() + n_eq_ * n_regimes_; }
Eigen::Index PosteriorDraws::trans_offset() const { return noise_offset() + n_eq_ * n_regimes_; }
Eigen::Index PosteriorDraws::zeta_offset() const {
    return trans_offset() + n_regimes_ * n_regimes_;
}
Eigen::Index PosteriorDraws::tau_offset() const {
    return zeta_offset() + n_eq_ * n_regimes_ * rank_;
}
Eigen::Index PosteriorDraws::path_offset() const { return tau_offset() + n_eq_ * n_regimes_; }

void PosteriorDraws::append(const Model& model) {
    if (count_ >= records_.rows()) records_.conservativeResize(count_ + 16, record_length());
    auto row = records_.row(count_);
    for (Eigen::Index l = 0; l < n_eq_; ++l) {
        for (Eigen::Index k = 0; k < n_regimes_; ++k) {
            const Tensor coeff = model.composed_coeff(l, k);
            row.segment(coeff_offset(l, k), coeff_size_) = coeff.data().transpose();
            const StateParams& sp = model.state(l, k);
            const Eigen::Index cell = l * n_regimes_ + k;
            row[mu_offset() + cell] = sp.mu;
            row[noise_offset() + cell] = sp.noise_var;
            row.segment(zeta_offset() + cell * rank_, rank_) = sp.zeta.transpose();
            row[tau_offset() + cell] = sp.tau;
        }
    }
    for (Eigen::Index i = 0; i < n_regimes_; ++i)
        for (Eigen::Index j = 0; j < n_regimes_; ++j)
            row[trans_offset() + i * n_regimes_ + j] = model.chain.trans(i, j);
    for (Eigen::Index t = 0; t < n_obs_; ++t)
        row[path_offset() + t] = static_cast<double>(model.chain.path[t]);
    ++count_;
}

void PosteriorDraws::add_smoothed(const Eigen::MatrixXd& smoothed) {
    smoothed_sum_ += smoothed;
    ++smoothed_count_;
}

Tensor PosteriorDraws::coeff_mean(Eigen::Index equation, Eigen::Index regime) const {
    Tensor mean(coeff_shape_);
    if (count_ == 0) return mean;
    mean.data() = records_.topRows(count_)
                      .middleCols(coeff_offset(equation, regime), coeff_size_)
                      .colwise()
                      .mean()
                      .transpose();
    return mean;
}

Eigen::VectorXd PosteriorDraws::coeff_entry_draws(Eigen::Index equation, Eigen::Index regime,
                                                  Eigen::Index flat) const {
    return records_.topRows(count_).col(coeff_offset(equation, regime) + flat);
}

double PosteriorDraws::mu_mean(Eigen::Index equation, Eigen::Index regime) const {
    return mu_draws(equation, regime).mean();
}

double PosteriorDraws::noise_var_mean(Eigen::Index equation, Eigen::Index regime) const {
    return noise_var_draws(equation, regime).mean();
}

Eigen::MatrixXd PosteriorDraws::trans_mean() const {
    Eigen::MatrixXd mean(n_regimes_, n_regimes_);
    for (Eigen::Index i = 0; i < n_regimes_; ++i)
        for (Eigen::Index j = 0; j < n_regimes_; ++j)
            mean(i, j) = records_.topRows(count_).col(trans_offset() + i * n_regimes_ + j).mean();
    return mean;
}

Eigen::MatrixXd PosteriorDraws::smoothed_mean() const {
    if (smoothed_count_ == 0) return smoothed_sum_;
    return smoothed_sum_ / static_cast<double>(smoothed_count_);
}

Eigen::VectorXi PosteriorDraws::map_path() const {
    const Eigen::MatrixXd sm = smoothed_mean();
    Eigen::VectorXi path(n_obs_);
    for (Eigen::Index t = 0; t < n_obs_; ++t) {
        Eigen::Index arg = 0;
        sm.row(t).maxCoeff(&arg);
        path[t] = static_cast<int>(arg);
    }
    return path;
}

Eigen::VectorXd PosteriorDraws::mu_draws(Eigen::Index equation, Eigen::Index regime) const {
    return records_.topRows(count_).col(mu_offset() + equation * n_regimes_ + regime);
}
Eigen::VectorXd PosteriorDraws::noise_var_draws(Eigen::Index equation, Eigen::Index regime) const {
    return records_.topRows(count_).col(noise_offset() + equation * n_regimes_ + regime);
}
Eigen::VectorXd PosteriorDraws::tau_draws(Eigen::Index equation, Eigen::Index regime) const {
    return records_.topRows(count_).col(tau_offset() + equation * n_regimes_ + regime);
}
Eigen::VectorXd PosteriorDraws::trans_entry_draws(Eigen::Index from, Eigen::Index to) const {
    return records_.topRows(count_).col(trans_offset() + from * n_regimes_ + to);
}
Eigen::VectorXd PosteriorDraws::zeta_draws(Eigen::Index equation, Eigen::Index regime,
                                           Eigen::Index d) const {
    return records_.topRows(count_).col(zeta_offset() + (equation * n_regimes_ + regime) * rank_ + d);
}

}  // namespace msmetr
