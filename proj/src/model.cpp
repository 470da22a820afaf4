#include "msmetr/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "msmetr/distributions.hpp"

namespace msmetr {

void Dataset::attach(Eigen::MatrixXd responses,
                     std::vector<std::shared_ptr<const std::vector<Tensor>>> sequences) {
    responses_ = std::move(responses);
    sequences_ = std::move(sequences);
    if (static_cast<Eigen::Index>(sequences_.size()) != responses_.cols())
        throw std::invalid_argument("dataset: one covariate sequence per equation required");
    if (!responses_.allFinite()) throw std::invalid_argument("dataset: responses contain NaN/Inf");
    for (const auto& seq : sequences_) {
        if (static_cast<Eigen::Index>(seq->size()) != responses_.rows())
            throw std::invalid_argument("dataset: covariate count must equal T");
        const auto& shape = seq->front().shape();
        for (const auto& x : *seq) {
            if (x.shape() != shape)
                throw std::invalid_argument("dataset: covariate tensors must share one shape");
            if (!x.data().allFinite())
                throw std::invalid_argument("dataset: covariates contain NaN/Inf");
        }
    }
}

Dataset Dataset::shared(Eigen::MatrixXd responses, std::vector<Tensor> covariates) {
    Dataset d;
    auto seq = std::make_shared<const std::vector<Tensor>>(std::move(covariates));
    std::vector<std::shared_ptr<const std::vector<Tensor>>> sequences(
        static_cast<std::size_t>(responses.cols()), seq);
    d.attach(std::move(responses), std::move(sequences));
    return d;
}

Dataset Dataset::per_equation(Eigen::MatrixXd responses,
                              std::vector<std::vector<Tensor>> covariates) {
    Dataset d;
    std::vector<std::shared_ptr<const std::vector<Tensor>>> sequences;
    sequences.reserve(covariates.size());
    for (auto& seq : covariates)
        sequences.push_back(std::make_shared<const std::vector<Tensor>>(std::move(seq)));
    d.attach(std::move(responses), std::move(sequences));
    return d;
}

Dataset Dataset::head(Eigen::Index t_end) const {
    if (t_end < 1 || t_end > num_obs()) throw std::out_of_range("dataset: bad truncation length");
    Dataset d;
    std::vector<std::shared_ptr<const std::vector<Tensor>>> sequences;
    sequences.reserve(sequences_.size());
    for (const auto& seq : sequences_) {
        sequences.push_back(std::make_shared<const std::vector<Tensor>>(
            seq->begin(), seq->begin() + t_end));
    }
    d.attach(responses_.topRows(t_end), std::move(sequences));
    return d;
}

Model::Model(Dataset data_in, Hyperparameters hyper_in)
    : data(std::move(data_in)), hyper(std::move(hyper_in)) {
    hyper.validate();
    if (hyper.nu.size() == 0) hyper.nu = Eigen::VectorXd::Ones(hyper.regimes);

    const Eigen::Index n_eq = data.num_equations();
    const Eigen::Index k_regimes = hyper.regimes;
    params.resize(static_cast<std::size_t>(n_eq));
    for (Eigen::Index l = 0; l < n_eq; ++l) {
        const auto& shape = data.covariate_shape(l);
        if (static_cast<Eigen::Index>(shape.size()) != hyper.modes)
            throw std::invalid_argument("model: covariate order must equal hyper.modes");
        auto& per_regime = params[static_cast<std::size_t>(l)];
        per_regime.reserve(static_cast<std::size_t>(k_regimes));
        for (Eigen::Index k = 0; k < k_regimes; ++k) {
            StateParams sp;
            sp.factors = FactorSet(hyper.rank, hyper.modes, shape);
            sp.marginals = Marginals(hyper.rank, shape);
            sp.zeta = Eigen::VectorXd::Constant(hyper.rank, 1.0 / static_cast<double>(hyper.rank));
            sp.sigma_mode_sq = Eigen::VectorXd::Ones(hyper.modes);
            sp.lambda = Eigen::MatrixXd::Ones(hyper.rank, hyper.modes);
            sp.w.clear();
            for (Eigen::Index d = 0; d < hyper.rank; ++d)
                for (Eigen::Index m = 0; m < hyper.modes; ++m)
                    sp.w.push_back(Eigen::VectorXd::Ones(shape[static_cast<std::size_t>(m)]));
            per_regime.push_back(std::move(sp));
        }
    }
    chain.trans = Eigen::MatrixXd::Zero(k_regimes, k_regimes);
    chain.path = Eigen::VectorXi::Zero(data.num_obs());
    chain.smoothed = Eigen::MatrixXd::Constant(data.num_obs(), k_regimes,
                                               1.0 / static_cast<double>(k_regimes));
}

void Model::initialize(Rng& rng) {
    const double start_sd = 0.1;
    const double tau0 = hyper.a_tau / hyper.b_tau;
    const double sigma_m0 = std::isinf(hyper.b_sigma) ? 1e-8 : hyper.a_sigma / hyper.b_sigma;
    const double lambda0 = hyper.a_lambda / hyper.b_lambda;
    const double w0 = 2.0 / (lambda0 * lambda0);

    for (Eigen::Index l = 0; l < num_equations(); ++l) {
        double y_var = 1.0;
        {
            const auto col = data.responses().col(l);
            const double mean = col.mean();
            const double ss = (col.array() - mean).square().sum();
            if (data.num_obs() > 1 && ss > 0.0) y_var = ss / static_cast<double>(data.num_obs() - 1);
        }
        for (Eigen::Index k = 0; k < num_regimes(); ++k) {
            StateParams& sp = state(l, k);
            for (Eigen::Index d = 0; d < hyper.rank; ++d) {
                for (Eigen::Index m = 0; m < hyper.modes; ++m) {
                    auto& f = sp.factors.factor(d, m).data();
                    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = start_sd * rng.normal();
                    auto& g = sp.marginals.gamma(d, m);
                    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = start_sd * rng.normal();
                    sp.w_vec(d, m).setConstant(w0);
                    sp.lambda(d, m) = lambda0;
                }
            }
            sp.zeta.setConstant(1.0 / static_cast<double>(hyper.rank));
            sp.tau = tau0;
            sp.sigma_mode_sq.setConstant(sigma_m0);
            sp.mu = start_sd * rng.normal();
            sp.noise_var = y_var;
        }
    }

    const double row_sum = hyper.nu.sum();
    for (Eigen::Index i = 0; i < hyper.regimes; ++i) chain.trans.row(i) = hyper.nu.transpose() / row_sum;
    for (Eigen::Index t = 0; t < data.num_obs(); ++t)
        chain.path[t] = static_cast<int>(rng.below(static_cast<std::uint64_t>(hyper.regimes)));
    chain.smoothed.setConstant(1.0 / static_cast<double>(hyper.regimes));
}

double Model::loglik_point(Eigen::Index equation, Eigen::Index regime, Eigen::Index t) const {
    const StateParams& sp = state(equation, regime);
    const double mean = sp.mu + inner_product(hadamard_compose(sp.factors), data.covariate(equation, t));
    return normal_logpdf(data.response(equation, t), mean, sp.noise_var);
}

double Model::loglik_path(const Eigen::VectorXi& path) const {
    if (path.size() != data.num_obs()) throw std::invalid_argument("loglik_path: length mismatch");
    const Eigen::VectorXd init = initial_distribution();
    double ll = std::log(init[path[0]]);
    for (Eigen::Index t = 1; t < path.size(); ++t) ll += std::log(chain.trans(path[t - 1], path[t]));
    for (Eigen::Index t = 0; t < path.size(); ++t)
        for (Eigen::Index l = 0; l < num_equations(); ++l) ll += loglik_point(l, path[t], t);
    return ll;
}

Eigen::VectorXd Model::initial_distribution() const { return stationary_distribution(chain.trans); }

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& trans) {
    const Eigen::Index k = trans.rows();
    if (k == 1) return Eigen::VectorXd::Ones(1);
    // pi' P = pi' with sum(pi) = 1: replace one balance equation by the
    // normalisation row.
    Eigen::MatrixXd a = trans.transpose() - Eigen::MatrixXd::Identity(k, k);
    a.row(k - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
    b[k - 1] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
        Eigen::VectorXd pi = lu.solve(b);
        if (pi.allFinite() && pi.minCoeff() > -1e-9) {
            pi = pi.cwiseMax(0.0);
            const double total = pi.sum();
            if (total > 0.0) return pi / total;
        }
    }
    return Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
}

}  // namespace msmetr
