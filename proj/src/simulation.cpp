#include "msmetr/simulation.hpp"

#include <cmath>
#include <stdexcept>

#include "msmetr/distributions.hpp"

namespace msmetr {

namespace {

bool needs_square(Pattern pattern) {
    return pattern == Pattern::Cross || pattern == Pattern::Circle ||
           pattern == Pattern::CorePeriphery;
}

}  // namespace

Pattern pattern_from_string(const std::string& name) {
    if (name == "diagonal") return Pattern::Diagonal;
    if (name == "anti-diagonal") return Pattern::AntiDiagonal;
    if (name == "cross") return Pattern::Cross;
    if (name == "circle") return Pattern::Circle;
    if (name == "core-periphery") return Pattern::CorePeriphery;
    throw std::invalid_argument("unknown coefficient pattern: " + name);
}

std::string to_string(Pattern pattern) {
    switch (pattern) {
        case Pattern::Diagonal: return "diagonal";
        case Pattern::AntiDiagonal: return "anti-diagonal";
        case Pattern::Cross: return "cross";
        case Pattern::Circle: return "circle";
        case Pattern::CorePeriphery: return "core-periphery";
    }
    return "diagonal";
}

RegimeSpec RegimeSpec::two_state(Pattern first, Pattern second) {
    RegimeSpec spec;
    spec.patterns = {first, second};
    spec.trans.resize(2, 2);
    spec.trans << 0.95, 0.05, 0.05, 0.95;
    spec.mu = Eigen::VectorXd::Zero(2);
    spec.sigma_sq.resize(2);
    spec.sigma_sq << 2.0, 0.1;
    return spec;
}

Tensor gen_coefficient(Pattern pattern, Eigen::Index rows, Eigen::Index cols, bool noisy, Rng& rng) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("gen_coefficient: bad size");
    if (needs_square(pattern) && rows != cols)
        throw std::invalid_argument("gen_coefficient: symmetric patterns need square sizes");
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(rows, cols);
    switch (pattern) {
        case Pattern::Diagonal:
            for (Eigen::Index i = 0; i < std::min(rows, cols); ++i) b(i, i) = 1.0;
            break;
        case Pattern::AntiDiagonal:
            for (Eigen::Index i = 0; i < std::min(rows, cols); ++i) b(i, cols - 1 - i) = 1.0;
            break;
        case Pattern::Cross:
            for (Eigen::Index i = 0; i < rows; ++i) {
                b(i, i) = 1.0;
                b(i, cols - 1 - i) = 1.0;
            }
            break;
        case Pattern::Circle: {
            // Ring of index-space radius p/3 around the grid centre.
            const double centre = static_cast<double>(rows - 1) / 2.0;
            const double radius = static_cast<double>(rows) / 3.0;
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j) {
                    const double di = static_cast<double>(i) - centre;
                    const double dj = static_cast<double>(j) - centre;
                    if (std::fabs(std::sqrt(di * di + dj * dj) - radius) <= 0.75) b(i, j) = 1.0;
                }
            break;
        }
        case Pattern::CorePeriphery: {
            const Eigen::Index core = std::max<Eigen::Index>(rows / 4, 1);
            b.topLeftCorner(core, core).setOnes();
            for (Eigen::Index i = 0; i < rows; ++i) b(i, i) = 1.0;
            break;
        }
    }
    if (noisy) {
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) b(i, j) += 0.1 * rng.normal();
    }
    return Tensor::from_matrix(b);
}

std::vector<Tensor> gen_covariates(CovariateKind kind, const std::vector<Eigen::Index>& shape,
                                   Eigen::Index num_obs, double rho, Rng& rng) {
    if (kind == CovariateKind::Ar1 && !(std::fabs(rho) < 1.0))
        throw std::invalid_argument("gen_covariates: |rho| must be < 1");
    std::vector<Tensor> xs;
    xs.reserve(static_cast<std::size_t>(num_obs));
    Tensor prev(shape);
    const double innov_sd = kind == CovariateKind::Ar1 ? std::sqrt(1.0 - rho * rho) : 1.0;
    for (Eigen::Index t = 0; t < num_obs; ++t) {
        Tensor x(shape);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (kind == CovariateKind::Iid || t == 0)
                x[i] = rng.normal();
            else
                x[i] = rho * prev[i] + innov_sd * rng.normal();
        }
        if (kind == CovariateKind::Ar1) prev = x;
        xs.push_back(std::move(x));
    }
    return xs;
}

std::pair<Dataset, SimTruth> gen_dataset(const SimSetting& setting, Rng& rng) {
    SimTruth truth;
    const std::vector<Eigen::Index> shape = {setting.rows, setting.cols};
    std::vector<Tensor> xs =
        gen_covariates(setting.covariate_kind, shape, setting.num_obs, setting.rho, rng);
    Eigen::MatrixXd y(setting.num_obs, 1);

    if (!setting.regimes.has_value()) {
        truth.coefficients.push_back(
            gen_coefficient(setting.pattern, setting.rows, setting.cols, setting.noisy, rng));
        truth.trans = Eigen::MatrixXd::Ones(1, 1);
        truth.mu = Eigen::VectorXd::Zero(1);
        truth.sigma_sq = Eigen::VectorXd::Constant(1, setting.noise_sd * setting.noise_sd);
        for (Eigen::Index t = 0; t < setting.num_obs; ++t)
            y(t, 0) = inner_product(truth.coefficients[0], xs[static_cast<std::size_t>(t)]) +
                      setting.noise_sd * rng.normal();
        return {Dataset::shared(std::move(y), std::move(xs)), std::move(truth)};
    }

    const RegimeSpec& spec = *setting.regimes;
    const Eigen::Index k_n = static_cast<Eigen::Index>(spec.patterns.size());
    if (spec.trans.rows() != k_n || spec.mu.size() != k_n || spec.sigma_sq.size() != k_n)
        throw std::invalid_argument("gen_dataset: inconsistent regime specification");
    for (Pattern p : spec.patterns)
        truth.coefficients.push_back(gen_coefficient(p, setting.rows, setting.cols, setting.noisy, rng));
    truth.trans = spec.trans;
    truth.mu = spec.mu;
    truth.sigma_sq = spec.sigma_sq;
    truth.path.resize(setting.num_obs);

    const Eigen::VectorXd init = stationary_distribution(spec.trans);
    truth.path[0] = static_cast<int>(sample_categorical(init, rng));
    for (Eigen::Index t = 1; t < setting.num_obs; ++t)
        truth.path[t] =
            static_cast<int>(sample_categorical(spec.trans.row(truth.path[t - 1]).transpose(), rng));
    for (Eigen::Index t = 0; t < setting.num_obs; ++t) {
        const Eigen::Index k = truth.path[t];
        y(t, 0) = spec.mu[k] +
                  inner_product(truth.coefficients[static_cast<std::size_t>(k)],
                                xs[static_cast<std::size_t>(t)]) +
                  std::sqrt(spec.sigma_sq[k]) * rng.normal();
    }
    return {Dataset::shared(std::move(y), std::move(xs)), std::move(truth)};
}

SimSetting named_setting(const std::string& name) {
    SimSetting s;
    if (name == "s1") {
        s.pattern = Pattern::Diagonal;
    } else if (name == "s2") {
        s.pattern = Pattern::Cross;
    } else if (name == "s3") {
        s.pattern = Pattern::Circle;
    } else if (name == "s4") {
        s.pattern = Pattern::CorePeriphery;
    } else if (name == "s1ms") {
        s.rows = s.cols = 12;
        s.num_obs = 800;
        s.regimes = RegimeSpec::two_state(Pattern::AntiDiagonal, Pattern::Diagonal);
    } else if (name == "s2ms") {
        s.rows = s.cols = 12;
        s.num_obs = 800;
        s.regimes = RegimeSpec::two_state(Pattern::Cross, Pattern::Diagonal);
    } else {
        throw std::invalid_argument("unknown simulation setting: " + name);
    }
    return s;
}

}  // namespace msmetr
