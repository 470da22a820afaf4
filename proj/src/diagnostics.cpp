#include "msmetr/diagnostics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace msmetr {

std::optional<std::vector<double>> acf(const Eigen::VectorXd& series, const std::vector<int>& lags) {
    const Eigen::Index n = series.size();
    if (n < 2) return std::nullopt;
    const double mean = series.mean();
    const Eigen::VectorXd centered = series.array() - mean;
    const double c0 = centered.squaredNorm() / static_cast<double>(n);
    if (!(c0 > 0.0)) return std::nullopt;
    std::vector<double> out;
    out.reserve(lags.size());
    for (int lag : lags) {
        if (lag < 0 || lag >= n) throw std::invalid_argument("acf: lag out of range");
        const double ch =
            centered.head(n - lag).dot(centered.tail(n - lag)) / static_cast<double>(n);
        out.push_back(ch / c0);
    }
    return out;
}

double mse_coeff(const Tensor& post_mean, const Tensor& truth) {
    if (!post_mean.same_shape(truth)) throw std::invalid_argument("mse_coeff: shape mismatch");
    return (post_mean.data() - truth.data()).squaredNorm() / static_cast<double>(truth.size());
}

double mae_coeff(const Tensor& post_mean, const Tensor& truth) {
    if (!post_mean.same_shape(truth)) throw std::invalid_argument("mae_coeff: shape mismatch");
    return (post_mean.data() - truth.data()).cwiseAbs().sum() / static_cast<double>(truth.size());
}

StateScore state_accuracy(const Eigen::MatrixXd& smoothed, const Eigen::VectorXi& true_path) {
    const Eigen::Index t_n = smoothed.rows();
    const Eigen::Index k_n = smoothed.cols();
    if (true_path.size() != t_n) throw std::invalid_argument("state_accuracy: length mismatch");

    Eigen::VectorXi map_path(t_n);
    for (Eigen::Index t = 0; t < t_n; ++t) {
        Eigen::Index arg = 0;
        smoothed.row(t).maxCoeff(&arg);
        map_path[t] = static_cast<int>(arg);
    }

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(k_n));
    std::iota(perm.begin(), perm.end(), Eigen::Index(0));
    StateScore best;
    best.hit_rate = -1.0;
    std::vector<Eigen::Index> trial = perm;
    std::sort(trial.begin(), trial.end());
    do {
        Eigen::Index hits = 0;
        for (Eigen::Index t = 0; t < t_n; ++t)
            if (map_path[t] == trial[static_cast<std::size_t>(true_path[t])]) ++hits;
        const double rate = static_cast<double>(hits) / static_cast<double>(t_n);
        if (rate > best.hit_rate) {
            best.hit_rate = rate;
            best.permutation = trial;
        }
    } while (std::next_permutation(trial.begin(), trial.end()));

    double sq = 0.0;
    for (Eigen::Index t = 0; t < t_n; ++t) {
        const Eigen::Index truth_label = best.permutation[static_cast<std::size_t>(true_path[t])];
        for (Eigen::Index k = 0; k < k_n; ++k) {
            const double diff =
                (map_path[t] == k ? 1.0 : 0.0) - (truth_label == k ? 1.0 : 0.0);
            sq += diff * diff;
        }
    }
    best.mse = sq / static_cast<double>(t_n * k_n);
    return best;
}

HpdEllipse hpd_region(const Eigen::MatrixXd& pairs, double level) {
    if (pairs.cols() != 2 || pairs.rows() < 1) throw std::invalid_argument("hpd_region: need n x 2 draws");
    if (!(level > 0.0) || !(level < 1.0)) throw std::invalid_argument("hpd_region: level must be in (0,1)");
    HpdEllipse e;
    e.mean = pairs.colwise().mean().transpose();
    const Eigen::Index n = pairs.rows();
    if (n > 1) {
        Eigen::MatrixXd centered = pairs.rowwise() - e.mean.transpose();
        e.cov = centered.transpose() * centered / static_cast<double>(n - 1);
    }
    e.radius_sq = -2.0 * std::log(1.0 - level);  // chi-square with 2 dof

    const double scale = std::max({std::fabs(e.mean[0]), std::fabs(e.mean[1]), 1.0});
    if (e.cov.determinant() <= 1e-24 * scale * scale) {
        // Degenerate (point or line) sample cloud: fall back to the
        // mean-on-the-line test.
        e.intersects_diagonal = std::fabs(e.mean[0] - e.mean[1]) <= 1e-9 * scale;
        return e;
    }
    // Minimise the Mahalanobis distance over the line x1 = x2.
    const Eigen::Matrix2d a = e.cov.inverse();
    const Eigen::Vector2d u(1.0, 1.0);
    const double tstar = u.dot(a * e.mean) / u.dot(a * u);
    const Eigen::Vector2d closest = tstar * u;
    const double dist = (closest - e.mean).dot(a * (closest - e.mean));
    e.intersects_diagonal = dist <= e.radius_sq;
    return e;
}

double quantile(const Eigen::VectorXd& values, double q) {
    if (values.size() == 0) throw std::invalid_argument("quantile: empty sample");
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return (1.0 - frac) * sorted[lo] + frac * sorted[hi];
}

ScalarSummary summarize_series(const std::string& name, const Eigen::VectorXd& draws) {
    ScalarSummary s;
    s.name = name;
    s.mean = draws.mean();
    s.sd = draws.size() > 1
               ? std::sqrt((draws.array() - s.mean).square().sum() / static_cast<double>(draws.size() - 1))
               : 0.0;
    s.q05 = quantile(draws, 0.05);
    s.q50 = quantile(draws, 0.50);
    s.q95 = quantile(draws, 0.95);
    if (auto vals = acf(draws, {1, 5, 10}); vals.has_value() && draws.size() > 10) {
        s.acf1 = (*vals)[0];
        s.acf5 = (*vals)[1];
        s.acf10 = (*vals)[2];
        s.acf_defined = true;
    }
    return s;
}

}  // namespace msmetr
