#include "msmetr/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "msmetr/diagnostics.hpp"

namespace msmetr {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

std::vector<Eigen::Index> parse_shape_header(const std::string& line) {
    const std::string prefix = "# shape:";
    if (line.rfind(prefix, 0) != 0)
        throw std::runtime_error("missing '# shape:' header in tensor CSV");
    std::vector<Eigen::Index> shape;
    std::stringstream ss(line.substr(prefix.size()));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.find_first_not_of(" \t\r") == std::string::npos) continue;
        shape.push_back(static_cast<Eigen::Index>(std::stoll(tok)));
    }
    if (shape.empty()) throw std::runtime_error("empty shape header");
    return shape;
}

std::vector<double> parse_csv_row(const std::string& line) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.find_first_not_of(" \t\r") == std::string::npos)
            throw std::runtime_error("empty field in CSV row");
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        row.push_back(v);
    }
    return row;
}

void check_finite(double v, const std::string& path) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite value in " + path);
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_tensor_csv(const std::string& path, const Tensor& tensor) {
    std::ofstream out = open_out(path);
    out << "# shape: ";
    for (Eigen::Index m = 0; m < tensor.order(); ++m)
        out << (m ? "," : "") << tensor.shape()[static_cast<std::size_t>(m)];
    out << "\n";
    for (Eigen::Index i = 0; i < tensor.size(); ++i) out << format_double(tensor[i]) << "\n";
}

Tensor read_tensor_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty tensor file: " + path);
    Tensor t(parse_shape_header(line));
    Eigen::Index i = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (i >= t.size()) throw std::runtime_error("too many values in " + path);
        t[i] = std::stod(line);
        check_finite(t[i], path);
        ++i;
    }
    if (i != t.size()) throw std::runtime_error("too few values in " + path);
    return t;
}

void write_covariates_csv(const std::string& path, const std::vector<Tensor>& covariates) {
    if (covariates.empty()) throw std::invalid_argument("write_covariates_csv: empty sequence");
    std::ofstream out = open_out(path);
    const auto& shape = covariates.front().shape();
    out << "# shape: ";
    for (std::size_t m = 0; m < shape.size(); ++m) out << (m ? "," : "") << shape[m];
    out << "\n";
    for (const Tensor& x : covariates) {
        for (Eigen::Index i = 0; i < x.size(); ++i) out << (i ? "," : "") << format_double(x[i]);
        out << "\n";
    }
}

std::vector<Tensor> read_covariates_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty covariate file: " + path);
    const std::vector<Eigen::Index> shape = parse_shape_header(line);
    Eigen::Index size = 1;
    for (Eigen::Index p : shape) size *= p;
    std::vector<Tensor> xs;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const std::vector<double> row = parse_csv_row(line);
        if (static_cast<Eigen::Index>(row.size()) != size)
            throw std::runtime_error("covariate row length does not match shape in " + path);
        Tensor x(shape);
        for (Eigen::Index i = 0; i < size; ++i) {
            x[i] = row[static_cast<std::size_t>(i)];
            check_finite(x[i], path);
        }
        xs.push_back(std::move(x));
    }
    if (xs.empty()) throw std::runtime_error("no covariate rows in " + path);
    return xs;
}

void write_responses_csv(const std::string& path, const Eigen::MatrixXd& responses) {
    std::ofstream out = open_out(path);
    out << "# equations: " << responses.cols() << "\n";
    for (Eigen::Index t = 0; t < responses.rows(); ++t) {
        for (Eigen::Index l = 0; l < responses.cols(); ++l)
            out << (l ? "," : "") << format_double(responses(t, l));
        out << "\n";
    }
}

Eigen::MatrixXd read_responses_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        rows.push_back(parse_csv_row(line));
        if (rows.back().size() != rows.front().size())
            throw std::runtime_error("ragged response rows in " + path);
    }
    if (rows.empty()) throw std::runtime_error("no response rows in " + path);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index t = 0; t < y.rows(); ++t)
        for (Eigen::Index l = 0; l < y.cols(); ++l) {
            y(t, l) = rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(l)];
            check_finite(y(t, l), path);
        }
    return y;
}

Dataset load_dataset(const std::string& responses_path,
                     const std::vector<std::string>& covariate_paths) {
    Eigen::MatrixXd y = read_responses_csv(responses_path);
    if (covariate_paths.empty()) throw std::invalid_argument("load_dataset: no covariate files");
    if (covariate_paths.size() == 1) {
        std::vector<Tensor> xs = read_covariates_csv(covariate_paths.front());
        if (static_cast<Eigen::Index>(xs.size()) != y.rows())
            throw std::runtime_error("covariate count does not match response length");
        return Dataset::shared(std::move(y), std::move(xs));
    }
    if (static_cast<Eigen::Index>(covariate_paths.size()) != y.cols())
        throw std::runtime_error("need one covariate file per equation");
    std::vector<std::vector<Tensor>> seqs;
    for (const auto& path : covariate_paths) {
        seqs.push_back(read_covariates_csv(path));
        if (static_cast<Eigen::Index>(seqs.back().size()) != y.rows())
            throw std::runtime_error("covariate count does not match response length");
    }
    return Dataset::per_equation(std::move(y), std::move(seqs));
}

void write_truth(const std::string& dir, const SimTruth& truth) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (std::size_t k = 0; k < truth.coefficients.size(); ++k)
        write_tensor_csv(dir + "/true_coeff_" + std::to_string(k) + ".csv", truth.coefficients[k]);
    std::ofstream out = open_out(dir + "/truth.json");
    nlohmann::json j;
    j["seed"] = truth.seed;
    j["regimes"] = truth.coefficients.size();
    j["mu"] = std::vector<double>(truth.mu.data(), truth.mu.data() + truth.mu.size());
    j["sigma_sq"] =
        std::vector<double>(truth.sigma_sq.data(), truth.sigma_sq.data() + truth.sigma_sq.size());
    std::vector<double> trans(truth.trans.data(), truth.trans.data() + truth.trans.size());
    j["trans_colmajor"] = trans;
    j["path"] = std::vector<int>(truth.path.data(), truth.path.data() + truth.path.size());
    out << j.dump(2) << "\n";
}

SimTruth read_truth(const std::string& dir) {
    SimTruth truth;
    std::ifstream in = open_in(dir + "/truth.json");
    nlohmann::json j;
    in >> j;
    truth.seed = j.value("seed", 0ULL);
    const std::size_t k_n = j.at("regimes").get<std::size_t>();
    for (std::size_t k = 0; k < k_n; ++k)
        truth.coefficients.push_back(read_tensor_csv(dir + "/true_coeff_" + std::to_string(k) + ".csv"));
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto sig = j.at("sigma_sq").get<std::vector<double>>();
    truth.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    truth.sigma_sq =
        Eigen::Map<const Eigen::VectorXd>(sig.data(), static_cast<Eigen::Index>(sig.size()));
    const auto trans = j.at("trans_colmajor").get<std::vector<double>>();
    truth.trans = Eigen::Map<const Eigen::MatrixXd>(trans.data(), static_cast<Eigen::Index>(k_n),
                                                    static_cast<Eigen::Index>(k_n));
    const auto path = j.at("path").get<std::vector<int>>();
    truth.path = Eigen::Map<const Eigen::VectorXi>(path.data(), static_cast<Eigen::Index>(path.size()));
    return truth;
}

void save_draws(const std::string& bin_path, const std::string& json_path,
                const PosteriorDraws& draws) {
    {
        std::ofstream bin(bin_path, std::ios::binary);
        if (!bin) throw std::runtime_error("cannot open for writing: " + bin_path);
        const Eigen::Index len = draws.record_length();
        for (long r = 0; r < draws.count(); ++r) {
            const Eigen::VectorXd row = draws.records().row(r).transpose();
            bin.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(sizeof(double)) * len);
        }
    }
    nlohmann::json j;
    j["format"] = "msmetr-draws-v1";
    j["count"] = draws.count();
    j["record_length"] = draws.record_length();
    j["equations"] = draws.num_equations();
    j["regimes"] = draws.num_regimes();
    j["rank"] = draws.rank();
    j["num_obs"] = draws.num_obs();
    j["coeff_shape"] = draws.coeff_shape();
    j["seed"] = draws.config().seed;
    j["iterations"] = draws.config().iterations;
    j["burn_in"] = draws.config().burn_in;
    j["thin"] = draws.config().thin;
    j["scan_fraction"] = draws.config().scan_fraction;
    j["ident_rule"] = to_string(draws.config().ident_rule);
    j["fields"] = {
        {{"name", "coeff"}, {"offset", 0}, {"length", draws.mu_offset()}},
        {{"name", "mu"}, {"offset", draws.mu_offset()}, {"length", draws.noise_offset() - draws.mu_offset()}},
        {{"name", "noise_var"}, {"offset", draws.noise_offset()}, {"length", draws.trans_offset() - draws.noise_offset()}},
        {{"name", "trans"}, {"offset", draws.trans_offset()}, {"length", draws.zeta_offset() - draws.trans_offset()}},
        {{"name", "zeta"}, {"offset", draws.zeta_offset()}, {"length", draws.tau_offset() - draws.zeta_offset()}},
        {{"name", "tau"}, {"offset", draws.tau_offset()}, {"length", draws.path_offset() - draws.tau_offset()}},
        {{"name", "path"}, {"offset", draws.path_offset()}, {"length", draws.record_length() - draws.path_offset()}},
    };
    {
        Eigen::MatrixXd sm = draws.smoothed_mean();
        j["smoothed_mean_colmajor"] = std::vector<double>(sm.data(), sm.data() + sm.size());
        j["smoothed_count"] = draws.smoothed_count();
    }
    j["outcome_mse"] = draws.outcome_mse();
    std::ofstream out = open_out(json_path);
    out << j.dump(2) << "\n";
}

PosteriorDraws load_draws(const std::string& bin_path, const std::string& json_path) {
    std::ifstream in = open_in(json_path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "msmetr-draws-v1")
        throw std::runtime_error("unrecognized draws sidecar: " + json_path);

    ChainConfig cfg;
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.iterations = j.at("iterations").get<long>();
    cfg.burn_in = j.at("burn_in").get<long>();
    cfg.thin = j.at("thin").get<long>();
    cfg.scan_fraction = j.at("scan_fraction").get<double>();
    cfg.ident_rule = ident_rule_from_string(j.at("ident_rule").get<std::string>());

    PosteriorDraws draws(j.at("equations").get<Eigen::Index>(), j.at("regimes").get<Eigen::Index>(),
                         j.at("rank").get<Eigen::Index>(), j.at("num_obs").get<Eigen::Index>(),
                         j.at("coeff_shape").get<std::vector<Eigen::Index>>(), cfg);
    const long count = j.at("count").get<long>();
    const Eigen::Index len = draws.record_length();
    if (len != j.at("record_length").get<Eigen::Index>())
        throw std::runtime_error("record length mismatch in " + json_path);
    if (draws.records().rows() < count) draws.records().resize(count, len);

    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open for reading: " + bin_path);
    Eigen::VectorXd row(len);
    for (long r = 0; r < count; ++r) {
        bin.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(sizeof(double)) * len);
        if (!bin) throw std::runtime_error("truncated draws file: " + bin_path);
        draws.records().row(r) = row.transpose();
    }
    draws.set_count(count);

    const auto sm = j.at("smoothed_mean_colmajor").get<std::vector<double>>();
    const long sm_count = j.at("smoothed_count").get<long>();
    draws.smoothed_sum() = Eigen::Map<const Eigen::MatrixXd>(sm.data(), draws.num_obs(),
                                                             draws.num_regimes()) *
                           static_cast<double>(std::max(sm_count, 1L));
    draws.set_smoothed_count(sm_count);
    draws.outcome_mse_mutable() = j.at("outcome_mse").get<std::vector<double>>();
    return draws;
}

void write_summary_csv(const std::string& path, const PosteriorDraws& draws) {
    std::ofstream out = open_out(path);
    out << "parameter,mean,sd,q05,q50,q95,acf1,acf5,acf10\n";
    auto emit = [&](const ScalarSummary& s) {
        out << s.name << "," << format_double(s.mean) << "," << format_double(s.sd) << ","
            << format_double(s.q05) << "," << format_double(s.q50) << "," << format_double(s.q95)
            << ",";
        if (s.acf_defined)
            out << format_double(s.acf1) << "," << format_double(s.acf5) << ","
                << format_double(s.acf10);
        else
            out << "NA,NA,NA";
        out << "\n";
    };
    const Eigen::Index k_n = draws.num_regimes();
    for (Eigen::Index l = 0; l < draws.num_equations(); ++l) {
        for (Eigen::Index k = 0; k < k_n; ++k) {
            const std::string tag = "eq" + std::to_string(l) + ".regime" + std::to_string(k);
            emit(summarize_series(tag + ".mu", draws.mu_draws(l, k)));
            emit(summarize_series(tag + ".noise_var", draws.noise_var_draws(l, k)));
            emit(summarize_series(tag + ".tau", draws.tau_draws(l, k)));
            for (Eigen::Index d = 0; d < draws.rank(); ++d)
                emit(summarize_series(tag + ".zeta" + std::to_string(d), draws.zeta_draws(l, k, d)));
            Eigen::Index size = 1;
            for (Eigen::Index p : draws.coeff_shape()) size *= p;
            for (Eigen::Index i = 0; i < size; ++i)
                emit(summarize_series(tag + ".coeff" + std::to_string(i),
                                      draws.coeff_entry_draws(l, k, i)));
        }
    }
    for (Eigen::Index i = 0; i < k_n; ++i)
        for (Eigen::Index jj = 0; jj < k_n; ++jj)
            emit(summarize_series("trans" + std::to_string(i) + std::to_string(jj),
                                  draws.trans_entry_draws(i, jj)));
}

void write_trace_csv(const std::string& path, const PosteriorDraws& draws) {
    std::ofstream out = open_out(path);
    out << "draw";
    const Eigen::Index k_n = draws.num_regimes();
    for (Eigen::Index l = 0; l < draws.num_equations(); ++l)
        for (Eigen::Index k = 0; k < k_n; ++k) {
            const std::string tag = "eq" + std::to_string(l) + ".regime" + std::to_string(k);
            out << "," << tag << ".mu," << tag << ".noise_var," << tag << ".tau";
        }
    for (Eigen::Index i = 0; i < k_n; ++i) out << ",trans" << i << i;
    out << "\n";
    for (long r = 0; r < draws.count(); ++r) {
        out << r;
        for (Eigen::Index l = 0; l < draws.num_equations(); ++l)
            for (Eigen::Index k = 0; k < k_n; ++k)
                out << "," << format_double(draws.mu_draws(l, k)[r]) << ","
                    << format_double(draws.noise_var_draws(l, k)[r]) << ","
                    << format_double(draws.tau_draws(l, k)[r]);
        for (Eigen::Index i = 0; i < k_n; ++i)
            out << "," << format_double(draws.trans_entry_draws(i, i)[r]);
        out << "\n";
    }
}

void write_acf_csv(const std::string& path, const PosteriorDraws& draws) {
    std::ofstream out = open_out(path);
    out << "series,lag,acf\n";
    const std::vector<int> lags = {1, 5, 10};
    auto emit = [&](const std::string& name, const Eigen::VectorXd& series) {
        const auto vals = acf(series, lags);
        if (!vals.has_value()) return;
        for (std::size_t i = 0; i < lags.size(); ++i)
            out << name << "," << lags[i] << "," << format_double((*vals)[i]) << "\n";
    };
    for (Eigen::Index l = 0; l < draws.num_equations(); ++l)
        for (Eigen::Index k = 0; k < draws.num_regimes(); ++k) {
            const std::string tag = "eq" + std::to_string(l) + ".regime" + std::to_string(k);
            emit(tag + ".mu", draws.mu_draws(l, k));
            emit(tag + ".noise_var", draws.noise_var_draws(l, k));
            emit(tag + ".tau", draws.tau_draws(l, k));
        }
}

void write_states_csv(const std::string& path, const PosteriorDraws& draws) {
    std::ofstream out = open_out(path);
    out << "t,map_state";
    for (Eigen::Index k = 0; k < draws.num_regimes(); ++k) out << ",smoothed" << k;
    out << "\n";
    const Eigen::MatrixXd sm = draws.smoothed_mean();
    const Eigen::VectorXi map_path = draws.map_path();
    for (Eigen::Index t = 0; t < draws.num_obs(); ++t) {
        out << t << "," << map_path[t];
        for (Eigen::Index k = 0; k < draws.num_regimes(); ++k)
            out << "," << format_double(sm(t, k));
        out << "\n";
    }
}

void write_scatter_csv(const std::string& path, const PosteriorDraws& draws, double level) {
    std::ofstream out = open_out(path);
    out << "equation,entry,regime0_mean,regime1_mean,cov00,cov01,cov11,radius_sq,"
           "intersects_diagonal\n";
    if (draws.num_regimes() < 2) return;
    Eigen::Index size = 1;
    for (Eigen::Index p : draws.coeff_shape()) size *= p;
    for (Eigen::Index l = 0; l < draws.num_equations(); ++l) {
        for (Eigen::Index i = 0; i < size; ++i) {
            Eigen::MatrixXd pairs(draws.count(), 2);
            pairs.col(0) = draws.coeff_entry_draws(l, 0, i);
            pairs.col(1) = draws.coeff_entry_draws(l, 1, i);
            const HpdEllipse e = hpd_region(pairs, level);
            out << l << "," << i << "," << format_double(e.mean[0]) << ","
                << format_double(e.mean[1]) << "," << format_double(e.cov(0, 0)) << ","
                << format_double(e.cov(0, 1)) << "," << format_double(e.cov(1, 1)) << ","
                << format_double(e.radius_sq) << "," << (e.intersects_diagonal ? 1 : 0) << "\n";
        }
    }
}

void write_outcome_mse_csv(const std::string& path, const PosteriorDraws& draws) {
    std::ofstream out = open_out(path);
    out << "iteration,outcome_mse\n";
    const auto& mse = draws.outcome_mse();
    for (std::size_t i = 0; i < mse.size(); ++i)
        out << (i + 1) << "," << format_double(mse[i]) << "\n";
}

void write_fit_reports_csv(const std::string& path, const std::vector<FitReport>& reports) {
    std::ofstream out = open_out(path);
    out << "method,in_mse,in_mae";
    if (!reports.empty())
        for (int h : reports.front().horizons) out << ",mse_h" << h << ",mae_h" << h;
    out << "\n";
    for (const FitReport& r : reports) {
        out << r.method << "," << format_double(r.in_mse) << "," << format_double(r.in_mae);
        for (std::size_t i = 0; i < r.horizons.size(); ++i)
            out << "," << format_double(r.out_mse[i]) << "," << format_double(r.out_mae[i]);
        out << "\n";
    }
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in = open_in(path);
    std::map<std::string, std::string> kv;
    std::string line, section;
    auto trim = [](std::string s) {
        const auto begin = s.find_first_not_of(" \t\r");
        if (begin == std::string::npos) return std::string();
        const auto end = s.find_last_not_of(" \t\r");
        return s.substr(begin, end - begin + 1);
    };
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line without '=': " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

}  // namespace msmetr
