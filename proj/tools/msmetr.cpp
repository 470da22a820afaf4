// Command-line front end: simulate data, fit the switching tensor regression,
// summarise chains, and run the classical baselines.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msmetr/baselines.hpp"
#include "msmetr/diagnostics.hpp"
#include "msmetr/io.hpp"
#include "msmetr/model.hpp"
#include "msmetr/prior.hpp"
#include "msmetr/sampler.hpp"
#include "msmetr/simulation.hpp"

namespace fs = std::filesystem;
using namespace msmetr;

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("MSMETR_OUT_DIR");
    return env ? std::string(env) : std::string(".");
}

std::string cfg_get(const std::map<std::string, std::string>& cfg, const std::string& key,
                    const std::string& fallback) {
    const auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

Dataset load_dataset_dir(const std::string& dir, Eigen::Index* n_equations = nullptr) {
    const std::string responses = dir + "/responses.csv";
    std::vector<std::string> covs;
    if (fs::exists(dir + "/covariates.csv")) {
        covs.push_back(dir + "/covariates.csv");
    } else {
        for (Eigen::Index l = 0;; ++l) {
            const std::string path = dir + "/covariates_eq" + std::to_string(l) + ".csv";
            if (!fs::exists(path)) break;
            covs.push_back(path);
        }
    }
    Dataset data = load_dataset(responses, covs);
    if (n_equations) *n_equations = data.num_equations();
    return data;
}

struct FitOptions {
    std::string data_dir;
    std::string out_dir;
    Eigen::Index regimes = 1;
    Eigen::Index rank = 3;
    long iterations = 3000;
    long burn_in = 1500;
    long thin = 5;
    std::uint64_t seed = 1;
    double scan_fraction = 0.0;
    std::string ident = "none";
    Eigen::Index ident_equation = 0;
    int chains = 1;
    double elicit_v = 1.0;
    double elicit_av = 0.10;
    bool explicit_scales = false;
    double b_tau = 0.0;
    double b_sigma = 0.0;
    double a_tau = 3.0, a_sigma = 0.5, a_lambda = 3.0, alpha = 1.0;
    double b_lambda = 0.0;  // 0: a_lambda^{1/(2M)}
    double sigma_mu_sq = 100.0;
    double a_noise = 0.01, b_noise = 0.01;
};

void write_fit_outputs(const std::string& dir, const PosteriorDraws& draws) {
    fs::create_directories(dir);
    save_draws(dir + "/draws.bin", dir + "/draws.json", draws);
    write_summary_csv(dir + "/summary.csv", draws);
    write_trace_csv(dir + "/trace.csv", draws);
    write_acf_csv(dir + "/acf.csv", draws);
    write_states_csv(dir + "/states.csv", draws);
    write_outcome_mse_csv(dir + "/outcome_mse.csv", draws);
    if (draws.num_regimes() >= 2) write_scatter_csv(dir + "/scatter.csv", draws, 0.90);
}

int run_fit(const FitOptions& opt) {
    Dataset data = load_dataset_dir(opt.data_dir);
    const Eigen::Index modes = static_cast<Eigen::Index>(data.covariate_shape(0).size());

    Hyperparameters hyper;
    hyper.alpha = opt.alpha;
    hyper.a_tau = opt.a_tau;
    hyper.a_sigma = opt.a_sigma;
    hyper.a_lambda = opt.a_lambda;
    hyper.b_lambda = opt.b_lambda > 0.0
                         ? opt.b_lambda
                         : std::pow(opt.a_lambda, 1.0 / (2.0 * static_cast<double>(modes)));
    hyper.rank = opt.rank;
    hyper.modes = modes;
    hyper.regimes = opt.regimes;
    hyper.nu = Eigen::VectorXd::Ones(opt.regimes);
    hyper.sigma_mu_sq = opt.sigma_mu_sq;
    hyper.a_noise = opt.a_noise;
    hyper.b_noise = opt.b_noise;
    if (opt.explicit_scales) {
        hyper.b_tau = opt.b_tau;
        hyper.b_sigma = opt.b_sigma;
    } else {
        if (modes != 2)
            throw std::runtime_error(
                "elicitation covers matrix coefficients only; pass --b-tau/--b-sigma for higher orders");
        const ElicitedScales scales = elicit({opt.elicit_v, opt.elicit_av}, hyper);
        hyper.b_tau = scales.b_tau;
        hyper.b_sigma = scales.b_sigma;
        std::cout << "elicited scales for V*=" << opt.elicit_v << ", AV*=" << opt.elicit_av
                  << ": b_tau=" << format_double(hyper.b_tau)
                  << " b_sigma=" << format_double(hyper.b_sigma) << "\n";
    }
    hyper.validate();

    ChainConfig cfg;
    cfg.iterations = opt.iterations;
    cfg.burn_in = opt.burn_in;
    cfg.thin = opt.thin;
    cfg.seed = opt.seed;
    cfg.scan_fraction = opt.scan_fraction;
    cfg.ident_rule = ident_rule_from_string(opt.ident);
    cfg.ident_equation = opt.ident_equation;
    cfg.validate();

    if (opt.chains <= 1) {
        const PosteriorDraws draws = run_chain(data, hyper, cfg);
        write_fit_outputs(opt.out_dir, draws);
    } else {
        const std::vector<PosteriorDraws> all = run_chains(data, hyper, cfg, opt.chains);
        for (std::size_t c = 0; c < all.size(); ++c)
            write_fit_outputs(opt.out_dir + "/chain" + std::to_string(c), all[c]);
    }
    std::cout << "fit complete: " << opt.out_dir << "\n";
    return 0;
}

int run_diagnose(const std::string& draws_dir, const std::string& truth_dir,
                 const std::string& out_path) {
    const PosteriorDraws draws = load_draws(draws_dir + "/draws.bin", draws_dir + "/draws.json");
    nlohmann::json report;
    report["draws"] = draws.count();
    report["regimes"] = draws.num_regimes();
    report["equations"] = draws.num_equations();
    const auto& mse_traj = draws.outcome_mse();
    if (!mse_traj.empty()) {
        report["outcome_mse_final"] = mse_traj.back();
        if (mse_traj.size() >= 100) report["outcome_mse_iter100"] = mse_traj[99];
        if (mse_traj.size() >= 10) report["outcome_mse_iter10"] = mse_traj[9];
    }
    for (Eigen::Index l = 0; l < draws.num_equations(); ++l)
        for (Eigen::Index k = 0; k < draws.num_regimes(); ++k) {
            const std::string tag = "eq" + std::to_string(l) + ".regime" + std::to_string(k);
            report["mu_mean"][tag] = draws.mu_mean(l, k);
            report["noise_var_mean"][tag] = draws.noise_var_mean(l, k);
            const auto a = acf(draws.mu_draws(l, k), {1, 5, 10});
            if (a.has_value()) report["acf_mu"][tag] = *a;
        }

    if (!truth_dir.empty()) {
        const SimTruth truth = read_truth(truth_dir);
        const StateScore score =
            truth.path.size() > 0
                ? state_accuracy(draws.smoothed_mean(), truth.path)
                : StateScore{};
        if (truth.path.size() > 0) {
            report["state_hit_rate"] = score.hit_rate;
            report["state_mse"] = score.mse;
        }
        for (Eigen::Index l = 0; l < draws.num_equations(); ++l) {
            double total = 0.0;
            for (Eigen::Index k = 0; k < draws.num_regimes(); ++k) {
                // Compare against the truth regime mapped to this label.
                const Eigen::Index truth_k =
                    truth.path.size() > 0
                        ? static_cast<Eigen::Index>(std::distance(
                              score.permutation.begin(),
                              std::find(score.permutation.begin(), score.permutation.end(), k)))
                        : k;
                const double m = mse_coeff(draws.coeff_mean(l, k),
                                           truth.coefficients[static_cast<std::size_t>(truth_k)]);
                report["coeff_mse"]["eq" + std::to_string(l) + ".regime" + std::to_string(k)] = m;
                total += m;
            }
            report["coeff_mse"]["eq" + std::to_string(l) + ".all"] =
                total / static_cast<double>(draws.num_regimes());
        }
    }
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    out << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Markov-switching multiple-equation tensor regression"};
    app.require_subcommand(1);

    // --config is pre-scanned so file values become defaults and explicit
    // flags override them.
    std::map<std::string, std::string> cfg;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") cfg = parse_config_file(argv[i + 1]);
    std::string config_path;
    app.add_option("--config", config_path, "key=value config file with [sections]");

    // simulate ----------------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "generate a benchmark dataset with ground truth");
    std::string sim_setting = cfg_get(cfg, "sim.setting", "s1");
    std::string sim_cov = cfg_get(cfg, "sim.cov", "iid");
    double sim_rho = std::stod(cfg_get(cfg, "sim.rho", "0.5"));
    long sim_T = std::stol(cfg_get(cfg, "sim.T", "0"));
    bool sim_noisy = cfg_get(cfg, "sim.noisy", "0") == "1";
    std::uint64_t sim_seed = std::stoull(cfg_get(cfg, "sim.seed", "1"));
    std::string sim_out = cfg_get(cfg, "io.out_dir", default_out_dir());
    sim->add_option("--setting", sim_setting, "s1|s2|s3|s4|s1ms|s2ms");
    sim->add_option("--cov", sim_cov, "iid|ar1");
    sim->add_option("--rho", sim_rho, "AR(1) coefficient");
    sim->add_option("--T", sim_T, "sample size (0: setting default)");
    sim->add_flag("--noisy", sim_noisy, "contaminate true coefficients with noise");
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--out", sim_out, "output directory");

    // fit ---------------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "run the Gibbs sampler on a dataset");
    FitOptions fopt;
    fopt.data_dir = cfg_get(cfg, "io.data_dir", ".");
    fopt.out_dir = cfg_get(cfg, "io.out_dir", default_out_dir());
    fopt.regimes = std::stol(cfg_get(cfg, "model.K", "1"));
    fopt.rank = std::stol(cfg_get(cfg, "model.D", "3"));
    fopt.iterations = std::stol(cfg_get(cfg, "chain.iterations", "3000"));
    fopt.burn_in = std::stol(cfg_get(cfg, "chain.burn_in", "1500"));
    fopt.thin = std::stol(cfg_get(cfg, "chain.thin", "5"));
    fopt.seed = std::stoull(cfg_get(cfg, "chain.seed", "1"));
    fopt.scan_fraction = std::stod(cfg_get(cfg, "chain.scan_fraction", "0"));
    fopt.ident = cfg_get(cfg, "chain.ident_rule", "none");
    fopt.chains = std::stoi(cfg_get(cfg, "chain.chains", "1"));
    fit->add_option("--data", fopt.data_dir, "dataset directory (responses.csv + covariates)");
    fit->add_option("--out", fopt.out_dir, "output directory");
    fit->add_option("--K", fopt.regimes, "number of regimes");
    fit->add_option("--D", fopt.rank, "PARAFAC rank");
    fit->add_option("--iters", fopt.iterations, "Gibbs iterations");
    fit->add_option("--burnin", fopt.burn_in, "burn-in iterations");
    fit->add_option("--thin", fopt.thin, "thinning stride");
    fit->add_option("--seed", fopt.seed, "RNG seed (controls all randomness)");
    fit->add_option("--scan-fraction", fopt.scan_fraction,
                    "fraction of factor blocks per sweep (<=0: one block)");
    fit->add_option("--ident", fopt.ident, "trace-order|frobenius-order|none");
    fit->add_option("--ident-equation", fopt.ident_equation, "equation driving the ordering");
    fit->add_option("--chains", fopt.chains, "independent parallel chains");
    fit->add_option("--elicit-v", fopt.elicit_v, "target prior entry variance V*");
    fit->add_option("--elicit-av", fopt.elicit_av, "target relative additional variance AV*");
    auto* btau_opt = fit->add_option("--b-tau", fopt.b_tau, "explicit b_tau (skips elicitation)");
    auto* bsig_opt = fit->add_option("--b-sigma", fopt.b_sigma, "explicit b_sigma");
    fit->add_option("--a-tau", fopt.a_tau);
    fit->add_option("--a-sigma", fopt.a_sigma);
    fit->add_option("--a-lambda", fopt.a_lambda);
    fit->add_option("--b-lambda", fopt.b_lambda, "0: a_lambda^(1/(2M))");
    fit->add_option("--alpha", fopt.alpha);
    fit->add_option("--sigma-mu-sq", fopt.sigma_mu_sq);
    fit->add_option("--a-noise", fopt.a_noise);
    fit->add_option("--b-noise", fopt.b_noise);

    // diagnose ------------------------------------------------------------------
    auto* diag = app.add_subcommand("diagnose", "summarise a stored chain (optionally vs truth)");
    std::string diag_draws = ".", diag_truth, diag_out;
    diag->add_option("--draws", diag_draws, "directory holding draws.bin/draws.json");
    diag->add_option("--truth", diag_truth, "truth directory from `simulate`");
    diag->add_option("--out", diag_out, "report path (default <draws>/report.json)");

    // baseline -------------------------------------------------------------------
    auto* base = app.add_subcommand("baseline", "OLS and LASSO on the vectorised covariates");
    std::string base_data = cfg_get(cfg, "io.data_dir", ".");
    std::string base_out = cfg_get(cfg, "io.out_dir", default_out_dir());
    double base_lambda = -1.0;
    double base_train_frac = 0.8;
    std::string base_horizons = "1,5";
    Eigen::Index base_equation = 0;
    std::uint64_t base_seed = 1;
    base->add_option("--data", base_data, "dataset directory");
    base->add_option("--out", base_out, "output directory");
    base->add_option("--lambda", base_lambda, "LASSO penalty (<0: 5-fold CV)");
    base->add_option("--train-frac", base_train_frac, "training fraction for the holdout split");
    base->add_option("--horizons", base_horizons, "comma-separated forecast horizons");
    base->add_option("--equation", base_equation, "scored equation");
    base->add_option("--seed", base_seed, "RNG seed for CV folds");

    // forecast --------------------------------------------------------------------
    auto* fc = app.add_subcommand("forecast", "h-step forecasts from a fitted chain");
    std::string fc_data = ".", fc_draws = ".", fc_out = default_out_dir();
    std::string fc_horizons = "1,5";
    double fc_train_frac = 0.8;
    Eigen::Index fc_equation = 0;
    fc->add_option("--data", fc_data, "dataset directory");
    fc->add_option("--draws", fc_draws, "fit output directory");
    fc->add_option("--out", fc_out, "output directory");
    fc->add_option("--horizons", fc_horizons, "comma-separated horizons");
    fc->add_option("--train-frac", fc_train_frac, "fraction of the sample treated as training");
    fc->add_option("--equation", fc_equation, "forecast equation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    auto parse_horizons = [](const std::string& spec) {
        std::vector<int> hs;
        std::stringstream ss(spec);
        std::string tok;
        while (std::getline(ss, tok, ',')) hs.push_back(std::stoi(tok));
        return hs;
    };

    try {
        if (sim->parsed()) {
            SimSetting setting = named_setting(sim_setting);
            if (sim_T > 0) setting.num_obs = sim_T;
            setting.noisy = sim_noisy;
            setting.covariate_kind = sim_cov == "ar1" ? CovariateKind::Ar1 : CovariateKind::Iid;
            setting.rho = sim_rho;
            Rng rng(sim_seed, 0);
            auto [data, truth] = gen_dataset(setting, rng);
            truth.seed = sim_seed;
            fs::create_directories(sim_out);
            write_responses_csv(sim_out + "/responses.csv", data.responses());
            std::vector<Tensor> xs;
            for (Eigen::Index t = 0; t < data.num_obs(); ++t) xs.push_back(data.covariate(0, t));
            write_covariates_csv(sim_out + "/covariates.csv", xs);
            write_truth(sim_out + "/truth", truth);
            std::cout << "simulated " << sim_setting << " dataset: T=" << data.num_obs()
                      << " shape=" << setting.rows << "x" << setting.cols << " -> " << sim_out
                      << "\n";
            return 0;
        }
        if (fit->parsed()) {
            fopt.explicit_scales = btau_opt->count() > 0 && bsig_opt->count() > 0;
            return run_fit(fopt);
        }
        if (diag->parsed()) {
            if (diag_out.empty()) diag_out = diag_draws + "/report.json";
            return run_diagnose(diag_draws, diag_truth, diag_out);
        }
        if (base->parsed()) {
            Dataset data = load_dataset_dir(base_data);
            const Eigen::Index train_obs =
                std::max<Eigen::Index>(1, static_cast<Eigen::Index>(base_train_frac *
                                                                    static_cast<double>(data.num_obs())));
            const std::vector<int> horizons = parse_horizons(base_horizons);
            const Dataset train = data.head(train_obs);
            const Eigen::MatrixXd design = vectorized_design(train, base_equation);
            const Eigen::VectorXd y = train.responses().col(base_equation);

            std::vector<FitReport> reports;
            const Eigen::VectorXd ols = fit_ols(y, design);
            reports.push_back(forecast_linear("ols", ols, data, base_equation, train_obs, horizons));
            Rng rng(base_seed, 0);
            const double lambda =
                base_lambda >= 0.0 ? base_lambda : lasso_cv_lambda(y, design, 5, 40, rng);
            const LassoFit lasso = fit_lasso(y, design, lambda);
            FitReport lp =
                forecast_linear("lasso", lasso.beta, data, base_equation, train_obs, horizons);
            reports.push_back(lp);
            fs::create_directories(base_out);
            write_fit_reports_csv(base_out + "/baseline_report.csv", reports);
            std::cout << "baseline report (lasso lambda=" << format_double(lambda) << ") -> "
                      << base_out << "/baseline_report.csv\n";
            return 0;
        }
        if (fc->parsed()) {
            Dataset data = load_dataset_dir(fc_data);
            const PosteriorDraws draws = load_draws(fc_draws + "/draws.bin", fc_draws + "/draws.json");
            const PosteriorMeanParams pm = PosteriorMeanParams::from_draws(draws);
            const Eigen::Index train_obs = pm.smoothed.rows();
            if (train_obs > data.num_obs())
                throw std::runtime_error("fit covers more observations than the dataset");
            (void)fc_train_frac;
            const std::vector<int> horizons = parse_horizons(fc_horizons);
            const FitReport report =
                forecast_msmetr(pm, data, fc_equation, train_obs, horizons);
            fs::create_directories(fc_out);
            write_fit_reports_csv(fc_out + "/forecast_report.csv", {report});
            std::cout << "forecast report -> " << fc_out << "/forecast_report.csv\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
