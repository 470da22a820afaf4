#pragma once

#include <map>
#include <string>
#include <vector>

#include "msmetr/baselines.hpp"
#include "msmetr/model.hpp"
#include "msmetr/sampler.hpp"
#include "msmetr/simulation.hpp"
#include "msmetr/tensor.hpp"

namespace msmetr {

/// Tensor CSV: a one-line header `# shape: p1,p2,...,pM` followed by the flat
/// data in canonical order, one value per line at 17 significant digits
/// (bit-exact round trip).
void write_tensor_csv(const std::string& path, const Tensor& tensor);
Tensor read_tensor_csv(const std::string& path);

/// Covariate sequence CSV: the shape header, then one row of flat values per
/// observation.
void write_covariates_csv(const std::string& path, const std::vector<Tensor>& covariates);
std::vector<Tensor> read_covariates_csv(const std::string& path);

/// Responses CSV: T rows by N comma-separated columns.
void write_responses_csv(const std::string& path, const Eigen::MatrixXd& responses);
Eigen::MatrixXd read_responses_csv(const std::string& path);

/// Load a dataset from a responses file and one covariate file per equation
/// (one shared file is aliased across all equations).
Dataset load_dataset(const std::string& responses_path,
                     const std::vector<std::string>& covariate_paths);

void write_truth(const std::string& dir, const SimTruth& truth);
SimTruth read_truth(const std::string& dir);

/// Posterior draws: append-only binary records (doubles) plus a JSON sidecar
/// describing the record layout.
void save_draws(const std::string& bin_path, const std::string& json_path,
                const PosteriorDraws& draws);
PosteriorDraws load_draws(const std::string& bin_path, const std::string& json_path);

/// Posterior means and 5/50/95% quantiles of every reported scalar, one row
/// per parameter.
void write_summary_csv(const std::string& path, const PosteriorDraws& draws);

/// Plot-ready exports: traces, ACF bars, smoothed state probabilities, and
/// the regime-pair scatter with HPD ellipses.
void write_trace_csv(const std::string& path, const PosteriorDraws& draws);
void write_acf_csv(const std::string& path, const PosteriorDraws& draws);
void write_states_csv(const std::string& path, const PosteriorDraws& draws);
void write_scatter_csv(const std::string& path, const PosteriorDraws& draws, double level);
void write_outcome_mse_csv(const std::string& path, const PosteriorDraws& draws);

void write_fit_reports_csv(const std::string& path, const std::vector<FitReport>& reports);

/// Flat key-value config with `[section]` headers; keys are returned as
/// "section.key". Lines starting with '#' are comments.
std::map<std::string, std::string> parse_config_file(const std::string& path);

std::string format_double(double value);

}  // namespace msmetr
