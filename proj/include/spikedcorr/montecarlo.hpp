#pragma once

#include "spikedcorr/asymptotics.hpp"
#include "spikedcorr/model.hpp"
#include "spikedcorr/rng.hpp"
#include "spikedcorr/sampling.hpp"

#include "json.hpp"

#include <string>
#include <utility>
#include <vector>

namespace spikedcorr {

// Replicated experiments that compare sample-spike statistics against the
// limit predictions. Reports are bitwise deterministic functions of the
// configuration: replicates own fixed substreams and are reduced in index
// order, so the thread count changes wall time only.

struct ExperimentConfig {
  FullModel model;
  int n = 0;
  int replicates = 0;
  RngSpec rng{20240817};
  std::vector<int> nus{1};
  // 0 picks up SPIKEDCORR_THREADS (default 1).
  int threads = 0;
  // Relative tolerance for variance targets; 0 falls back to four standard
  // errors of the sample variance.
  double var_rel_tol = 0.0;
  // Pass bound for the correlation/covariance variance ratio target.
  double ratio_threshold = 1.0;
  // Also push the same data through the covariance pathway (requires unit
  // population variances, i.e. Sigma equal to its correlation matrix).
  bool cov_pathway = false;
  // Keep per-replicate statistics in the report for plotting.
  bool store_samples = true;
};

struct McTargetResult {
  std::string name;
  double empirical = 0.0;
  double theory = 0.0;
  double se = 0.0;          // standard error of `empirical` when meaningful
  std::string tol_kind;     // "abs" | "rel" | "4se" | "bound" | "flag"
  double tol = 0.0;
  bool pass = true;
  std::vector<std::string> flags;
};

struct McReport {
  std::string kind;
  nlohmann::json config;  // echo of everything that affects the numbers
  std::vector<McTargetResult> targets;
  bool pass = true;
  nlohmann::json extra;

  std::string to_json(int indent = 2) const;
  std::string to_csv() const;
  const McTargetResult* find(const std::string& name) const;
};

// sqrt(n) (l_hat - rho_n) for each requested spike, against N(0, var_n).
// Targets per spike and pathway: variance, mean, KS distance (flag only),
// plus the corr/cov variance ratio when the covariance pathway runs.
McReport run_eigenvalue_clt(const ExperimentConfig& cfg);

// sqrt(n) (P^T a - e_nu) for the first requested spike. `pairs` lists
// 1-based coordinate pairs (k, l): variances on the diagonal, covariances
// off it. Adds the collapsing nu-coordinate and the squared-projection
// targets.
McReport run_eigenvector_clt(const ExperimentConfig& cfg,
                             const std::vector<std::pair<int, int>>& pairs);

// Subcritical spikes: tracks mean top eigenvalue and squared projection over
// a grid of sample sizes (noise dimension scaled to keep p/n fixed) and
// checks convergence to the bulk edge and to zero at the largest size.
McReport run_subcritical(const ExperimentConfig& cfg, const std::vector<int>& n_grid);

// Histogram companion of run_eigenvalue_clt for the correlation-vs-covariance
// comparison; requires the covariance pathway.
McReport run_cov_vs_corr(const ExperimentConfig& cfg);

// Fluctuations of the signal-block resolvent evaluated at the predicted
// spike: entry covariances of sqrt(n) (K - tr(B_n)/n Gamma) against the
// limiting W covariance, entry means against zero, and a single replicate of
// size limit_check_n for the spectral-norm limit check.
McReport run_k_diagnostic(const ExperimentConfig& cfg, int limit_check_n);

// Statistics shared by the runners and their tests.
struct MomentSummary {
  double mean = 0.0;
  double var = 0.0;      // unbiased
  double se_mean = 0.0;
  double se_var = 0.0;   // from the empirical fourth moment
};
MomentSummary moment_summary(const std::vector<double>& xs);
double sample_covariance_scalar(const std::vector<double>& a, const std::vector<double>& b,
                                double* se = nullptr);
// Kolmogorov-Smirnov distance against a centered normal with the given sigma.
double ks_distance_gaussian(std::vector<double> samples, double sigma);
int resolve_threads(int requested);

} // namespace spikedcorr
