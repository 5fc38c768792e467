#pragma once

#include "spikedcorr/cumulants.hpp"
#include "spikedcorr/model.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace spikedcorr {

// Limit predictions for supercritical sample spikes of correlation matrices
// in the p/n -> gamma regime. All spike indices are 1-based, and every entry
// point below refuses spikes within 1e-6 of the phase transition 1 + sqrt(gamma)
// and warns (via the near_critical flag) within 0.05 of it.

struct EigenvaluePrediction {
  int nu = 0;
  double ell = 0.0;
  double gamma = 0.0;
  double gamma_n = 0.0;
  double rho_limit = 0.0;       // almost-sure location of the sample spike
  double rho_n = 0.0;           // same map evaluated at gamma_n (CLT centering)
  double rho_dot_limit = 0.0;
  double rho_dot_n = 0.0;
  // Variance pieces: base = 2 rho_dot l^2 (Gaussian covariance part),
  // kurtosis = rho_dot^2 [P^nu, kappa], adjust = rho_dot^2 [P^nu, kcheck].
  double term_base = 0.0, term_kurtosis = 0.0, term_adjust = 0.0;
  double term_base_n = 0.0, term_kurtosis_n = 0.0, term_adjust_n = 0.0;
  double var_limit = 0.0;  // sigma-tilde^2 at gamma
  double var_n = 0.0;      // sigma-tilde^2 at gamma_n
  bool near_critical = false;
};

EigenvaluePrediction eigenvalue_prediction(const SpikedModel& model, int nu, double gamma);
EigenvaluePrediction eigenvalue_prediction(const SpikedModel& model, int nu, double gamma,
                                           double gamma_n);

// Closed form of var_limit for Gaussian models:
// 2 l^2 rho_dot [1 - rho_dot (2 l sum_i p_i^4 - sum_ij (p_i k_ij p_j)^2)].
double eigenvalue_variance_gaussian(const SpikedModel& model, int nu, double gamma);

// First-order size of the centering error when the CLT is centered at
// rho(gamma) instead of rho(gamma_n): sqrt(n) (gamma_n - gamma) l / (l - 1).
double centering_shift(double ell, double gamma, double gamma_n, long long n);

// Gaussian-model comparison of the correlation-spike variance against the
// plain covariance value 2 rho_dot l^2. delta > 0 means the correlation
// pathway has strictly smaller variance.
struct VarianceReduction {
  double delta = 0.0;      // 2 l sum p^4 - sum_ij (p_i k_ij p_j)^2
  bool reduced = false;    // delta > 0
  bool supercritical = false;
  double var_plain = 0.0;  // 2 rho_dot l^2 (NaN when subcritical)
  double var_total = 0.0;  // reduced variance (NaN when subcritical)
  // Sufficient conditions, any one of which forces delta > 0.
  bool entrywise_nonneg = false;  // k and p_nu entrywise nonnegative (up to sign)
  bool quartic_mass = false;      // 2 l sum p^4 > 1
  bool dominant_pair = false;     // 2 l_nu > l_1^2
  bool guaranteed = false;        // at least one condition holds
};

VarianceReduction variance_reduction_report(const SpikedModel& model, int nu, double gamma);

struct EigenvectorPrediction {
  int nu = 0;
  double proj_sq_limit = 0.0;   // squared cosine against the population spike
  Eigen::MatrixXd D;            // diag((l_nu - l_k)^-1), zero at slot nu
  Eigen::MatrixXd Sigma_tilde;  // unscaled fluctuation covariance
  Eigen::MatrixXd Sigma;        // D Sigma_tilde D, eigenbasis coordinates
  Eigen::MatrixXd Sigma_coord;  // P Sigma P^T, original coordinates
  bool near_critical = false;
};

EigenvectorPrediction eigenvector_prediction(const SpikedModel& model, int nu, double gamma);

// Gaussian closed forms of Sigma_nu: one assembled from the matrices
// Z = P^T diag(p) (k o k) diag(p) P and Y = P^T diag(p)^2 P, one written
// entry by entry. Both equal the tensor pathway.
Eigen::MatrixXd eigenvector_covariance_gaussian(const SpikedModel& model, int nu, double gamma);
Eigen::MatrixXd eigenvector_covariance_gaussian_entrywise(const SpikedModel& model, int nu,
                                                          double gamma);

// Benchmark: the same covariance when the sample object is the covariance
// matrix of a unit-variance Gaussian model. Diagonal in the eigenbasis.
Eigen::MatrixXd eigenvector_covariance_cov_pathway(const SpikedModel& model, int nu,
                                                   double gamma);

struct SubcriticalLimits {
  double eigenvalue_limit = 0.0;  // (1 + sqrt(gamma))^2
  double projection_limit = 0.0;  // 0
};
SubcriticalLimits subcritical_limits(double gamma);

// Scalars of the bilinear-form CLT: omega = phi = (rho/l)^2, theta = omega/rho_dot.
struct CltParams {
  double theta = 0.0;
  double omega = 0.0;
  double phi = 0.0;
};
CltParams clt_params(double ell, double gamma);

// Covariance matrix of the limiting Gaussian for a family of normalized
// bilinear forms: D = theta J + omega (Czz - J) + phi (Cww - Cwz - Cwz^T)
// with J = Cxy o Cyx + Cxx o Cyy (o = entrywise product).
Eigen::MatrixXd bilinear_clt_covariance(const Eigen::MatrixXd& Cxx, const Eigen::MatrixXd& Cxy,
                                        const Eigen::MatrixXd& Cyx, const Eigen::MatrixXd& Cyy,
                                        const Eigen::MatrixXd& Czz, const Eigen::MatrixXd& Cww,
                                        const Eigen::MatrixXd& Cwz, const CltParams& params);

// Entry covariances of the limiting W matrix observed at the spike location:
// Cov[W_ij, W_i'j'] = theta (k_ij' k_ji' + k_ii' k_jj') + omega (kappa + kcheck).
double wmatrix_cov_entry(const SpikedModel& model, int nu, double gamma, int i, int j,
                         int i2, int j2);
// Same thing packed over the pairs (i <= j) listed by sym_pairs.
Eigen::MatrixXd wmatrix_covariance(const SpikedModel& model, int nu, double gamma);
std::vector<std::pair<int, int>> sym_pairs(int m);

} // namespace spikedcorr
