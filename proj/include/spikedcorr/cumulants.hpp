#pragma once

#include "spikedcorr/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace spikedcorr {

// Dense symmetric 4-index tensors over the standardized signal coordinates
// x_i = xi_i / sigma_i. Kept dense; the signal dimension is capped at 64.
struct Tensor4 {
  int m = 0;
  std::vector<double> v;

  Tensor4() = default;
  explicit Tensor4(int dim);

  double& at(int i, int j, int k, int l) {
    return v[static_cast<size_t>(((i * m + j) * m + k) * m + l)];
  }
  double at(int i, int j, int k, int l) const {
    return v[static_cast<size_t>(((i * m + j) * m + k) * m + l)];
  }
  double operator()(int i, int j, int k, int l) const { return at(i, j, k, l); }

  double max_abs_diff(const Tensor4& other) const;
  static constexpr int kMaxDim = 64;
};

// mu_{i j i' j'} = E[x_i x_j x_i' x_j'] under the model's sampling recipe.
Tensor4 fourth_moment_tensor(const SpikedModel& model);

// Fourth cumulant: kappa_{i j i' j'} = mu - k_ij k_i'j' - k_ii' k_jj' - k_ij' k_ji'
// with k the correlation matrix. Identically zero for Gaussian models.
Tensor4 kappa_tensor(const SpikedModel& model);

// Correlation-adjustment tensor. With chi_ij = x_i x_j and
// psi_ij = k_ij (x_i^2 + x_j^2) / 2,
//   kcheck_{ij i'j'} = Cov(psi_ij, psi_i'j') - Cov(psi_ij, chi_i'j')
//                      - Cov(chi_ij, psi_i'j'),
// expanded in terms of k and mu.
Tensor4 kcheck_from_moments(const Eigen::MatrixXd& kappa2, const Tensor4& mu);
Tensor4 kcheck_tensor(const SpikedModel& model);
// Same quantity for Gaussian models, written purely in pair correlations.
Tensor4 kcheck_gaussian_closed_form(const Eigen::MatrixXd& kappa2);

struct EmpiricalCumulants {
  Eigen::MatrixXd kappa2;  // sample pair moments of the standardized coordinates
  Tensor4 mu;
  Tensor4 kappa;
  Tensor4 kcheck;
  Tensor4 se_mu;     // batch-based standard errors, entrywise
  Tensor4 se_kappa;
  Tensor4 se_kcheck;
  bool oracle_mode = false;  // population scale/correlation supplied
  int batches = 0;
};

// Estimates mu, kappa, kcheck from draws of xi (one row per observation).
// Standardization uses the population scales when supplied (oracle mode),
// otherwise the sample root mean squares. Standard errors come from 20
// contiguous batches. Requires n >= 100 and non-degenerate columns.
EmpiricalCumulants empirical_cumulants(const Eigen::MatrixXd& samples);
EmpiricalCumulants empirical_cumulants(const Eigen::MatrixXd& samples,
                                       const Eigen::VectorXd& population_sigma_sq,
                                       const Eigen::MatrixXd& population_kappa2);

// Contraction [P^{mu mu' nu nu'}, A] = sum A_{i j i' j'} P_{i mu} P_{j mu'}
// P_{i' nu} P_{j' nu'}. Indices are 1-based. `contract` factors the sum into
// four passes; `contract_reference` is the direct quadruple loop kept as a
// cross-check.
double contract(const Eigen::MatrixXd& P, int mu, int mup, int nu, int nup,
                const Tensor4& A);
double contract_reference(const Eigen::MatrixXd& P, int mu, int mup, int nu, int nup,
                          const Tensor4& A);
// [P^nu, A]: all four slots carry the same eigenvector.
double contract_spike(const Eigen::MatrixXd& P, int nu, const Tensor4& A);

} // namespace spikedcorr
