#pragma once

#include <Eigen/Dense>

#include <string>

namespace spikedcorr {

// Population side of the spiked correlation model: a signal vector xi in R^m
// with covariance Sigma, its correlation matrix and eigenstructure, and a
// sampling recipe for xi. The noise block (p i.i.d. unit-variance
// coordinates) is appended by FullModel.

enum class InnovationFamily { Gaussian, Rademacher, Uniform, TwoPointAsymmetric };

// Excess kurtosis kappa4 of a unit-variance innovation from the family.
double excess_kurtosis(InnovationFamily family, double two_point_p = 0.5);

const char* family_name(InnovationFamily f);
InnovationFamily family_from_name(const std::string& s);

struct DistributionSpec {
  enum class Kind { Gaussian, LinearMixing };

  Kind kind = Kind::Gaussian;
  // LinearMixing: xi = mixing * z with z i.i.d. from `family`; requires
  // mixing * mixing^T = Sigma. Square m x m (zero columns allowed, so
  // rank-deficient models are expressible).
  Eigen::MatrixXd mixing;
  InnovationFamily family = InnovationFamily::Gaussian;
  double two_point_p = 0.5;
  double kurtosis = 0.0;  // excess kurtosis of the innovations

  static DistributionSpec gaussian();
  static DistributionSpec linear_mixing(Eigen::MatrixXd A, InnovationFamily family,
                                        double two_point_p = 0.5);
  // Convenience: mixing = symmetric square root of Sigma.
  static DistributionSpec linear_mixing_sqrt(const Eigen::MatrixXd& Sigma,
                                             InnovationFamily family,
                                             double two_point_p = 0.5);
};

struct SpikedModel {
  int m = 0;
  Eigen::MatrixXd sigma;      // covariance of xi; PSD (SPD unless singular)
  Eigen::VectorXd sigma_sq;   // diag(sigma)
  Eigen::MatrixXd gamma_mat;  // correlation matrix, unit diagonal
  Eigen::MatrixXd P;          // eigenvectors of gamma_mat as columns
  Eigen::VectorXd L;          // eigenvalues, descending
  DistributionSpec dist;
  bool singular = false;

  // Spike indices are 1-based everywhere in the public API.
  double ell(int nu) const;
  Eigen::VectorXd p_vec(int nu) const;
  // Simple iff separated from every other eigenvalue by more than 1e-8 * l_1.
  bool is_simple(int nu) const;
  // True when xi is exactly Gaussian (Gaussian kind, or a linear mixing of
  // Gaussian innovations).
  bool is_gaussian() const;
};

struct FullModel {
  SpikedModel spiked;
  int p = 0;                    // noise dimension
  InnovationFamily noise_family = InnovationFamily::Gaussian;
  double noise_two_point_p = 0.5;
};

SpikedModel build_model(const Eigen::MatrixXd& Sigma, DistributionSpec dist);

// Named constructions used by the worked examples and the experiment suites.
Eigen::MatrixXd constant_correlation_matrix(int m, double r);
SpikedModel constant_correlation_model(int m, double r,
                                       DistributionSpec dist = DistributionSpec::gaussian());
SpikedModel two_group_model(int m, double r,
                            InnovationFamily family = InnovationFamily::Gaussian);
SpikedModel ar1_block_model(int block, double r, int total_m,
                            DistributionSpec dist = DistributionSpec::gaussian());

// JSON round trip and the CLI's compact model syntax, e.g.
// "const-corr:m=10,r=0.9", "two-group:m=4,r=0.5", "ar1:block=10,r=0.95,m=10",
// optionally with ",dist=rademacher|uniform|gaussian|twopoint,tp=0.2".
std::string model_to_json(const SpikedModel& model);
SpikedModel model_from_json(const std::string& text);
SpikedModel model_from_string(const std::string& spec);

} // namespace spikedcorr
