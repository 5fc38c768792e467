#pragma once

#include "spikedcorr/model.hpp"
#include "spikedcorr/rng.hpp"

#include <Eigen/Dense>

#include <vector>

namespace spikedcorr {

// Observations are stored one per column: X is (m+p) x n with the signal
// block in the first m rows. Sample moments are uncentered; the model has
// mean zero by construction.

struct DataMatrix {
  Eigen::MatrixXd X;
  int m = 0;
  int p = 0;
  int n() const { return static_cast<int>(X.cols()); }
};

// n draws of the signal vector only, one observation per row.
Eigen::MatrixXd sample_signal(const SpikedModel& model, int n, const RngSpec& rng,
                              std::uint64_t replicate);

// Full data matrix: per observation the m signal innovations are drawn first,
// then the p noise coordinates.
DataMatrix generate(const FullModel& model, int n, const RngSpec& rng,
                    std::uint64_t replicate);

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X);
Eigen::MatrixXd sample_covariance(const DataMatrix& data);
// Unit diagonal exactly; rows with zero norm raise degenerate_data.
Eigen::MatrixXd sample_correlation(const Eigen::MatrixXd& X);
Eigen::MatrixXd sample_correlation(const DataMatrix& data);

enum class SpectrumKind { Covariance, Correlation };

struct SpikeObservation {
  int nu = 0;
  double ell_hat = 0.0;
  // Inner product of the full sample eigenvector with [p_nu; 0], after the
  // sign flip that makes it nonnegative.
  double proj = 0.0;
  Eigen::VectorXd a;         // normalized signal head of the eigenvector
  Eigen::VectorXd proj_vec;  // P^T a
};

struct SampleSpectrum {
  SpectrumKind kind = SpectrumKind::Correlation;
  // Descending; the full spectrum when a dense solve ran, otherwise the
  // leading block computed by the iterative path.
  std::vector<double> eigenvalues;
  std::vector<SpikeObservation> spikes;
  double lambda_max_signal = 0.0;  // top eigenvalue of the signal-block submatrix
  bool near_degenerate = false;    // requested sample spikes nearly collide
};

// Spike readout from an already-formed symmetric matrix. Dense solve up to
// dimension 2000, iterative above.
SampleSpectrum extract_spikes(const Eigen::MatrixXd& R, const SpikedModel& model,
                              const std::vector<int>& nus, SpectrumKind kind);

// Same readout driven by the data matrix without forming the (m+p)^2 matrix:
// dense in whichever of m+p and n is small, otherwise Lanczos on the implicit
// operator with full reorthogonalization. The rng pair seeds the start vector.
SampleSpectrum extract_spikes_data(const DataMatrix& data, const SpikedModel& model,
                                   const std::vector<int>& nus, SpectrumKind kind,
                                   const RngSpec& rng, std::uint64_t replicate);

// Signal-block resolvent K(t) = R11 + R12 (t I - R22)^-1 R21 and the trace of
// the companion weight B_n(t); solved in the smaller of the p- and n-sized
// systems. t must sit strictly above the noise-block spectrum.
struct KDiagnostic {
  Eigen::MatrixXd K;
  double tr_Bn = 0.0;
};
KDiagnostic k_matrix(const DataMatrix& data, double t);

// x' B y / (|x| |y|), the bilinear form of self-normalized vectors.
double normalized_bilinear_form(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& B);
double normalized_bilinear_form(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& diag_B);

} // namespace spikedcorr
