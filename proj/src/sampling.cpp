#include "spikedcorr/sampling.hpp"

#include "spikedcorr/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spikedcorr {

namespace {

// Below these sizes the spectrum is solved densely; above, Lanczos with full
// reorthogonalization. The data-driven path can also solve the n x n Gram
// companion when observations are the short side.
constexpr int kDenseMatrixDim = 2000;
constexpr int kDenseDataDim = 256;
constexpr double kRitzTol = 1e-10;
constexpr double kRitzAcceptTol = 1e-7;
constexpr std::uint64_t kMatrixStartSeed = 0x9e3779b97f4a7c15ULL;

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw numerical_error("eigensolve failed for covariance root");
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd row_inverse_norms(const Eigen::MatrixXd& X) {
  Eigen::VectorXd inv(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double nrm = X.row(i).norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm))
      throw degenerate_data("coordinate " + std::to_string(i) +
                            " has zero or non-finite sample norm");
    inv[i] = 1.0 / nrm;
  }
  return inv;
}

// Top eigenpairs of a symmetric PSD operator given by its matvec, with full
// reorthogonalization. The first k_need pairs are driven to kRitzTol (or
// kRitzAcceptTol once the iteration cap is hit; beyond that it throws). The
// k_probe extras only feed the near-degeneracy gap check, so they are taken
// as-is at termination: at a clustered bulk edge they may never pass a strict
// residual test and must not block the pairs that matter.
template <typename MatVec>
void lanczos_topk(const MatVec& apply, int dim, int k_need, int k_probe,
                  PhiloxStream& stream, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  if (k_need < 1 || k_need + k_probe > dim) throw std::invalid_argument("lanczos: bad block size");
  const int k = k_need + k_probe;
  const int max_iter = std::min(dim, std::max(8 * k + 60, 480));
  Eigen::MatrixXd V(dim, max_iter);
  Eigen::VectorXd alpha(max_iter), beta(max_iter);
  Eigen::VectorXd w(dim);

  Eigen::VectorXd v0(dim);
  for (int i = 0; i < dim; ++i) v0[i] = stream.next_gaussian();
  const double v0n = v0.norm();
  if (!(v0n > 0.0)) throw numerical_error("lanczos: degenerate start vector");
  V.col(0) = v0 / v0n;

  double scale = 1.0;
  for (int j = 0; j < max_iter; ++j) {
    apply(V.col(j), w);
    const double a = V.col(j).dot(w);
    alpha[j] = a;
    w.noalias() -= a * V.col(j);
    if (j > 0) w.noalias() -= beta[j - 1] * V.col(j - 1);
    auto Vj = V.leftCols(j + 1);
    w.noalias() -= Vj * (Vj.transpose() * w).eval();
    w.noalias() -= Vj * (Vj.transpose() * w).eval();
    const double b = w.norm();
    beta[j] = b;
    scale = std::max(scale, std::abs(a) + b);

    const int jj = j + 1;
    const bool breakdown = !(b > 1e-13 * scale);
    const bool last = (jj == max_iter);
    if (jj >= k && (breakdown || last || jj % 10 == 0)) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(alpha.head(jj), beta.head(jj - 1));
      if (es.info() != Eigen::Success) throw numerical_error("lanczos: tridiagonal solve failed");
      const double top = std::max(1.0, std::abs(es.eigenvalues()[jj - 1]));
      double worst = 0.0;
      for (int i = 0; i < k_need; ++i) {
        const int col = jj - 1 - i;  // eigenvalues ascend; take from the top
        worst = std::max(worst, b * std::abs(es.eigenvectors()(jj - 1, col)));
      }
      if (worst <= kRitzTol * top || breakdown || last) {
        if (worst > kRitzAcceptTol * top)
          throw numerical_error("lanczos: leading eigenpairs did not converge");
        values.resize(k);
        vectors.resize(dim, k);
        for (int i = 0; i < k; ++i) {
          const int col = jj - 1 - i;
          values[i] = es.eigenvalues()[col];
          vectors.col(i).noalias() = V.leftCols(jj) * es.eigenvectors().col(col);
          vectors.col(i).normalize();
        }
        return;
      }
    }
    if (breakdown) throw numerical_error("lanczos: breakdown before convergence");
    V.col(jj) = w / b;
  }
  throw numerical_error("lanczos: iteration limit reached");
}

void validate_nus(const std::vector<int>& nus, int m) {
  for (int nu : nus)
    if (nu < 1 || nu > m) throw std::invalid_argument("spike index out of range");
}

int max_nu(const std::vector<int>& nus) {
  int v = 0;
  for (int nu : nus) v = std::max(v, nu);
  return v;
}

// Assembles one spike record from the full-length unit eigenvector, applying
// the sign convention <q_head, p_nu> >= 0.
SpikeObservation make_spike(const SpikedModel& model, int nu, double lambda,
                            Eigen::VectorXd q) {
  const Eigen::VectorXd pnu = model.p_vec(nu);
  double s = q.head(model.m).dot(pnu);
  if (s < 0.0) {
    q = -q;
    s = -s;
  }
  SpikeObservation obs;
  obs.nu = nu;
  obs.ell_hat = lambda;
  obs.proj = s;
  const double hn = q.head(model.m).norm();
  if (hn > 0.0) {
    obs.a = q.head(model.m) / hn;
  } else {
    obs.a = Eigen::VectorXd::Zero(model.m);
  }
  obs.proj_vec = model.P.transpose() * obs.a;
  return obs;
}

// Flags requested spikes whose sample eigenvalue nearly collides with a
// neighbor; eigenvector statistics are unreliable there.
bool gaps_degenerate(const std::vector<double>& vals, const std::vector<int>& nus) {
  if (vals.empty()) return false;
  const double tol = 1e-8 * std::max(1.0, std::abs(vals[0]));
  for (int nu : nus) {
    const int i = nu - 1;
    if (i >= static_cast<int>(vals.size())) return true;
    if (i > 0 && std::abs(vals[i - 1] - vals[i]) < tol) return true;
    if (i + 1 < static_cast<int>(vals.size()) && std::abs(vals[i] - vals[i + 1]) < tol)
      return true;
  }
  return false;
}

double top_eigenvalue(const Eigen::MatrixXd& block) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw numerical_error("signal-block eigensolve failed");
  return es.eigenvalues().maxCoeff();
}

} // namespace

Eigen::MatrixXd sample_signal(const SpikedModel& model, int n, const RngSpec& rng,
                              std::uint64_t replicate) {
  if (n < 1) throw std::invalid_argument("sample_signal: n must be positive");
  PhiloxStream stream(rng.master_seed, stream_id(replicate, kStreamData));
  const int m = model.m;
  const bool mixed = model.dist.kind == DistributionSpec::Kind::LinearMixing;
  const Eigen::MatrixXd F = mixed ? model.dist.mixing : psd_sqrt(model.sigma);
  Eigen::MatrixXd out(n, m);
  Eigen::VectorXd z(m);
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i < m; ++i)
      z[i] = mixed ? stream.next_innovation(model.dist.family, model.dist.two_point_p)
                   : stream.next_gaussian();
    out.row(t).noalias() = (F * z).transpose();
  }
  return out;
}

DataMatrix generate(const FullModel& model, int n, const RngSpec& rng,
                    std::uint64_t replicate) {
  if (n < 1) throw std::invalid_argument("generate: n must be positive");
  if (model.p < 0) throw std::invalid_argument("generate: negative noise dimension");
  PhiloxStream stream(rng.master_seed, stream_id(replicate, kStreamData));
  const int m = model.spiked.m;
  const bool mixed = model.spiked.dist.kind == DistributionSpec::Kind::LinearMixing;
  const Eigen::MatrixXd F = mixed ? model.spiked.dist.mixing : psd_sqrt(model.spiked.sigma);

  DataMatrix data;
  data.m = m;
  data.p = model.p;
  data.X.resize(m + model.p, n);
  Eigen::VectorXd z(m);
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i < m; ++i)
      z[i] = mixed
                 ? stream.next_innovation(model.spiked.dist.family, model.spiked.dist.two_point_p)
                 : stream.next_gaussian();
    data.X.col(t).head(m).noalias() = F * z;
    for (int j = 0; j < model.p; ++j)
      data.X(m + j, t) = stream.next_innovation(model.noise_family, model.noise_two_point_p);
  }
  return data;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& X) {
  if (X.cols() < 1) throw std::invalid_argument("sample_covariance: empty data");
  const double inv_n = 1.0 / static_cast<double>(X.cols());
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(X.rows(), X.rows());
  S.selfadjointView<Eigen::Lower>().rankUpdate(X, inv_n);
  S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
  return S;
}

Eigen::MatrixXd sample_covariance(const DataMatrix& data) { return sample_covariance(data.X); }

Eigen::MatrixXd sample_correlation(const Eigen::MatrixXd& X) {
  if (X.cols() < 1) throw std::invalid_argument("sample_correlation: empty data");
  const Eigen::VectorXd inv = row_inverse_norms(X);
  const Eigen::MatrixXd Xh = inv.asDiagonal() * X;
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(X.rows(), X.rows());
  R.selfadjointView<Eigen::Lower>().rankUpdate(Xh, 1.0);
  R.triangularView<Eigen::StrictlyUpper>() = R.transpose();
  R.diagonal().setOnes();
  return R;
}

Eigen::MatrixXd sample_correlation(const DataMatrix& data) { return sample_correlation(data.X); }

SampleSpectrum extract_spikes(const Eigen::MatrixXd& R, const SpikedModel& model,
                              const std::vector<int>& nus, SpectrumKind kind) {
  const int dim = static_cast<int>(R.rows());
  if (R.cols() != dim) throw std::invalid_argument("extract_spikes: matrix not square");
  if (dim < model.m) throw std::invalid_argument("extract_spikes: matrix smaller than signal block");
  if (!R.allFinite()) throw std::invalid_argument("extract_spikes: non-finite entries");
  const double sym = (R - R.transpose()).cwiseAbs().maxCoeff();
  if (sym > 1e-10 * std::max(1.0, R.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("extract_spikes: matrix not symmetric");
  validate_nus(nus, model.m);

  SampleSpectrum out;
  out.kind = kind;
  out.lambda_max_signal = top_eigenvalue(R.topLeftCorner(model.m, model.m));

  if (dim <= kDenseMatrixDim) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
    if (es.info() != Eigen::Success) throw numerical_error("extract_spikes: eigensolve failed");
    out.eigenvalues.resize(dim);
    for (int i = 0; i < dim; ++i) out.eigenvalues[i] = es.eigenvalues()[dim - 1 - i];
    for (int nu : nus)
      out.spikes.push_back(
          make_spike(model, nu, out.eigenvalues[nu - 1], es.eigenvectors().col(dim - nu)));
  } else {
    const int k_need = std::max(1, max_nu(nus));
    const int k_probe = std::min(3, dim - k_need);
    PhiloxStream stream(kMatrixStartSeed, 0);
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    lanczos_topk([&R](const auto& v, Eigen::VectorXd& w) { w.noalias() = R * v; }, dim, k_need,
                 k_probe, stream, values, vectors);
    out.eigenvalues.assign(values.data(), values.data() + values.size());
    for (int nu : nus)
      out.spikes.push_back(make_spike(model, nu, values[nu - 1], vectors.col(nu - 1)));
  }
  out.near_degenerate = gaps_degenerate(out.eigenvalues, nus);
  return out;
}

SampleSpectrum extract_spikes_data(const DataMatrix& data, const SpikedModel& model,
                                   const std::vector<int>& nus, SpectrumKind kind,
                                   const RngSpec& rng, std::uint64_t replicate) {
  if (data.m != model.m) throw std::invalid_argument("extract_spikes_data: model/data mismatch");
  const int dim = data.m + data.p;
  const int n = data.n();
  if (dim != data.X.rows()) throw std::invalid_argument("extract_spikes_data: bad block sizes");
  if (n < 2) throw std::invalid_argument("extract_spikes_data: need at least two observations");
  validate_nus(nus, model.m);

  if (dim <= kDenseDataDim) {
    const Eigen::MatrixXd R = kind == SpectrumKind::Correlation ? sample_correlation(data.X)
                                                                : sample_covariance(data.X);
    return extract_spikes(R, model, nus, kind);
  }

  // Normalized rows for the correlation operator; raw rows (with 1/n in the
  // matvec) for the covariance operator.
  Eigen::MatrixXd Xh;
  const Eigen::MatrixXd* Xop = &data.X;
  double op_scale = 1.0 / static_cast<double>(n);
  if (kind == SpectrumKind::Correlation) {
    const Eigen::VectorXd inv = row_inverse_norms(data.X);
    Xh = inv.asDiagonal() * data.X;
    Xop = &Xh;
    op_scale = 1.0;
  }

  SampleSpectrum out;
  out.kind = kind;
  {
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(data.m, data.m);
    block.selfadjointView<Eigen::Lower>().rankUpdate(Xop->topRows(data.m), op_scale);
    block.triangularView<Eigen::StrictlyUpper>() = block.transpose();
    out.lambda_max_signal = top_eigenvalue(block);
  }

  const int want = std::max(max_nu(nus) + 1, 1);
  if (n <= kDenseDataDim) {
    // Gram companion: same nonzero spectrum, eigenvectors lift through X.
    if (want > n) throw std::invalid_argument("extract_spikes_data: too few observations");
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    C.selfadjointView<Eigen::Lower>().rankUpdate(Xop->transpose(), op_scale);
    C.triangularView<Eigen::StrictlyUpper>() = C.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success)
      throw numerical_error("extract_spikes_data: companion eigensolve failed");
    out.eigenvalues.resize(n);
    for (int i = 0; i < n; ++i) out.eigenvalues[i] = es.eigenvalues()[n - 1 - i];
    for (int nu : nus) {
      Eigen::VectorXd q = (*Xop) * es.eigenvectors().col(n - nu);
      const double qn = q.norm();
      if (!(qn > 0.0))
        throw numerical_error("extract_spikes_data: null companion eigenvector");
      q /= qn;
      out.spikes.push_back(make_spike(model, nu, out.eigenvalues[nu - 1], std::move(q)));
    }
  } else {
    const int k_need = std::max(1, max_nu(nus));
    if (k_need + 1 > std::min(dim, n))
      throw std::invalid_argument("extract_spikes_data: too few observations");
    const int k_probe = std::min(3, std::min(dim, n) - k_need);
    PhiloxStream stream(rng.master_seed, stream_id(replicate, kStreamKrylov));
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    const Eigen::MatrixXd& Xr = *Xop;
    lanczos_topk(
        [&Xr, op_scale](const auto& v, Eigen::VectorXd& w) {
          w.noalias() = Xr * (Xr.transpose() * v).eval();
          w *= op_scale;
        },
        dim, k_need, k_probe, stream, values, vectors);
    out.eigenvalues.assign(values.data(), values.data() + values.size());
    for (int nu : nus)
      out.spikes.push_back(make_spike(model, nu, values[nu - 1], vectors.col(nu - 1)));
  }
  out.near_degenerate = gaps_degenerate(out.eigenvalues, nus);
  return out;
}

KDiagnostic k_matrix(const DataMatrix& data, double t) {
  const int m = data.m;
  const int p = data.p;
  const int n = data.n();
  if (m < 1) throw std::invalid_argument("k_matrix: empty signal block");
  if (n < 1) throw std::invalid_argument("k_matrix: empty data");
  if (!std::isfinite(t) || t <= 0.0)
    throw std::domain_error("k_matrix: evaluation point must be positive");

  const Eigen::VectorXd inv = row_inverse_norms(data.X);
  const Eigen::MatrixXd Xh = inv.asDiagonal() * data.X;
  const auto X1 = Xh.topRows(m);

  KDiagnostic out;
  if (p == 0) {
    out.K = X1 * X1.transpose();
    out.tr_Bn = static_cast<double>(n);
    return out;
  }

  const auto X2 = Xh.bottomRows(p);
  if (p <= n) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
    M.selfadjointView<Eigen::Lower>().rankUpdate(X2, -1.0);
    M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
    M.diagonal().array() += t;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success)
      throw std::domain_error("k_matrix: evaluation point inside the noise spectrum");
    const Eigen::MatrixXd R21 = X2 * X1.transpose();
    out.K = X1 * X1.transpose() + R21.transpose() * llt.solve(R21);
    const Eigen::MatrixXd Linv =
        llt.matrixL().solve(Eigen::MatrixXd::Identity(p, p));
    out.tr_Bn = static_cast<double>(n - p) + t * Linv.squaredNorm();
  } else {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    M.selfadjointView<Eigen::Lower>().rankUpdate(X2.transpose(), -1.0);
    M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
    M.diagonal().array() += t;
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success)
      throw std::domain_error("k_matrix: evaluation point inside the noise spectrum");
    out.K = t * (X1 * llt.solve(X1.transpose()));
    const Eigen::MatrixXd Linv =
        llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
    out.tr_Bn = t * Linv.squaredNorm();
  }
  // Symmetrize; the two solve paths round differently on the off-diagonal.
  out.K = ((out.K + out.K.transpose()) * 0.5).eval();
  return out;
}

double normalized_bilinear_form(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                const Eigen::MatrixXd& B) {
  if (B.rows() != x.size() || B.cols() != y.size())
    throw std::invalid_argument("normalized_bilinear_form: size mismatch");
  const double nx = x.norm(), ny = y.norm();
  if (!(nx > 0.0) || !(ny > 0.0))
    throw std::invalid_argument("normalized_bilinear_form: zero vector");
  return x.dot(B * y) / (nx * ny);
}

double normalized_bilinear_form(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& diag_B) {
  if (diag_B.size() != x.size() || x.size() != y.size())
    throw std::invalid_argument("normalized_bilinear_form: size mismatch");
  const double nx = x.norm(), ny = y.norm();
  if (!(nx > 0.0) || !(ny > 0.0))
    throw std::invalid_argument("normalized_bilinear_form: zero vector");
  return (x.array() * diag_B.array() * y.array()).sum() / (nx * ny);
}

} // namespace spikedcorr
