#include "spikedcorr/cumulants.hpp"

#include "spikedcorr/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace spikedcorr {

namespace {

// Memory cap for the empirical path: it keeps ~10 live tensors.
constexpr int kMaxEmpiricalDim = 32;
constexpr int kBatches = 20;

Eigen::MatrixXd standardized_mixing(const SpikedModel& model) {
  const Eigen::VectorXd dinv = model.sigma_sq.cwiseSqrt().cwiseInverse();
  return dinv.asDiagonal() * model.dist.mixing;
}

Tensor4 isserlis_tensor(const Eigen::MatrixXd& k) {
  const int m = static_cast<int>(k.rows());
  Tensor4 T(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          T.at(i, j, a, b) = k(i, j) * k(a, b) + k(i, a) * k(j, b) + k(i, b) * k(j, a);
  return T;
}

// kappa4 * sum_k abar_ik abar_jk abar_i'k abar_j'k, the non-Gaussian part of
// the fourth moment for a linear mixing of i.i.d. innovations.
Tensor4 mixing_quartic(const Eigen::MatrixXd& abar, double kurtosis) {
  const int m = static_cast<int>(abar.rows());
  Tensor4 T(m);
  if (kurtosis == 0.0) return T;
  for (int c = 0; c < static_cast<int>(abar.cols()); ++c) {
    const Eigen::VectorXd col = abar.col(c);
    for (int i = 0; i < m; ++i) {
      const double ci = col(i);
      if (ci == 0.0) continue;
      for (int j = 0; j < m; ++j) {
        const double cij = ci * col(j);
        if (cij == 0.0) continue;
        for (int a = 0; a < m; ++a) {
          const double cija = cij * col(a);
          if (cija == 0.0) continue;
          for (int b = 0; b < m; ++b) T.at(i, j, a, b) += cija * col(b);
        }
      }
    }
  }
  for (double& x : T.v) x *= kurtosis;
  return T;
}

void check_kappa2(const Eigen::MatrixXd& kappa2, int m) {
  if (kappa2.rows() != m || kappa2.cols() != m)
    throw std::invalid_argument("pair-correlation matrix has the wrong shape");
}

} // namespace

Tensor4::Tensor4(int dim) : m(dim) {
  if (dim < 1 || dim > kMaxDim)
    throw std::invalid_argument("tensor dimension must lie in [1, 64]");
  v.assign(static_cast<size_t>(dim) * dim * dim * dim, 0.0);
}

double Tensor4::max_abs_diff(const Tensor4& other) const {
  if (m != other.m) throw std::invalid_argument("tensor dimensions differ");
  double d = 0.0;
  for (size_t i = 0; i < v.size(); ++i) d = std::max(d, std::abs(v[i] - other.v[i]));
  return d;
}

Tensor4 fourth_moment_tensor(const SpikedModel& model) {
  Tensor4 T = isserlis_tensor(model.gamma_mat);
  if (model.dist.kind == DistributionSpec::Kind::LinearMixing &&
      model.dist.kurtosis != 0.0) {
    const Tensor4 extra = mixing_quartic(standardized_mixing(model), model.dist.kurtosis);
    for (size_t i = 0; i < T.v.size(); ++i) T.v[i] += extra.v[i];
  }
  return T;
}

Tensor4 kappa_tensor(const SpikedModel& model) {
  if (model.dist.kind == DistributionSpec::Kind::LinearMixing &&
      model.dist.kurtosis != 0.0)
    return mixing_quartic(standardized_mixing(model), model.dist.kurtosis);
  return Tensor4(model.m);
}

Tensor4 kcheck_from_moments(const Eigen::MatrixXd& kappa2, const Tensor4& mu) {
  const int m = mu.m;
  check_kappa2(kappa2, m);
  Tensor4 T(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double kij = kappa2(i, j);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          const double kab = kappa2(a, b);
          const double quarter =
              mu(i, i, a, a) + mu(i, i, b, b) + mu(j, j, a, a) + mu(j, j, b, b);
          const double half_ab = mu(a, b, i, i) + mu(a, b, j, j);
          const double half_ij = mu(i, j, a, a) + mu(i, j, b, b);
          T.at(i, j, a, b) = 0.25 * kij * kab * quarter - 0.5 * kij * half_ab -
                             0.5 * kab * half_ij + kij * kab;
        }
    }
  return T;
}

Tensor4 kcheck_tensor(const SpikedModel& model) {
  return kcheck_from_moments(model.gamma_mat, fourth_moment_tensor(model));
}

Tensor4 kcheck_gaussian_closed_form(const Eigen::MatrixXd& k) {
  const int m = static_cast<int>(k.rows());
  check_kappa2(k, m);
  Tensor4 T(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          const double quad = k(i, a) * k(i, a) + k(j, b) * k(j, b) +
                              k(i, b) * k(i, b) + k(a, j) * k(a, j);
          T.at(i, j, a, b) = 0.5 * k(i, j) * k(a, b) * quad -
                             k(a, b) * (k(i, a) * k(j, a) + k(i, b) * k(j, b)) -
                             k(i, j) * (k(i, a) * k(i, b) + k(a, j) * k(j, b));
        }
  return T;
}

namespace {

struct TensorAccum {
  Tensor4 sum, sumsq;
  explicit TensorAccum(int m) : sum(m), sumsq(m) {}
  void add(const Tensor4& t) {
    for (size_t i = 0; i < sum.v.size(); ++i) {
      sum.v[i] += t.v[i];
      sumsq.v[i] += t.v[i] * t.v[i];
    }
  }
  Tensor4 standard_error(int batches) const {
    Tensor4 se(sum.m);
    for (size_t i = 0; i < sum.v.size(); ++i) {
      const double mean = sum.v[i] / batches;
      double var = (sumsq.v[i] - batches * mean * mean) / (batches - 1);
      se.v[i] = std::sqrt(std::max(var, 0.0) / batches);
    }
    return se;
  }
};

Tensor4 mu_from_accumulator(const Eigen::MatrixXd& Q, double n, int m) {
  Tensor4 mu(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) mu.at(i, j, a, b) = Q(i * m + j, a * m + b) / n;
  return mu;
}

Tensor4 kappa_from_mu(const Eigen::MatrixXd& k, const Tensor4& mu) {
  Tensor4 T(mu.m);
  const int m = mu.m;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          T.at(i, j, a, b) = mu(i, j, a, b) - k(i, j) * k(a, b) - k(i, a) * k(j, b) -
                             k(i, b) * k(j, a);
  return T;
}

} // namespace

EmpiricalCumulants empirical_cumulants(const Eigen::MatrixXd& samples) {
  return empirical_cumulants(samples, Eigen::VectorXd(), Eigen::MatrixXd());
}

EmpiricalCumulants empirical_cumulants(const Eigen::MatrixXd& samples,
                                       const Eigen::VectorXd& population_sigma_sq,
                                       const Eigen::MatrixXd& population_kappa2) {
  const int n = static_cast<int>(samples.rows());
  const int m = static_cast<int>(samples.cols());
  if (m < 1 || m > kMaxEmpiricalDim)
    throw std::invalid_argument("empirical cumulants support 1 <= m <= 32 columns");
  if (n < 100) throw std::invalid_argument("need at least 100 observations");
  if (!samples.allFinite()) throw std::invalid_argument("samples contain non-finite values");

  const bool oracle = population_sigma_sq.size() > 0;
  if (oracle) {
    if (population_sigma_sq.size() != m)
      throw std::invalid_argument("population scale vector has the wrong length");
    check_kappa2(population_kappa2, m);
    for (int i = 0; i < m; ++i)
      if (!(population_sigma_sq(i) > 0.0))
        throw std::invalid_argument("population scales must be positive");
  }

  for (int j = 0; j < m; ++j) {
    const double span = samples.col(j).maxCoeff() - samples.col(j).minCoeff();
    if (span == 0.0)
      throw std::invalid_argument("column " + std::to_string(j) + " is constant");
  }

  Eigen::VectorXd scale(m);
  if (oracle) {
    scale = population_sigma_sq.cwiseSqrt();
  } else {
    for (int j = 0; j < m; ++j)
      scale(j) = std::sqrt(samples.col(j).squaredNorm() / n);
  }
  const Eigen::MatrixXd X = samples * scale.cwiseInverse().asDiagonal();

  EmpiricalCumulants out;
  out.oracle_mode = oracle;
  out.batches = kBatches;
  out.mu = Tensor4(m);
  TensorAccum acc_mu(m), acc_kappa(m), acc_kcheck(m);

  Eigen::MatrixXd Q_total = Eigen::MatrixXd::Zero(m * m, m * m);
  Eigen::MatrixXd S_total = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd y(m * m);

  for (int b = 0; b < kBatches; ++b) {
    const int r0 = static_cast<int>(static_cast<long long>(b) * n / kBatches);
    const int r1 = static_cast<int>(static_cast<long long>(b + 1) * n / kBatches);
    const int rows = r1 - r0;
    Eigen::MatrixXd Qb = Eigen::MatrixXd::Zero(m * m, m * m);
    Eigen::MatrixXd Sb = Eigen::MatrixXd::Zero(m, m);
    for (int r = r0; r < r1; ++r) {
      const Eigen::VectorXd x = X.row(r).transpose();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) y(i * m + j) = x(i) * x(j);
      Qb.selfadjointView<Eigen::Lower>().rankUpdate(y, 1.0);
      Sb.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0);
    }
    Qb.triangularView<Eigen::StrictlyUpper>() = Qb.transpose();
    Sb.triangularView<Eigen::StrictlyUpper>() = Sb.transpose();
    Q_total += Qb;
    S_total += Sb;

    const Eigen::MatrixXd k_b = oracle ? population_kappa2 : Eigen::MatrixXd(Sb / rows);
    const Tensor4 mu_b = mu_from_accumulator(Qb, rows, m);
    acc_mu.add(mu_b);
    acc_kappa.add(kappa_from_mu(k_b, mu_b));
    acc_kcheck.add(kcheck_from_moments(k_b, mu_b));
  }

  out.kappa2 = S_total / n;
  const Eigen::MatrixXd k_used = oracle ? population_kappa2 : out.kappa2;
  out.mu = mu_from_accumulator(Q_total, n, m);
  out.kappa = kappa_from_mu(k_used, out.mu);
  out.kcheck = kcheck_from_moments(k_used, out.mu);
  out.se_mu = acc_mu.standard_error(kBatches);
  out.se_kappa = acc_kappa.standard_error(kBatches);
  out.se_kcheck = acc_kcheck.standard_error(kBatches);
  return out;
}

namespace {

void check_contract_args(const Eigen::MatrixXd& P, int mu, int mup, int nu, int nup,
                         const Tensor4& A) {
  const int m = A.m;
  if (P.rows() != m || P.cols() != m)
    throw std::invalid_argument("eigenvector matrix does not match tensor dimension");
  for (int idx : {mu, mup, nu, nup})
    if (idx < 1 || idx > m) throw std::invalid_argument("contraction index out of range");
}

} // namespace

double contract(const Eigen::MatrixXd& P, int mu, int mup, int nu, int nup,
                const Tensor4& A) {
  check_contract_args(P, mu, mup, nu, nup, A);
  const int m = A.m;
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> M1(A.v.data(), m, m * m * m);
  Eigen::VectorXd t3 = M1.transpose() * P.col(mu - 1);
  Eigen::Map<const RowMat> M2(t3.data(), m, m * m);
  Eigen::VectorXd t2 = M2.transpose() * P.col(mup - 1);
  Eigen::Map<const RowMat> M3(t2.data(), m, m);
  Eigen::VectorXd t1 = M3.transpose() * P.col(nu - 1);
  return t1.dot(P.col(nup - 1));
}

double contract_reference(const Eigen::MatrixXd& P, int mu, int mup, int nu, int nup,
                          const Tensor4& A) {
  check_contract_args(P, mu, mup, nu, nup, A);
  const int m = A.m;
  double total = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          total += A(i, j, a, b) * P(i, mu - 1) * P(j, mup - 1) * P(a, nu - 1) *
                   P(b, nup - 1);
  return total;
}

double contract_spike(const Eigen::MatrixXd& P, int nu, const Tensor4& A) {
  return contract(P, nu, nu, nu, nu, A);
}

} // namespace spikedcorr
