#include "spikedcorr/asymptotics.hpp"

#include "spikedcorr/errors.hpp"
#include "spikedcorr/mp_law.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace spikedcorr {

namespace {

constexpr double kRefuseMargin = 1e-6;
constexpr double kWarnMargin = 0.05;

void require_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("aspect ratio gamma must be positive");
}

// Supercritical guard shared by every prediction entry point. Returns the
// near-critical warning flag.
bool require_supercritical(double ell, double gamma) {
  require_gamma(gamma);
  const double margin = ell - (1.0 + std::sqrt(gamma));
  if (margin < kRefuseMargin)
    throw std::domain_error(
        "spike is below or within 1e-6 of the phase transition 1 + sqrt(gamma); "
        "the prediction is not defined there");
  return margin < kWarnMargin;
}

void require_simple(const SpikedModel& model, int nu) {
  if (!model.is_simple(nu))
    throw std::domain_error("population spike must be simple (isolated eigenvalue)");
}

void require_gaussian(const SpikedModel& model, const char* what) {
  if (!model.is_gaussian())
    throw unsupported_operation(std::string(what) +
                                " is only available for Gaussian models");
}

struct SpikeScalars {
  double rho, rho_dot;
};

SpikeScalars spike_scalars(double ell, double gamma) {
  return {rho(ell, gamma), rho_dot(ell, gamma)};
}

} // namespace

EigenvaluePrediction eigenvalue_prediction(const SpikedModel& model, int nu, double gamma) {
  return eigenvalue_prediction(model, nu, gamma, gamma);
}

EigenvaluePrediction eigenvalue_prediction(const SpikedModel& model, int nu, double gamma,
                                           double gamma_n) {
  const double ell = model.ell(nu);
  require_simple(model, nu);
  bool warn = require_supercritical(ell, gamma);
  warn = require_supercritical(ell, gamma_n) || warn;

  EigenvaluePrediction out;
  out.nu = nu;
  out.ell = ell;
  out.gamma = gamma;
  out.gamma_n = gamma_n;
  const SpikeScalars lim = spike_scalars(ell, gamma);
  const SpikeScalars fin = spike_scalars(ell, gamma_n);
  out.rho_limit = lim.rho;
  out.rho_n = fin.rho;
  out.rho_dot_limit = lim.rho_dot;
  out.rho_dot_n = fin.rho_dot;

  const Tensor4 kappa = kappa_tensor(model);
  const Tensor4 kcheck = kcheck_tensor(model);
  const double ckappa = contract_spike(model.P, nu, kappa);
  const double ckcheck = contract_spike(model.P, nu, kcheck);

  out.term_base = 2.0 * lim.rho_dot * ell * ell;
  out.term_kurtosis = lim.rho_dot * lim.rho_dot * ckappa;
  out.term_adjust = lim.rho_dot * lim.rho_dot * ckcheck;
  out.var_limit = out.term_base + out.term_kurtosis + out.term_adjust;

  out.term_base_n = 2.0 * fin.rho_dot * ell * ell;
  out.term_kurtosis_n = fin.rho_dot * fin.rho_dot * ckappa;
  out.term_adjust_n = fin.rho_dot * fin.rho_dot * ckcheck;
  out.var_n = out.term_base_n + out.term_kurtosis_n + out.term_adjust_n;

  out.near_critical = warn;
  return out;
}

double eigenvalue_variance_gaussian(const SpikedModel& model, int nu, double gamma) {
  require_gaussian(model, "the closed-form spike variance");
  const double ell = model.ell(nu);
  require_simple(model, nu);
  require_supercritical(ell, gamma);
  const double rd = rho_dot(ell, gamma);
  const Eigen::VectorXd p = model.p_vec(nu);
  const double quartic = p.array().pow(4).sum();
  const Eigen::MatrixXd scaled =
      p.asDiagonal() * model.gamma_mat * p.asDiagonal();
  const double pair_mass = scaled.array().square().sum();
  return 2.0 * ell * ell * rd * (1.0 - rd * (2.0 * ell * quartic - pair_mass));
}

double centering_shift(double ell, double gamma, double gamma_n, long long n) {
  require_gamma(gamma);
  require_gamma(gamma_n);
  if (n < 1) throw std::invalid_argument("sample size must be positive");
  if (!(ell > 1.0)) throw std::invalid_argument("spike must exceed 1");
  return std::sqrt(static_cast<double>(n)) * (gamma_n - gamma) * ell / (ell - 1.0);
}

VarianceReduction variance_reduction_report(const SpikedModel& model, int nu, double gamma) {
  require_gamma(gamma);
  require_gaussian(model, "the variance-reduction report");
  const double ell = model.ell(nu);
  require_simple(model, nu);

  VarianceReduction out;
  const Eigen::VectorXd p = model.p_vec(nu);
  const double quartic = p.array().pow(4).sum();
  const Eigen::MatrixXd scaled = p.asDiagonal() * model.gamma_mat * p.asDiagonal();
  const double pair_mass = scaled.array().square().sum();
  out.delta = 2.0 * ell * quartic - pair_mass;
  out.reduced = out.delta > 0.0;

  out.entrywise_nonneg = model.gamma_mat.minCoeff() >= -1e-12 &&
                         (p.minCoeff() >= -1e-12 || p.maxCoeff() <= 1e-12);
  out.quartic_mass = 2.0 * ell * quartic > 1.0;
  out.dominant_pair = 2.0 * ell > model.L(0) * model.L(0);
  out.guaranteed = out.entrywise_nonneg || out.quartic_mass || out.dominant_pair;

  out.supercritical = ell > 1.0 + std::sqrt(gamma) + kRefuseMargin;
  if (out.supercritical) {
    const double rd = rho_dot(ell, gamma);
    out.var_plain = 2.0 * rd * ell * ell;
    out.var_total = out.var_plain * (1.0 - rd * out.delta);
  } else {
    out.var_plain = std::numeric_limits<double>::quiet_NaN();
    out.var_total = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

EigenvectorPrediction eigenvector_prediction(const SpikedModel& model, int nu, double gamma) {
  const int m = model.m;
  const double ell = model.ell(nu);
  require_simple(model, nu);
  const bool warn = require_supercritical(ell, gamma);

  EigenvectorPrediction out;
  out.nu = nu;
  out.near_critical = warn;
  const SpikeScalars s = spike_scalars(ell, gamma);
  out.proj_sq_limit = s.rho_dot * ell / s.rho;

  out.D = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k)
    if (k != nu - 1) out.D(k, k) = 1.0 / (ell - model.L(k));

  const Tensor4 kappa = kappa_tensor(model);
  const Tensor4 kcheck = kcheck_tensor(model);
  out.Sigma_tilde = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k <= m; ++k)
    for (int l = k; l <= m; ++l) {
      double val = contract(model.P, k, nu, l, nu, kappa) +
                   contract(model.P, k, nu, l, nu, kcheck);
      if (k == l) val += model.L(k - 1) * ell / s.rho_dot;
      out.Sigma_tilde(k - 1, l - 1) = val;
      out.Sigma_tilde(l - 1, k - 1) = val;
    }

  out.Sigma = out.D * out.Sigma_tilde * out.D;
  out.Sigma_coord = model.P * out.Sigma * model.P.transpose();
  return out;
}

Eigen::MatrixXd eigenvector_covariance_gaussian(const SpikedModel& model, int nu,
                                                double gamma) {
  require_gaussian(model, "the closed-form eigenvector covariance");
  const int m = model.m;
  const double ell = model.ell(nu);
  require_simple(model, nu);
  require_supercritical(ell, gamma);
  const double rd = rho_dot(ell, gamma);

  const Eigen::VectorXd p = model.p_vec(nu);
  const Eigen::MatrixXd had = model.gamma_mat.cwiseProduct(model.gamma_mat);
  const Eigen::MatrixXd Z =
      model.P.transpose() * p.asDiagonal() * had * p.asDiagonal() * model.P;
  const Eigen::MatrixXd Y =
      model.P.transpose() * p.cwiseProduct(p).asDiagonal() * model.P;
  const Eigen::MatrixXd Ldiag = model.L.asDiagonal();
  const Eigen::MatrixXd lIL = ell * Eigen::MatrixXd::Identity(m, m) + Ldiag;

  Eigen::MatrixXd tilde = (ell / rd) * Ldiag + lIL * (0.5 * Z - ell * Y) * lIL +
                          ell * (ell * ell * Y - Ldiag * Y * Ldiag);

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k)
    if (k != nu - 1) D(k, k) = 1.0 / (ell - model.L(k));
  return D * tilde * D;
}

Eigen::MatrixXd eigenvector_covariance_gaussian_entrywise(const SpikedModel& model, int nu,
                                                          double gamma) {
  require_gaussian(model, "the closed-form eigenvector covariance");
  const int m = model.m;
  const double ell = model.ell(nu);
  require_simple(model, nu);
  require_supercritical(ell, gamma);
  const double rd = rho_dot(ell, gamma);

  const Eigen::VectorXd p = model.p_vec(nu);
  const Eigen::MatrixXd had = model.gamma_mat.cwiseProduct(model.gamma_mat);
  const Eigen::MatrixXd Z =
      model.P.transpose() * p.asDiagonal() * had * p.asDiagonal() * model.P;
  const Eigen::MatrixXd Y =
      model.P.transpose() * p.cwiseProduct(p).asDiagonal() * model.P;

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    if (k == nu - 1) continue;
    for (int l = 0; l < m; ++l) {
      if (l == nu - 1) continue;
      const double lk = model.L(k), ll = model.L(l);
      double val = (k == l) ? (ell / rd) * lk : 0.0;
      val += 0.5 * (ell + lk) * (ell + ll) * Z(k, l);
      val -= ell * (ell * (lk + ll) + 2.0 * lk * ll) * Y(k, l);
      out(k, l) = val / ((ell - lk) * (ell - ll));
    }
  }
  return out;
}

Eigen::MatrixXd eigenvector_covariance_cov_pathway(const SpikedModel& model, int nu,
                                                   double gamma) {
  require_gaussian(model, "the covariance-input benchmark");
  const int m = model.m;
  const double ell = model.ell(nu);
  require_simple(model, nu);
  require_supercritical(ell, gamma);
  const double rd = rho_dot(ell, gamma);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    if (k == nu - 1) continue;
    const double lk = model.L(k);
    out(k, k) = ell * lk / (rd * (ell - lk) * (ell - lk));
  }
  return out;
}

SubcriticalLimits subcritical_limits(double gamma) {
  require_gamma(gamma);
  const double edge = 1.0 + std::sqrt(gamma);
  return {edge * edge, 0.0};
}

CltParams clt_params(double ell, double gamma) {
  require_supercritical(ell, gamma);
  CltParams out;
  const SpikeScalars s = spike_scalars(ell, gamma);
  out.omega = (s.rho / ell) * (s.rho / ell);
  out.phi = out.omega;
  out.theta = out.omega / s.rho_dot;
  return out;
}

Eigen::MatrixXd bilinear_clt_covariance(const Eigen::MatrixXd& Cxx, const Eigen::MatrixXd& Cxy,
                                        const Eigen::MatrixXd& Cyx, const Eigen::MatrixXd& Cyy,
                                        const Eigen::MatrixXd& Czz, const Eigen::MatrixXd& Cww,
                                        const Eigen::MatrixXd& Cwz, const CltParams& params) {
  const Eigen::Index M = Cxx.rows();
  for (const Eigen::MatrixXd* mat : {&Cxx, &Cxy, &Cyx, &Cyy, &Czz, &Cww, &Cwz})
    if (mat->rows() != M || mat->cols() != M)
      throw std::invalid_argument("all moment matrices must be square with equal size");
  if ((Cxx.diagonal().array() - 1.0).abs().maxCoeff() > 1e-8 ||
      (Cyy.diagonal().array() - 1.0).abs().maxCoeff() > 1e-8)
    throw std::invalid_argument("x and y components must be standardized to unit variance");

  const Eigen::MatrixXd J = Cxy.cwiseProduct(Cyx) + Cxx.cwiseProduct(Cyy);
  const Eigen::MatrixXd K = Czz - J;
  const Eigen::MatrixXd K2 = Cww - Cwz - Cwz.transpose();
  return params.theta * J + params.omega * K + params.phi * K2;
}

namespace {

struct WmatrixContext {
  double theta, omega;
  Tensor4 kappa, kcheck;
};

WmatrixContext wmatrix_context(const SpikedModel& model, int nu, double gamma) {
  const double ell = model.ell(nu);
  require_simple(model, nu);
  require_supercritical(ell, gamma);
  const SpikeScalars s = spike_scalars(ell, gamma);
  WmatrixContext ctx;
  ctx.omega = (s.rho / ell) * (s.rho / ell);
  ctx.theta = ctx.omega / s.rho_dot;
  ctx.kappa = kappa_tensor(model);
  ctx.kcheck = kcheck_tensor(model);
  return ctx;
}

double wmatrix_entry(const WmatrixContext& ctx, const Eigen::MatrixXd& k, int i, int j,
                     int a, int b) {
  return ctx.theta * (k(i, b) * k(j, a) + k(i, a) * k(j, b)) +
         ctx.omega * (ctx.kappa(i, j, a, b) + ctx.kcheck(i, j, a, b));
}

} // namespace

double wmatrix_cov_entry(const SpikedModel& model, int nu, double gamma, int i, int j,
                         int i2, int j2) {
  for (int idx : {i, j, i2, j2})
    if (idx < 1 || idx > model.m)
      throw std::invalid_argument("matrix entry index out of range");
  const WmatrixContext ctx = wmatrix_context(model, nu, gamma);
  return wmatrix_entry(ctx, model.gamma_mat, i - 1, j - 1, i2 - 1, j2 - 1);
}

std::vector<std::pair<int, int>> sym_pairs(int m) {
  if (m < 1) throw std::invalid_argument("dimension must be positive");
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<size_t>(m) * (m + 1) / 2);
  for (int i = 1; i <= m; ++i)
    for (int j = i; j <= m; ++j) out.emplace_back(i, j);
  return out;
}

Eigen::MatrixXd wmatrix_covariance(const SpikedModel& model, int nu, double gamma) {
  const WmatrixContext ctx = wmatrix_context(model, nu, gamma);
  const auto pairs = sym_pairs(model.m);
  const int M = static_cast<int>(pairs.size());
  Eigen::MatrixXd out(M, M);
  for (int a = 0; a < M; ++a)
    for (int b = a; b < M; ++b) {
      const double val =
          wmatrix_entry(ctx, model.gamma_mat, pairs[a].first - 1, pairs[a].second - 1,
                        pairs[b].first - 1, pairs[b].second - 1);
      out(a, b) = val;
      out(b, a) = val;
    }
  return out;
}

} // namespace spikedcorr
