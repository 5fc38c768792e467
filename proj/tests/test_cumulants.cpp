#include "spikedcorr/cumulants.hpp"

#include "spikedcorr/errors.hpp"
#include "spikedcorr/model.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

using namespace spikedcorr;

namespace {

// Independent draw of n observations of xi = A z with stdlib RNG; the library
// sampler is deliberately not used here.
Eigen::MatrixXd draw_mixed(const Eigen::MatrixXd& A, InnovationFamily family, int n,
                           std::mt19937_64& gen) {
  const int m = static_cast<int>(A.rows());
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(-std::sqrt(3.0), std::sqrt(3.0));
  Eigen::MatrixXd out(n, m);
  Eigen::VectorXd z(m);
  for (int r = 0; r < n; ++r) {
    for (int k = 0; k < m; ++k) {
      switch (family) {
        case InnovationFamily::Gaussian: z(k) = nd(gen); break;
        case InnovationFamily::Rademacher: z(k) = (gen() & 1) ? 1.0 : -1.0; break;
        case InnovationFamily::Uniform: z(k) = ud(gen); break;
        default: throw std::invalid_argument("family not used in this test");
      }
    }
    out.row(r) = (A * z).transpose();
  }
  return out;
}

Eigen::MatrixXd random_orthonormal(int m, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd B(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) B(i, j) = nd(gen);
  return Eigen::HouseholderQR<Eigen::MatrixXd>(B).householderQ();
}

Eigen::MatrixXd random_correlation(int m, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd B(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) B(i, j) = nd(gen);
  Eigen::MatrixXd S =
      B * B.transpose() + 0.5 * static_cast<double>(m) * Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd dinv = S.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd k = dinv.asDiagonal() * S * dinv.asDiagonal();
  k = 0.5 * (k + k.transpose()).eval();
  k.diagonal().setOnes();
  return k;
}

} // namespace

TEST_CASE("single-coordinate adjustment values") {
  // Gaussian: var of (x^2 - 1)/... reduces to -2; Rademacher: x^2 is constant,
  // everything cancels.
  const SpikedModel g =
      build_model(Eigen::MatrixXd::Identity(1, 1), DistributionSpec::gaussian());
  CHECK(kcheck_tensor(g)(0, 0, 0, 0) == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(kcheck_gaussian_closed_form(g.gamma_mat)(0, 0, 0, 0) ==
        doctest::Approx(-2.0).epsilon(1e-14));

  const SpikedModel r = build_model(
      Eigen::MatrixXd::Identity(1, 1),
      DistributionSpec::linear_mixing(Eigen::MatrixXd::Identity(1, 1),
                                      InnovationFamily::Rademacher));
  CHECK(kcheck_tensor(r)(0, 0, 0, 0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(kappa_tensor(r)(0, 0, 0, 0) == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(fourth_moment_tensor(r)(0, 0, 0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("bivariate Gaussian adjustment and mixed fourth moments") {
  const double rho = 0.6;
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 0.0, rho, std::sqrt(1.0 - rho * rho);
  const Eigen::MatrixXd Sigma = A * A.transpose();

  const SpikedModel g = build_model(Sigma, DistributionSpec::gaussian());
  const Tensor4 kc = kcheck_tensor(g);
  CHECK(kc(0, 1, 0, 1) ==
        doctest::Approx(rho * rho * (1.0 + rho * rho) - 4.0 * rho * rho).epsilon(1e-13));
  CHECK(kc.max_abs_diff(kcheck_gaussian_closed_form(g.gamma_mat)) < 1e-13);

  // E[x1^2 x2^2] = 1 + 2 rho^2 + kappa4 rho^2 for the triangular mixing above.
  for (InnovationFamily fam :
       {InnovationFamily::Gaussian, InnovationFamily::Rademacher, InnovationFamily::Uniform}) {
    const SpikedModel mdl = build_model(Sigma, DistributionSpec::linear_mixing(A, fam));
    const double k4 = excess_kurtosis(fam);
    CHECK(fourth_moment_tensor(mdl)(0, 0, 1, 1) ==
          doctest::Approx(1.0 + 2.0 * rho * rho + k4 * rho * rho).epsilon(1e-13));
    CHECK(kappa_tensor(mdl)(0, 0, 1, 1) == doctest::Approx(k4 * rho * rho).epsilon(1e-13));
  }
}

TEST_CASE("moment-based adjustment equals the Gaussian closed form") {
  std::mt19937_64 gen(777001);
  for (int trial = 0; trial < 12; ++trial) {
    const int m = 2 + static_cast<int>(gen() % 6);
    const Eigen::MatrixXd k = random_correlation(m, gen);
    const SpikedModel model = build_model(k, DistributionSpec::gaussian());
    const Tensor4 a = kcheck_tensor(model);
    const Tensor4 b = kcheck_gaussian_closed_form(k);
    CHECK(a.max_abs_diff(b) < 1e-12);
  }
}

TEST_CASE("adjustment tensor symmetries") {
  std::mt19937_64 gen(424242);
  const Eigen::MatrixXd k = random_correlation(4, gen);
  const SpikedModel mixed =
      build_model(k, DistributionSpec::linear_mixing_sqrt(k, InnovationFamily::Uniform));
  const Tensor4 T = kcheck_tensor(mixed);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          CHECK(T(i, j, a, b) == doctest::Approx(T(j, i, a, b)).epsilon(1e-13));
          CHECK(T(i, j, a, b) == doctest::Approx(T(i, j, b, a)).epsilon(1e-13));
          CHECK(T(i, j, a, b) == doctest::Approx(T(a, b, i, j)).epsilon(1e-13));
        }
}

TEST_CASE("empirical cumulants recover closed forms within their standard errors") {
  const Eigen::MatrixXd S = constant_correlation_matrix(3, 0.5);
  const int n = 400000;

  struct Case {
    DistributionSpec dist;
    InnovationFamily draw_family;
    Eigen::MatrixXd draw_mixing;
  };
  std::vector<Case> cases;
  {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    cases.push_back({DistributionSpec::gaussian(), InnovationFamily::Gaussian,
                     Eigen::MatrixXd(llt.matrixL())});
    DistributionSpec dr = DistributionSpec::linear_mixing_sqrt(S, InnovationFamily::Rademacher);
    cases.push_back({dr, InnovationFamily::Rademacher, dr.mixing});
  }

  std::mt19937_64 gen(90210);
  for (const auto& c : cases) {
    const SpikedModel model = build_model(S, c.dist);
    const Tensor4 kappa_true = kappa_tensor(model);
    const Tensor4 kcheck_true = kcheck_tensor(model);

    const Eigen::MatrixXd samples = draw_mixed(c.draw_mixing, c.draw_family, n, gen);
    const EmpiricalCumulants est =
        empirical_cumulants(samples, S.diagonal(), model.gamma_mat);
    CHECK(est.oracle_mode);
    CHECK(est.batches == 20);

    const int m = 3;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) {
            const double tol_k = 6.0 * est.se_kappa(i, j, a, b) + 1e-12;
            CHECK(std::abs(est.kappa(i, j, a, b) - kappa_true(i, j, a, b)) <= tol_k);
            const double tol_c = 6.0 * est.se_kcheck(i, j, a, b) + 1e-12;
            CHECK(std::abs(est.kcheck(i, j, a, b) - kcheck_true(i, j, a, b)) <= tol_c);
          }

    // Sample-standardized mode agrees with oracle mode to MC accuracy.
    const EmpiricalCumulants plain = empirical_cumulants(samples);
    CHECK_FALSE(plain.oracle_mode);
    CHECK(plain.kcheck.max_abs_diff(kcheck_true) < 0.1);
    CHECK((plain.kappa2 - model.gamma_mat).cwiseAbs().maxCoeff() < 0.02);
  }
}

TEST_CASE("empirical cumulants validate their input") {
  Eigen::MatrixXd ok = Eigen::MatrixXd::Random(200, 2);
  CHECK_NOTHROW(empirical_cumulants(ok));

  CHECK_THROWS_AS(empirical_cumulants(Eigen::MatrixXd::Random(99, 2)), std::invalid_argument);

  Eigen::MatrixXd constant = Eigen::MatrixXd::Random(200, 2);
  constant.col(1).setConstant(3.0);
  CHECK_THROWS_AS(empirical_cumulants(constant), std::invalid_argument);

  CHECK_THROWS_AS(empirical_cumulants(ok, Eigen::VectorXd::Ones(3), Eigen::MatrixXd::Identity(3, 3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(empirical_cumulants(ok, -Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Identity(2, 2)),
                  std::invalid_argument);

  Eigen::MatrixXd bad = ok;
  bad(5, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(empirical_cumulants(bad), std::invalid_argument);
}

TEST_CASE("factored contraction agrees with the quadruple loop") {
  std::mt19937_64 gen(31337);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 6; ++trial) {
    const int m = 2 + static_cast<int>(gen() % 5);
    Tensor4 A(m);
    for (double& x : A.v) x = nd(gen);
    const Eigen::MatrixXd P = random_orthonormal(m, gen);
    for (int rep = 0; rep < 10; ++rep) {
      const int a = 1 + static_cast<int>(gen() % m);
      const int b = 1 + static_cast<int>(gen() % m);
      const int c = 1 + static_cast<int>(gen() % m);
      const int d = 1 + static_cast<int>(gen() % m);
      const double fast = contract(P, a, b, c, d, A);
      const double slow = contract_reference(P, a, b, c, d, A);
      CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
    }
    CHECK(contract_spike(P, 1, A) ==
          doctest::Approx(contract_reference(P, 1, 1, 1, 1, A)).epsilon(1e-12));
  }
  Tensor4 A(2);
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(contract(P, 0, 1, 1, 1, A), std::invalid_argument);
  CHECK_THROWS_AS(contract(P, 1, 1, 1, 3, A), std::invalid_argument);
  CHECK_THROWS_AS(contract(Eigen::MatrixXd::Identity(3, 3), 1, 1, 1, 1, A),
                  std::invalid_argument);
}

TEST_CASE("tensor bounds") {
  CHECK_THROWS_AS(Tensor4(0), std::invalid_argument);
  CHECK_THROWS_AS(Tensor4(65), std::invalid_argument);
  CHECK_NOTHROW(Tensor4(1));
  Tensor4 a(2), b(3);
  CHECK_THROWS_AS(a.max_abs_diff(b), std::invalid_argument);
}
