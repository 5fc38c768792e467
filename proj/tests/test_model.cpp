#include "spikedcorr/model.hpp"

#include "spikedcorr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"

using namespace spikedcorr;

namespace {

Eigen::MatrixXd random_spd(int m, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd B(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) B(i, j) = nd(gen);
  Eigen::MatrixXd S = B * B.transpose() + 0.5 * static_cast<double>(m) *
                                              Eigen::MatrixXd::Identity(m, m);
  return S;
}

} // namespace

TEST_CASE("constant correlation model matches its closed-form eigenstructure") {
  const int m = 10;
  const double r = 0.9;
  const SpikedModel model = constant_correlation_model(m, r);

  CHECK(model.ell(1) == doctest::Approx(1.0 + (m - 1) * r).epsilon(1e-14));
  for (int nu = 2; nu <= m; ++nu)
    CHECK(model.ell(nu) == doctest::Approx(1.0 - r).epsilon(1e-13));

  const Eigen::VectorXd p1 = model.p_vec(1);
  const double entry = 1.0 / std::sqrt(static_cast<double>(m));
  for (int i = 0; i < m; ++i) CHECK(p1(i) == doctest::Approx(entry).epsilon(1e-12));

  CHECK(model.is_simple(1));
  CHECK_FALSE(model.is_simple(2));
  CHECK(model.is_gaussian());
  CHECK_FALSE(model.singular);
}

TEST_CASE("two-group model is the documented rank-2 structure") {
  const SpikedModel model = two_group_model(4, 0.5);

  CHECK(model.ell(1) == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(model.ell(2) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(model.ell(3)) < 1e-12);
  CHECK(std::abs(model.ell(4)) < 1e-12);
  CHECK(model.singular);

  const Eigen::VectorXd p1 = model.p_vec(1);
  CHECK(p1(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p1(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p1(2) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(p1(3) == doctest::Approx(-0.5).epsilon(1e-12));

  // Mixing factorizes the covariance and uses only two innovations.
  const Eigen::MatrixXd& A = model.dist.mixing;
  CHECK((A * A.transpose() - model.sigma).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(A.rightCols(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.is_gaussian());

  CHECK_THROWS_AS(two_group_model(5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(two_group_model(4, 1.0), std::invalid_argument);
}

TEST_CASE("ar1 block model embeds the block and keeps a unit diagonal") {
  const SpikedModel model = ar1_block_model(10, 0.95, 12);
  CHECK(model.m == 12);
  for (int i = 0; i < 12; ++i) CHECK(model.gamma_mat(i, i) == 1.0);
  CHECK(model.gamma_mat(0, 1) == doctest::Approx(0.95));
  CHECK(model.gamma_mat(0, 9) == doctest::Approx(std::pow(0.95, 9)));
  CHECK(model.gamma_mat(0, 10) == 0.0);
  CHECK(model.gamma_mat(10, 11) == 0.0);
  CHECK(model.ell(1) > 1.0 + std::sqrt(0.5)); // supercritical at gamma = 0.5
  CHECK(model.L.minCoeff() > 0.0);
}

TEST_CASE("correlation is invariant under diagonal rescaling of the covariance") {
  std::mt19937_64 gen(20240817);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + static_cast<int>(gen() % 7);
    const Eigen::MatrixXd S = random_spd(m, gen);
    Eigen::VectorXd d(m);
    std::uniform_real_distribution<double> ud(0.05, 20.0);
    for (int i = 0; i < m; ++i) d(i) = ud(gen);
    const Eigen::MatrixXd S2 = d.asDiagonal() * S * d.asDiagonal();

    const SpikedModel a = build_model(S, DistributionSpec::gaussian());
    const SpikedModel b = build_model(S2, DistributionSpec::gaussian());
    CHECK((a.gamma_mat - b.gamma_mat).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((a.L - b.L).cwiseAbs().maxCoeff() < 1e-12);
    // Eigenvectors are only well conditioned away from eigenvalue clusters,
    // and the sign rule can flip when entry magnitudes tie to an ulp.
    // Compare isolated columns up to sign.
    for (int c = 0; c < m; ++c) {
      double gap = std::numeric_limits<double>::infinity();
      for (int k = 0; k < m; ++k)
        if (k != c) gap = std::min(gap, std::abs(a.L(c) - a.L(k)));
      if (gap > 1e-6) CHECK(std::abs(a.P.col(c).dot(b.P.col(c))) > 1.0 - 1e-8);
    }
  }
}

TEST_CASE("rebuilding from identical input reproduces the eigenbasis bitwise") {
  std::mt19937_64 gen(5551212);
  for (int trial = 0; trial < 5; ++trial) {
    const int m = 2 + static_cast<int>(gen() % 7);
    const Eigen::MatrixXd S = random_spd(m, gen);
    const SpikedModel a = build_model(S, DistributionSpec::gaussian());
    const SpikedModel b = build_model(S, DistributionSpec::gaussian());
    CHECK((a.P - b.P).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.L - b.L).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("eigen conventions: descending order, residual bound, orthonormality, sign") {
  std::mt19937_64 gen(987654321);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + static_cast<int>(gen() % 10);
    const SpikedModel model = build_model(random_spd(m, gen), DistributionSpec::gaussian());

    for (int k = 1; k < m; ++k) CHECK(model.L(k - 1) >= model.L(k));
    const double resid =
        (model.gamma_mat * model.P - model.P * model.L.asDiagonal()).cwiseAbs().maxCoeff();
    CHECK(resid <= 1e-10 * std::max(1.0, model.L.cwiseAbs().maxCoeff()));
    const Eigen::MatrixXd gram = model.P.transpose() * model.P;
    CHECK((gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-12);

    for (int c = 0; c < m; ++c) {
      int arg = 0;
      for (int i = 1; i < m; ++i)
        if (std::abs(model.P(i, c)) > std::abs(model.P(arg, c))) arg = i;
      CHECK(model.P(arg, c) > 0.0);
    }
  }
}

TEST_CASE("model validation rejects malformed input") {
  CHECK_THROWS_AS(build_model(Eigen::MatrixXd::Zero(3, 4), DistributionSpec::gaussian()),
                  std::invalid_argument);

  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(build_model(asym, DistributionSpec::gaussian()), std::invalid_argument);

  Eigen::MatrixXd singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(build_model(singular, DistributionSpec::gaussian()), std::invalid_argument);

  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(build_model(indef, DistributionSpec::gaussian()), std::invalid_argument);

  CHECK_THROWS_AS(build_model(Eigen::MatrixXd::Identity(65, 65), DistributionSpec::gaussian()),
                  std::invalid_argument);

  // Mixing must factor the covariance.
  const Eigen::MatrixXd S = constant_correlation_matrix(3, 0.4);
  CHECK_THROWS_AS(
      build_model(S, DistributionSpec::linear_mixing(Eigen::MatrixXd::Identity(3, 3),
                                                     InnovationFamily::Rademacher)),
      std::invalid_argument);
  CHECK_NOTHROW(
      build_model(S, DistributionSpec::linear_mixing_sqrt(S, InnovationFamily::Rademacher)));

  CHECK_THROWS_AS(constant_correlation_matrix(4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(constant_correlation_matrix(4, -0.5), std::invalid_argument);
}

TEST_CASE("excess kurtosis per innovation family") {
  CHECK(excess_kurtosis(InnovationFamily::Gaussian) == 0.0);
  CHECK(excess_kurtosis(InnovationFamily::Rademacher) == doctest::Approx(-2.0));
  CHECK(excess_kurtosis(InnovationFamily::Uniform) == doctest::Approx(-1.2));
  // Two-point with p = 0.2: q^2/p + p^2/q - 3 = 3.2 + 0.05 - 3.
  CHECK(excess_kurtosis(InnovationFamily::TwoPointAsymmetric, 0.2) ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK(excess_kurtosis(InnovationFamily::TwoPointAsymmetric, 0.5) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(excess_kurtosis(InnovationFamily::TwoPointAsymmetric, 0.0),
                  std::invalid_argument);

  const Eigen::MatrixXd S = constant_correlation_matrix(2, 0.3);
  const SpikedModel g = build_model(S, DistributionSpec::gaussian());
  CHECK(g.is_gaussian());
  const SpikedModel mix_g =
      build_model(S, DistributionSpec::linear_mixing_sqrt(S, InnovationFamily::Gaussian));
  CHECK(mix_g.is_gaussian());
  const SpikedModel mix_r =
      build_model(S, DistributionSpec::linear_mixing_sqrt(S, InnovationFamily::Rademacher));
  CHECK_FALSE(mix_r.is_gaussian());
  CHECK(mix_r.dist.kurtosis == doctest::Approx(-2.0));
}

TEST_CASE("JSON round trip preserves the model") {
  std::mt19937_64 gen(1234);
  const Eigen::MatrixXd S = random_spd(5, gen);
  const SpikedModel a =
      build_model(S, DistributionSpec::linear_mixing_sqrt(S, InnovationFamily::Uniform));
  const SpikedModel b = model_from_json(model_to_json(a));

  CHECK((a.sigma - b.sigma).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((a.L - b.L).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.P - b.P).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(b.dist.kind == DistributionSpec::Kind::LinearMixing);
  CHECK(b.dist.family == InnovationFamily::Uniform);
  CHECK(b.dist.kurtosis == doctest::Approx(-1.2));
  CHECK((a.dist.mixing - b.dist.mixing).cwiseAbs().maxCoeff() < 1e-14);

  // Singular models survive the trip via the flag.
  const SpikedModel tg = two_group_model(4, 0.5);
  const SpikedModel tg2 = model_from_json(model_to_json(tg));
  CHECK(tg2.singular);
  CHECK(tg2.ell(1) == doctest::Approx(3.0));

  CHECK_THROWS_AS(model_from_json("{not json"), std::invalid_argument);
  CHECK_THROWS_AS(model_from_json("{\"m\": 2}"), std::invalid_argument);
}

TEST_CASE("compact model strings parse into the named constructions") {
  const SpikedModel cc = model_from_string("const-corr:m=10,r=0.9");
  CHECK(cc.m == 10);
  CHECK(cc.ell(1) == doctest::Approx(9.1));

  const SpikedModel tg = model_from_string("two-group:m=4,r=0.5");
  CHECK(tg.ell(1) == doctest::Approx(3.0));

  const SpikedModel ar = model_from_string("ar1:block=10,r=0.95,m=10");
  CHECK(ar.m == 10);
  CHECK(ar.gamma_mat(0, 1) == doctest::Approx(0.95));

  const SpikedModel mixed = model_from_string("const-corr:m=4,r=0.8,dist=rademacher");
  CHECK(mixed.dist.kind == DistributionSpec::Kind::LinearMixing);
  CHECK(mixed.dist.family == InnovationFamily::Rademacher);

  const SpikedModel tp = model_from_string("const-corr:m=3,r=0.5,dist=twopoint,tp=0.2");
  CHECK(tp.dist.family == InnovationFamily::TwoPointAsymmetric);
  CHECK(tp.dist.kurtosis == doctest::Approx(0.25));

  CHECK_THROWS_AS(model_from_string("mystery:m=3"), std::invalid_argument);
  CHECK_THROWS_AS(model_from_string("const-corr:m=3"), std::invalid_argument);
  CHECK_THROWS_AS(model_from_string("const-corr:m=3,r=abc"), std::invalid_argument);
  CHECK_THROWS_AS(model_from_string("/nonexistent/model.json"), std::invalid_argument);
}
