#include "doctest.h"

#include "spikedcorr/asymptotics.hpp"
#include "spikedcorr/errors.hpp"
#include "spikedcorr/model.hpp"
#include "spikedcorr/montecarlo.hpp"
#include "spikedcorr/mp_law.hpp"

#include <cmath>
#include <cstdlib>
#include <vector>

using namespace spikedcorr;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.model.spiked = constant_correlation_model(2, 0.8);  // l1 = 1.8
  cfg.model.p = 100;
  cfg.n = 400;
  cfg.replicates = 200;
  cfg.rng = RngSpec{20240817};
  cfg.nus = {1};
  return cfg;
}

} // namespace

TEST_CASE("statistic helpers") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const MomentSummary ms = moment_summary(xs);
  CHECK(ms.mean == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(ms.var == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(ms.se_mean == doctest::Approx(std::sqrt(5.0 / 12.0)).epsilon(1e-12));

  double se = 0.0;
  CHECK(sample_covariance_scalar(xs, xs, &se) == doctest::Approx(ms.var).epsilon(1e-15));
  const std::vector<double> neg{-1.0, -2.0, -3.0, -4.0};
  CHECK(sample_covariance_scalar(xs, neg, nullptr) ==
        doctest::Approx(-ms.var).epsilon(1e-15));

  CHECK(ks_distance_gaussian({0.0}, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(ks_distance_gaussian(std::vector<double>{}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(moment_summary({1.0}), std::invalid_argument);
}

TEST_CASE("eigenvalue experiment agrees with its predictions") {
  ExperimentConfig cfg = small_config();
  cfg.cov_pathway = true;
  const McReport rep = run_eigenvalue_clt(cfg);

  REQUIRE(rep.find("var.nu1.corr") != nullptr);
  REQUIRE(rep.find("var.nu1.cov") != nullptr);
  REQUIRE(rep.find("ratio.nu1") != nullptr);
  CHECK(rep.find("var.nu1.corr")->pass);
  CHECK(rep.find("var.nu1.cov")->pass);
  CHECK(rep.find("mean.nu1.corr")->pass);
  CHECK(rep.find("mean.nu1.cov")->pass);
  CHECK(rep.find("ks.nu1.corr")->pass);  // flag-only target never gates

  // Both pathways fluctuate; the ratio sits near its prediction.
  const McTargetResult* ratio = rep.find("ratio.nu1");
  CHECK(ratio->empirical > 0.0);
  CHECK(ratio->theory > 0.0);
  CHECK(std::abs(ratio->empirical - ratio->theory) < 10.0 * ratio->se);

  // Re-centering at a wrong aspect ratio shifts the mean by the documented
  // first-order amount.
  const auto samples =
      rep.extra["samples"]["corr"]["nu1"].get<std::vector<double>>();
  const MomentSummary ms = moment_summary(samples);
  const double ell = cfg.model.spiked.L[0];
  const double gamma_n = 0.25, gamma_wrong = 0.20;
  const double shift = centering_shift(ell, gamma_wrong, gamma_n, cfg.n);
  CHECK(shift == doctest::Approx(20.0 * 0.05 * ell / (ell - 1.0)).epsilon(1e-12));
  const double recentered =
      ms.mean + std::sqrt(400.0) * (rho(ell, gamma_n) - rho(ell, gamma_wrong));
  CHECK(recentered > shift - 4.0 * ms.se_mean);
  CHECK(recentered < shift + 4.0 * ms.se_mean);
}

TEST_CASE("reports are byte-identical for any worker count") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 60;
  cfg.cov_pathway = true;
  cfg.threads = 1;
  const McReport one = run_eigenvalue_clt(cfg);
  cfg.threads = 4;
  const McReport four = run_eigenvalue_clt(cfg);
  CHECK(one.to_json() == four.to_json());
  CHECK(one.to_csv() == four.to_csv());
  CHECK(one.to_json().find("threads") == std::string::npos);

  cfg.threads = 3;
  const McReport vec1 = run_eigenvector_clt(cfg, {{2, 2}});
  cfg.threads = 1;
  const McReport vec2 = run_eigenvector_clt(cfg, {{2, 2}});
  CHECK(vec1.to_json() == vec2.to_json());
}

TEST_CASE("correlation statistics are insensitive to the noise family") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 150;
  const McReport gauss = run_eigenvalue_clt(cfg);
  cfg.model.noise_family = InnovationFamily::Rademacher;
  const McReport rade = run_eigenvalue_clt(cfg);

  // Same limit theory in both reports, and both runs land on it.
  CHECK(gauss.find("var.nu1.corr")->theory ==
        doctest::Approx(rade.find("var.nu1.corr")->theory).epsilon(1e-15));
  CHECK(gauss.find("var.nu1.corr")->pass);
  CHECK(rade.find("var.nu1.corr")->pass);
  CHECK(gauss.find("mean.nu1.corr")->pass);
  CHECK(rade.find("mean.nu1.corr")->pass);
}

TEST_CASE("eigenvector experiment covers components and projection") {
  ExperimentConfig cfg;
  cfg.model.spiked = constant_correlation_model(4, 0.6);  // l1 = 2.8
  cfg.model.p = 150;
  cfg.n = 600;
  cfg.replicates = 150;
  cfg.nus = {1};
  const McReport rep = run_eigenvector_clt(cfg, {{2, 2}, {2, 3}});

  REQUIRE(rep.find("var.v2") != nullptr);
  REQUIRE(rep.find("cov.v2.v3") != nullptr);
  CHECK(rep.find("var.v2")->pass);
  CHECK(rep.find("cov.v2.v3")->pass);
  CHECK(rep.find("var.vnu")->pass);
  CHECK(rep.find("projsq")->pass);
  CHECK(rep.find("projsq")->theory ==
        doctest::Approx(eigenvector_prediction(cfg.model.spiked, 1, 0.25).proj_sq_limit)
            .epsilon(1e-14));
  CHECK_THROWS_AS(run_eigenvector_clt(cfg, {{0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(run_eigenvector_clt(cfg, {{1, 5}}), std::invalid_argument);
}

TEST_CASE("subcritical runs walk to the bulk edge") {
  ExperimentConfig cfg;
  cfg.model.spiked = constant_correlation_model(4, 0.1);  // l1 = 1.3 < 2
  cfg.model.p = 150;
  cfg.n = 150;  // gamma = 1
  cfg.replicates = 40;
  const McReport rep = run_subcritical(cfg, {150, 300});

  CHECK(rep.find("edge.n300") != nullptr);
  CHECK(rep.find("projsq.n300") != nullptr);
  CHECK(rep.pass);
  const auto& traj = rep.extra["trajectory"];
  REQUIRE(traj.size() == 2);
  CHECK(traj[0]["n"] == 150);
  CHECK(traj[1]["n"] == 300);
  // Alignment decays with size.
  CHECK(traj[1]["mean_projsq"].get<double>() < traj[0]["mean_projsq"].get<double>());
}

TEST_CASE("covariance comparison report adds histograms") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 80;
  cfg.store_samples = false;
  const McReport rep = run_cov_vs_corr(cfg);
  CHECK(rep.kind == "cov-vs-corr");
  REQUIRE(rep.extra.contains("histogram"));
  const auto& h = rep.extra["histogram"];
  CHECK(h["edges"].size() == 41);
  long total = 0;
  for (const auto& c : h["corr"]) total += c.get<long>();
  CHECK(total == 80);
  CHECK_FALSE(rep.extra.contains("samples"));
}

TEST_CASE("resolvent diagnostic matches the limiting covariance") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 120;
  const McReport rep = run_k_diagnostic(cfg, 3000);

  REQUIRE(rep.find("wcov.1_1.1_1") != nullptr);
  CHECK(rep.find("wcov.1_1.1_1")->pass);
  CHECK(rep.find("wcov.1_2.1_2")->pass);
  CHECK(rep.find("wcov.2_2.2_2")->pass);
  CHECK(rep.find("wcov.1_1.2_2")->pass);
  CHECK(rep.find("wmean.1_1")->pass);
  const McTargetResult* lim = rep.find("klimit.n3000");
  REQUIRE(lim != nullptr);
  CHECK(lim->pass);

  // Spot-check one theory entry against the direct formula.
  const double theo = wmatrix_cov_entry(cfg.model.spiked, 1, 0.25, 1, 1, 1, 1);
  CHECK(rep.find("wcov.1_1.1_1")->theory == doctest::Approx(theo).epsilon(1e-13));
}

TEST_CASE("experiment validation") {
  ExperimentConfig cfg = small_config();
  cfg.replicates = 5;
  CHECK_THROWS_AS(run_eigenvalue_clt(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.model.p = 0;
  CHECK_THROWS_AS(run_eigenvalue_clt(cfg), std::invalid_argument);
  cfg = small_config();
  cfg.nus.clear();
  CHECK_THROWS_AS(run_eigenvalue_clt(cfg), std::invalid_argument);

  // The covariance pathway insists on unit population variances.
  cfg = small_config();
  Eigen::MatrixXd Sigma(2, 2);
  Sigma << 4.0, 1.6, 1.6, 1.0;
  cfg.model.spiked = build_model(Sigma, DistributionSpec::gaussian());
  cfg.cov_pathway = true;
  CHECK_THROWS_AS(run_eigenvalue_clt(cfg), unsupported_operation);

  CHECK_THROWS_AS(run_subcritical(small_config(), {}), std::invalid_argument);
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads(0) >= 1);
}
