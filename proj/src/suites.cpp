#include "spikedcorr/suites.hpp"

#include "spikedcorr/asymptotics.hpp"
#include "spikedcorr/cumulants.hpp"
#include "spikedcorr/model.hpp"
#include "spikedcorr/mp_law.hpp"
#include "spikedcorr/rng.hpp"
#include "spikedcorr/sampling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace spikedcorr {
namespace {

std::string fmtd(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.8g", x);
  return buf;
}

// Collects sub-check lines and the conjunction of their verdicts.
struct Checker {
  bool pass = true;
  std::vector<std::string> details;

  void note(const std::string& line) { details.push_back("    .    " + line); }

  void check(bool ok, const std::string& text) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "    ok   " : "    FAIL ") + text);
  }

  void close_abs(const std::string& what, double got, double want, double tol) {
    const double d = std::abs(got - want);
    check(std::isfinite(got) && d <= tol,
          what + ": got " + fmtd(got) + ", want " + fmtd(want) + " (abs tol " + fmtd(tol) + ")");
  }

  void close_rel(const std::string& what, double got, double want, double rel) {
    const double d = std::abs(got - want);
    const double tol = rel * std::max(std::abs(want), 1e-300);
    check(std::isfinite(got) && d <= tol,
          what + ": got " + fmtd(got) + ", want " + fmtd(want) + " (rel tol " + fmtd(rel) + ")");
  }

  // Adopts the pass/fail verdict a report target already carries.
  void target(const McReport& rep, const std::string& name) {
    const McTargetResult* t = rep.find(name);
    if (t == nullptr) {
      check(false, "target " + name + " missing from report");
      return;
    }
    std::string line = name + ": empirical " + fmtd(t->empirical) + ", theory " +
                       fmtd(t->theory) + ", " + t->tol_kind + " tol " + fmtd(t->tol);
    if (t->se > 0.0) line += ", se " + fmtd(t->se);
    check(t->pass, line);
  }

  void flag_info(const McReport& rep, const std::string& name) {
    const McTargetResult* t = rep.find(name);
    if (t == nullptr) return;
    std::string line = name + " = " + fmtd(t->empirical) + " (band " + fmtd(t->tol) + ")";
    for (const auto& f : t->flags) line += " [" + f + "]";
    note(line);
  }
};

void write_report(const SuiteOptions& opt, const std::string& stem, const McReport& rep) {
  if (opt.outdir.empty()) return;
  namespace fs = std::filesystem;
  fs::create_directories(opt.outdir);
  std::ofstream((fs::path(opt.outdir) / (stem + ".json"))) << rep.to_json();
  std::ofstream((fs::path(opt.outdir) / (stem + ".csv"))) << rep.to_csv();
}

ExperimentConfig base_cfg(const SuiteOptions& opt) {
  ExperimentConfig cfg;
  cfg.rng = RngSpec{opt.seed};
  cfg.threads = opt.threads;
  return cfg;
}

Eigen::MatrixXd ar1_matrix(int m, double r) {
  Eigen::MatrixXd S(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) S(i, j) = std::pow(r, std::abs(i - j));
  return S;
}

// ---------------------------------------------------------------- criterion 1

// Closed-form transforms against direct quadrature of the companion law, and
// the spike-map identities m(rho) = -1/l, 1 + c(rho) l = rho / (l rho_dot).
CriterionResult criterion_analytic(const SuiteOptions&) {
  Checker ck;
  const double gammas[] = {0.1, 0.25, 0.5, 1.0, 2.0, 4.0};
  const double ells[] = {1.4, 1.8, 2.5, 4.0, 6.5, 9.1};

  for (double g : gammas) {
    const double mass = companion_integrate([](double) { return 1.0; }, g);
    ck.close_abs("companion mass, gamma=" + fmtd(g), mass, 1.0, 1e-9);
    const double mean = companion_integrate([](double x) { return x; }, g);
    ck.close_abs("companion mean, gamma=" + fmtd(g), mean, g, 1e-8);
  }

  int spike_checks = 0;
  for (double g : gammas) {
    for (double l : ells) {
      if (l <= 1.0 + std::sqrt(g) + 0.05) continue;
      const double t = rho(l, g);
      const std::string tag_base = " at ell=" + fmtd(l) + ", gamma=" + fmtd(g);
      ck.close_abs("m(rho)+1/ell quadrature" + tag_base, stieltjes_m_quadrature(t, g),
                   -1.0 / l, 1e-7);
      ck.close_abs("m(rho)+1/ell closed form" + tag_base, stieltjes_m(t, g), -1.0 / l, 1e-12);
      // c(t) quadrature sharpens slowly against the edge; keep a margin.
      if (l > 1.0 + std::sqrt(g) + 0.15) {
        const double lhs = 1.0 + c_integral_quadrature(t, g) * l;
        ck.close_abs("1+c(rho)ell identity" + tag_base, lhs, t / (l * rho_dot(l, g)), 1e-7);
        ck.close_abs("c closed form vs quadrature" + tag_base, c_integral(t, g),
                     c_integral_quadrature(t, g), 1e-7);
      }
      const double h = 1e-5 * l;
      const double num = (rho(l + h, g) - rho(l - h, g)) / (2.0 * h);
      ck.close_abs("rho_dot vs numeric derivative" + tag_base, rho_dot(l, g), num, 1e-6);
      ++spike_checks;
    }
  }
  ck.check(spike_checks >= 12, "supercritical (ell, gamma) pairs covered: " +
                                   std::to_string(spike_checks));

  return {1, "analytic-identities", ck.pass, 0.0, std::move(ck.details)};
}

// ---------------------------------------------------------------- criterion 2

// Tensor pathway equals the Gaussian closed forms on randomized correlation
// models, eigenvalue variance and eigenvector covariance alike, and the
// adjustment tensor matches its pair-correlation form.
CriterionResult criterion_dual_pathway(const SuiteOptions& opt) {
  Checker ck;
  PhiloxStream st(opt.seed, stream_id(0, 0xC2));
  const int want = 50;
  int done = 0;
  double worst_var = 0.0, worst_vec = 0.0, worst_kappa = 0.0, worst_kcheck = 0.0;

  for (int attempt = 0; attempt < 8 * want && done < want; ++attempt) {
    const int m = 2 + attempt % 7;
    Eigen::MatrixXd A(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) A(i, j) = st.next_gaussian();
    Eigen::MatrixXd S = A * A.transpose() + 0.05 * Eigen::MatrixXd::Identity(m, m);
    const SpikedModel model = build_model(S, DistributionSpec::gaussian());
    if (model.L(0) <= 1.15 || !model.is_simple(1)) continue;
    const double gamma =
        std::clamp(0.25 * (model.L(0) - 1.0) * (model.L(0) - 1.0), 0.02, 3.0);

    const EigenvaluePrediction ev = eigenvalue_prediction(model, 1, gamma);
    const double closed = eigenvalue_variance_gaussian(model, 1, gamma);
    worst_var = std::max(worst_var, std::abs(ev.var_limit - closed) / closed);

    const EigenvectorPrediction vec = eigenvector_prediction(model, 1, gamma);
    const Eigen::MatrixXd S1 = eigenvector_covariance_gaussian(model, 1, gamma);
    const Eigen::MatrixXd S2 = eigenvector_covariance_gaussian_entrywise(model, 1, gamma);
    const double scale = std::max(1.0, S1.cwiseAbs().maxCoeff());
    worst_vec = std::max(worst_vec, (vec.Sigma - S1).cwiseAbs().maxCoeff() / scale);
    worst_vec = std::max(worst_vec, (S1 - S2).cwiseAbs().maxCoeff() / scale);

    Tensor4 zero(m);
    worst_kappa = std::max(worst_kappa, kappa_tensor(model).max_abs_diff(zero));
    worst_kcheck = std::max(
        worst_kcheck,
        kcheck_tensor(model).max_abs_diff(kcheck_gaussian_closed_form(model.gamma_mat)));
    ++done;
  }

  ck.check(done == want, "random Gaussian models exercised: " + std::to_string(done));
  ck.check(worst_var <= 1e-10,
           "eigenvalue variance, tensor vs closed form: max rel diff " + fmtd(worst_var));
  ck.check(worst_vec <= 1e-10,
           "eigenvector covariance, tensor vs both closed forms: max diff " + fmtd(worst_vec));
  ck.check(worst_kappa <= 1e-12,
           "fourth cumulant vanishes on Gaussian models: max " + fmtd(worst_kappa));
  ck.check(worst_kcheck <= 1e-12,
           "adjustment tensor vs pair-correlation form: max diff " + fmtd(worst_kcheck));

  return {2, "dual-pathway-oracle", ck.pass, 0.0, std::move(ck.details)};
}

// ---------------------------------------------------------------- criterion 3

// Empirical cumulant tensors from large non-Gaussian samples match the model
// tensors componentwise within four batch standard errors.
CriterionResult criterion_cumulant_mc(const SuiteOptions& opt) {
  Checker ck;
  const int n = opt.smoke ? 200000 : 1000000;

  struct Setup {
    const char* label;
    SpikedModel model;
  };
  const Eigen::MatrixXd Sa = constant_correlation_matrix(3, 0.5);
  const Eigen::MatrixXd Sb = ar1_matrix(4, 0.6);
  const Setup setups[] = {
      {"equicorr m=3 r=0.5, Rademacher mixing",
       build_model(Sa, DistributionSpec::linear_mixing_sqrt(Sa, InnovationFamily::Rademacher))},
      {"ar1 m=4 r=0.6, Uniform mixing",
       build_model(Sb, DistributionSpec::linear_mixing_sqrt(Sb, InnovationFamily::Uniform))},
  };

  for (int s = 0; s < 2; ++s) {
    const SpikedModel& model = setups[s].model;
    const Eigen::MatrixXd X =
        sample_signal(model, n, RngSpec{opt.seed}, stream_id(0xC300 + s, kStreamData));
    const EmpiricalCumulants emp =
        empirical_cumulants(X, model.sigma_sq, model.gamma_mat);
    const Tensor4 kt = kappa_tensor(model);
    const Tensor4 kc = kcheck_tensor(model);

    int bad_kappa = 0, bad_kcheck = 0;
    double zmax_kappa = 0.0, zmax_kcheck = 0.0;
    const int m = model.m;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          for (int l = 0; l < m; ++l) {
            const double dk = std::abs(emp.kappa(i, j, k, l) - kt(i, j, k, l));
            const double tk = std::max(4.0 * emp.se_kappa(i, j, k, l), 1e-10);
            if (dk > tk) ++bad_kappa;
            zmax_kappa = std::max(zmax_kappa, dk / std::max(emp.se_kappa(i, j, k, l), 1e-12));
            const double dc = std::abs(emp.kcheck(i, j, k, l) - kc(i, j, k, l));
            const double tc = std::max(4.0 * emp.se_kcheck(i, j, k, l), 1e-10);
            if (dc > tc) ++bad_kcheck;
            zmax_kcheck =
                std::max(zmax_kcheck, dc / std::max(emp.se_kcheck(i, j, k, l), 1e-12));
          }

    const std::string tag = std::string(setups[s].label) + ", n=" + std::to_string(n);
    ck.check(bad_kappa == 0, "kappa within 4 se componentwise (" + tag +
                                 "): violations " + std::to_string(bad_kappa) +
                                 ", max |z| " + fmtd(zmax_kappa));
    ck.check(bad_kcheck == 0, "kcheck within 4 se componentwise (" + tag +
                                  "): violations " + std::to_string(bad_kcheck) +
                                  ", max |z| " + fmtd(zmax_kcheck));
  }

  return {3, "cumulant-mc-oracle", ck.pass, 0.0, std::move(ck.details)};
}

// ---------------------------------------------------------------- criterion 4

// Eigenvalue CLT on the constant-correlation worked example, correlation and
// covariance pathways, with the variance-reduction ratio.
CriterionResult criterion_eigenvalue_clt(const SuiteOptions& opt) {
  Checker ck;
  const SpikedModel model = constant_correlation_model(10, 0.9);

  const EigenvaluePrediction ev = eigenvalue_prediction(model, 1, 0.5);
  ck.close_abs("rho(9.1, 0.5)", ev.rho_limit, 9.661728395061728, 1e-12);
  ck.close_abs("rho_dot(9.1, 0.5)", ev.rho_dot_limit, 0.9923792104862063, 1e-12);
  ck.close_abs("corr-spike variance", ev.var_limit, 2.720484315, 1e-6);
  ck.close_abs("cov-spike variance", ev.term_base, 2.0 * 9.1 * 9.1 * ev.rho_dot_limit, 1e-12);
  ck.close_abs("variance ratio corr/cov", ev.var_limit / ev.term_base, 0.01655220241, 1e-8);
  const VarianceReduction vr = variance_reduction_report(model, 1, 0.5);
  ck.check(vr.reduced && vr.guaranteed,
           "variance reduction certified: delta " + fmtd(vr.delta));

  ExperimentConfig cfg = base_cfg(opt);
  cfg.model = FullModel{model, 500};
  cfg.n = 1000;
  cfg.replicates = opt.smoke ? 200 : 2000;
  cfg.var_rel_tol = opt.smoke ? 0.0 : 0.10;
  cfg.ratio_threshold = 0.05;
  cfg.cov_pathway = true;
  cfg.store_samples = false;
  const McReport rep = run_eigenvalue_clt(cfg);

  ck.target(rep, "var.nu1.corr");
  ck.target(rep, "mean.nu1.corr");
  ck.target(rep, "var.nu1.cov");
  ck.target(rep, "mean.nu1.cov");
  ck.target(rep, "ratio.nu1");
  ck.flag_info(rep, "ks.nu1.corr");
  ck.flag_info(rep, "ks.nu1.cov");
  write_report(opt, "c04_eigenvalue_clt", rep);

  return {4, "eigenvalue-clt", ck.pass, 0.0, std::move(ck.details)};
}

// ---------------------------------------------------------------- criterion 5

// Eigenvalue CLT with non-Gaussian innovations; the kurtosis term is active.
// The mixing is the Cholesky factor on purpose: with the symmetric square
// root of an equicorrelation matrix the kurtosis term cancels against the
// adjustment change exactly (the spike eigenvector is an eigenvector of the
// mixing), so the total would coincide with the Gaussian value.
CriterionResult criterion_nongaussian_clt(const SuiteOptions& opt) {
  Checker ck;
  const Eigen::MatrixXd S = constant_correlation_matrix(4, 0.8);
  const Eigen::MatrixXd C = Eigen::LLT<Eigen::MatrixXd>(S).matrixL();
  const SpikedModel model =
      build_model(S, DistributionSpec::linear_mixing(C, InnovationFamily::Rademacher));

  const EigenvaluePrediction ev = eigenvalue_prediction(model, 1, 0.25);
  ck.check(std::abs(ev.term_kurtosis) > 1e-3,
           "kurtosis term active: " + fmtd(ev.term_kurtosis) + " of total " +
               fmtd(ev.var_limit));
  const SpikedModel gauss = build_model(S, DistributionSpec::gaussian());
  const double gauss_var = eigenvalue_variance_gaussian(gauss, 1, 0.25);
  ck.check(std::abs(ev.var_limit - gauss_var) > 1e-3,
           "variance differs from the Gaussian-innovation value: " + fmtd(ev.var_limit) +
               " vs " + fmtd(gauss_var));

  ExperimentConfig cfg = base_cfg(opt);
  cfg.model = FullModel{model, 500, InnovationFamily::Rademacher};
  cfg.n = 2000;
  cfg.replicates = opt.smoke ? 150 : 2000;
  cfg.store_samples = false;
  const McReport rep = run_eigenvalue_clt(cfg);

  ck.target(rep, "var.nu1.corr");
  ck.target(rep, "mean.nu1.corr");
  ck.flag_info(rep, "ks.nu1.corr");
  write_report(opt, "c05_nongaussian_clt", rep);

  return {5, "nongaussian-eigenvalue-clt", ck.pass, 0.0, std::move(ck.details)};
}

// ---------------------------------------------------------------- criterion 6

// Eigenvector CLT: variance on the worked example, plus a model with
// genuinely correlated coordinates where the cross-covariance has a
// resolvable negative sign.
CriterionResult criterion_eigenvector_clt(const SuiteOptions& opt) {
  Checker ck;

  {
    const SpikedModel model = constant_correlation_model(10, 0.9);
    const EigenvectorPrediction pred = eigenvector_prediction(model, 1, 0.5);
    ck.close_abs("Sigma_1(2,2), worked example", pred.Sigma(1, 1), 0.00057615029, 1e-9);
    ck.close_abs("squared projection limit", pred.proj_sq_limit, 0.9346827448, 1e-8);
    const Eigen::MatrixXd cov = eigenvector_covariance_cov_pathway(model, 1, 0.5);
    ck.close_abs("covariance-pathway benchmark Sigma(2,2)", cov(1, 1), 0.011320842, 1e-8);
    ck.close_abs("corr/cov eigenvector variance ratio", pred.Sigma(1, 1) / cov(1, 1),
                 0.050892885, 1e-7);

    ExperimentConfig cfg = base_cfg(opt);
    cfg.model = FullModel{model, 500};
    cfg.n = 1000;
    cfg.replicates = opt.smoke ? 200 : 1500;
    cfg.store_samples = false;
    const McReport rep = run_eigenvector_clt(cfg, {{2, 2}});
    ck.target(rep, "var.v2");
    ck.target(rep, "var.vnu");
    ck.target(rep, "projsq");
    write_report(opt, "c06a_eigenvector_equicorr", rep);
  }

  {
    const SpikedModel model = ar1_block_model(10, 0.95, 10);
    ExperimentConfig cfg = base_cfg(opt);
    cfg.model = FullModel{model, 500};
    cfg.n = 1000;
    cfg.replicates = opt.smoke ? 100 : 800;
    cfg.store_samples = false;
    const McReport rep = run_eigenvector_clt(cfg, {{2, 2}, {2, 4}});
    ck.target(rep, "var.v2");
    ck.target(rep, "cov.v2.v4");
    const McTargetResult* cross = rep.find("cov.v2.v4");
    if (cross != nullptr) {
      ck.close_rel("cross covariance Sigma_1(2,4)", cross->theory, -0.00195756, 1e-3);
      ck.check(cross->empirical < 0.0 && cross->se > 0.0 &&
                   std::abs(cross->theory) > 4.0 * cross->se,
               "negative sign resolvable: empirical " + fmtd(cross->empirical) +
                   ", |theory|/se " +
                   fmtd(std::abs(cross->theory) / std::max(cross->se, 1e-300)));
    }
    write_report(opt, "c06b_eigenvector_ar1", rep);
  }

  return {6, "eigenvector-clt", ck.pass, 0.0, std::move(ck.details)};
}

// ---------------------------------------------------------------- criterion 7

// Subcritical spikes collapse: top eigenvalue to the bulk edge, projection
// onto the population spike to zero.
CriterionResult criterion_subcritical(const SuiteOptions& opt) {
  Checker ck;
  const SpikedModel model = constant_correlation_model(4, 0.1);

  const SubcriticalLimits lim = subcritical_limits(1.0);
  ck.close_abs("bulk edge at gamma=1", lim.eigenvalue_limit, 4.0, 1e-15);
  ck.close_abs("projection limit", lim.projection_limit, 0.0, 1e-15);

  ExperimentConfig cfg = base_cfg(opt);
  cfg.model = FullModel{model, 250};
  cfg.n = 250;
  cfg.replicates = opt.smoke ? 30 : 100;
  cfg.store_samples = false;
  const std::vector<int> grid = opt.smoke ? std::vector<int>{150, 300}
                                          : std::vector<int>{250, 500, 1000, 2000};
  const McReport rep = run_subcritical(cfg, grid);

  ck.target(rep, "edge.n" + std::to_string(grid.back()));
  ck.target(rep, "projsq.n" + std::to_string(grid.back()));
  const auto& rows = rep.extra.at("trajectory");
  const double first = rows.front().at("mean_projsq").get<double>();
  const double last = rows.back().at("mean_projsq").get<double>();
  ck.check(last < first, "squared projection decays along the grid: " + fmtd(first) +
                             " -> " + fmtd(last));
  write_report(opt, "c07_subcritical", rep);

  return {7, "subcritical", ck.pass, 0.0, std::move(ck.details)};
}

// ---------------------------------------------------------------- criterion 8

// Resolvent diagnostic: W-matrix entry covariances against the limit
// formulas and the almost-sure limit of K at the spike location.
CriterionResult criterion_k_diagnostic(const SuiteOptions& opt) {
  Checker ck;
  const SpikedModel model = constant_correlation_model(2, 0.8);

  const CltParams par = clt_params(1.8, 0.25);
  ck.close_abs("theta(1.8, 0.25)", par.theta, 2.826923076923077, 1e-12);
  ck.close_abs("omega(1.8, 0.25)", par.omega, 1.72265625, 1e-12);
  ck.close_abs("Var W_11", wmatrix_cov_entry(model, 1, 0.25, 1, 1, 1, 1), 2.208533653846154,
               1e-9);
  ck.close_abs("Cov(W_11, W_22)", wmatrix_cov_entry(model, 1, 0.25, 1, 1, 2, 2),
               1.413461538461538, 1e-9);

  ExperimentConfig cfg = base_cfg(opt);
  cfg.model = FullModel{model, 500};
  cfg.n = 2000;
  cfg.replicates = opt.smoke ? 120 : 1600;
  cfg.store_samples = false;
  const int limit_n = opt.smoke ? 3000 : 10000;
  const McReport rep = run_k_diagnostic(cfg, limit_n);

  int cov_targets = 0, mean_targets = 0;
  bool cov_pass = true, mean_pass = true;
  for (const auto& t : rep.targets) {
    if (t.name.rfind("wcov.", 0) == 0) {
      ++cov_targets;
      cov_pass = cov_pass && t.pass;
    } else if (t.name.rfind("wmean.", 0) == 0) {
      ++mean_targets;
      mean_pass = mean_pass && t.pass;
    }
  }
  ck.check(cov_targets >= 6 && cov_pass,
           "all " + std::to_string(cov_targets) + " W-covariance targets within tolerance");
  ck.check(mean_targets >= 3 && mean_pass,
           "all " + std::to_string(mean_targets) + " W-mean targets within tolerance");
  ck.target(rep, "wcov.1_1.1_1");
  ck.target(rep, "wcov.1_1.2_2");
  ck.target(rep, "klimit.n" + std::to_string(limit_n));
  write_report(opt, "c08_k_diagnostic", rep);

  return {8, "k-diagnostic", ck.pass, 0.0, std::move(ck.details)};
}

// ---------------------------------------------------------------- criterion 9

// Concentration of normalized quadratic forms around rho tr(B)/n across
// randomized cases, and exact invariances of the sample correlation matrix.
CriterionResult criterion_concentration(const SuiteOptions& opt) {
  Checker ck;
  const int cases = opt.smoke ? 60 : 200;
  const int n = 1200;
  const int reps = 16;
  const InnovationFamily fams[] = {InnovationFamily::Gaussian, InnovationFamily::Rademacher,
                                   InnovationFamily::Uniform};

  int fail_cases = 0;
  double zmax = 0.0;
  for (int c = 0; c < cases; ++c) {
    PhiloxStream st(opt.seed, stream_id(static_cast<std::uint64_t>(c), 0xC9));
    const double corr = -0.9 + 1.8 * (cases == 1 ? 0.5 : double(c) / (cases - 1));
    const InnovationFamily fam = fams[c % 3];
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = st.next_uniform_sym();
    const double target = corr * b.sum() / n;

    std::vector<double> forms(reps);
    Eigen::VectorXd x(n), y(n);
    for (int r = 0; r < reps; ++r) {
      for (int i = 0; i < n; ++i) {
        const double z1 = st.next_innovation(fam, 0.5);
        const double z2 = st.next_innovation(fam, 0.5);
        x(i) = z1;
        y(i) = corr * z1 + std::sqrt(1.0 - corr * corr) * z2;
      }
      forms[r] = normalized_bilinear_form(x, y, b);
    }
    const MomentSummary ms = moment_summary(forms);
    const double tol = 4.0 * ms.se_mean + 8.0 / n;
    const double dev = std::abs(ms.mean - target);
    if (dev > tol) ++fail_cases;
    zmax = std::max(zmax, dev / std::max(ms.se_mean, 1e-12));
  }
  ck.check(fail_cases <= cases / 100,
           "quadratic-form concentration, " + std::to_string(cases) + " randomized cases: " +
               std::to_string(fail_cases) + " outside 4 se (max |z| " + fmtd(zmax) + ")");

  const SpikedModel small = constant_correlation_model(6, 0.3);
  double worst_scale = 0.0, worst_diag = 0.0, worst_sym = 0.0;
  const int invariance_cases = 40;
  for (int c = 0; c < invariance_cases; ++c) {
    const Eigen::MatrixXd X =
        sample_signal(small, 40, RngSpec{opt.seed}, stream_id(0xC900 + c, kStreamData))
            .transpose();
    PhiloxStream st(opt.seed, stream_id(0xC900 + c, 0xD));
    Eigen::VectorXd d(6);
    for (int i = 0; i < 6; ++i) d(i) = 0.1 + 5.0 * st.next_unit();
    const Eigen::MatrixXd R1 = sample_correlation(X);
    const Eigen::MatrixXd R2 = sample_correlation((d.asDiagonal() * X).eval());
    worst_scale = std::max(worst_scale, (R1 - R2).cwiseAbs().maxCoeff());
    worst_diag = std::max(
        worst_diag, (R1.diagonal() - Eigen::VectorXd::Ones(6)).cwiseAbs().maxCoeff());
    worst_sym = std::max(worst_sym, (R1 - R1.transpose()).cwiseAbs().maxCoeff());
  }
  ck.check(worst_scale <= 1e-12,
           "correlation invariant to row scaling: max diff " + fmtd(worst_scale));
  ck.check(worst_diag == 0.0, "unit diagonal exact: max dev " + fmtd(worst_diag));
  ck.check(worst_sym == 0.0, "symmetry exact: max dev " + fmtd(worst_sym));

  return {9, "concentration-properties", ck.pass, 0.0, std::move(ck.details)};
}

// --------------------------------------------------------------- criterion 10

// Reports are byte-identical across thread counts and across repeated runs.
CriterionResult criterion_determinism(const SuiteOptions& opt) {
  Checker ck;
  const SpikedModel model = constant_correlation_model(2, 0.8);

  ExperimentConfig cfg = base_cfg(opt);
  cfg.model = FullModel{model, 60};
  cfg.n = 240;
  cfg.replicates = 40;
  cfg.cov_pathway = true;

  cfg.threads = 1;
  const McReport e1 = run_eigenvalue_clt(cfg);
  cfg.threads = 4;
  const McReport e4 = run_eigenvalue_clt(cfg);
  cfg.threads = 1;
  const McReport e1b = run_eigenvalue_clt(cfg);
  ck.check(e1.to_json() == e4.to_json() && e1.to_csv() == e4.to_csv(),
           "eigenvalue report identical, 1 vs 4 workers (" +
               std::to_string(e1.to_json().size()) + " JSON bytes)");
  ck.check(e1.to_json() == e1b.to_json(), "eigenvalue report identical across reruns");

  cfg.cov_pathway = false;
  cfg.threads = 1;
  const McReport v1 = run_eigenvector_clt(cfg, {{1, 2}, {2, 2}});
  cfg.threads = 3;
  const McReport v3 = run_eigenvector_clt(cfg, {{1, 2}, {2, 2}});
  ck.check(v1.to_json() == v3.to_json() && v1.to_csv() == v3.to_csv(),
           "eigenvector report identical, 1 vs 3 workers (" +
               std::to_string(v1.to_json().size()) + " JSON bytes)");

  cfg.replicates = 30;
  cfg.threads = 1;
  const McReport k1 = run_k_diagnostic(cfg, 500);
  cfg.threads = 4;
  const McReport k4 = run_k_diagnostic(cfg, 500);
  ck.check(k1.to_json() == k4.to_json() && k1.to_csv() == k4.to_csv(),
           "resolvent report identical, 1 vs 4 workers (" +
               std::to_string(k1.to_json().size()) + " JSON bytes)");

  write_report(opt, "c10_determinism", e1);

  return {10, "determinism", ck.pass, 0.0, std::move(ck.details)};
}

} // namespace

CriterionResult run_criterion(int id, const SuiteOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  CriterionResult r;
  switch (id) {
    case 1: r = criterion_analytic(opt); break;
    case 2: r = criterion_dual_pathway(opt); break;
    case 3: r = criterion_cumulant_mc(opt); break;
    case 4: r = criterion_eigenvalue_clt(opt); break;
    case 5: r = criterion_nongaussian_clt(opt); break;
    case 6: r = criterion_eigenvector_clt(opt); break;
    case 7: r = criterion_subcritical(opt); break;
    case 8: r = criterion_k_diagnostic(opt); break;
    case 9: r = criterion_concentration(opt); break;
    case 10: r = criterion_determinism(opt); break;
    default:
      throw std::invalid_argument("run_criterion: id must be 1..10, got " + std::to_string(id));
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<CriterionResult> run_suite(const SuiteOptions& opt) {
  std::vector<CriterionResult> out;
  out.reserve(10);
  for (int id = 1; id <= 10; ++id) out.push_back(run_criterion(id, opt));
  return out;
}

std::string format_result_line(const CriterionResult& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "criterion %2d  %-28s %s  %8.1fs", r.id, r.name.c_str(),
                r.pass ? "PASS" : "FAIL", r.seconds);
  return buf;
}

} // namespace spikedcorr
