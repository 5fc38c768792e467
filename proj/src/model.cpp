#include "spikedcorr/model.hpp"

#include "spikedcorr/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace spikedcorr {

namespace {

constexpr int kMaxSignalDim = 64;

void require_finite(const Eigen::MatrixXd& M, const char* what) {
  if (!M.allFinite())
    throw std::invalid_argument(std::string(what) + " has non-finite entries");
}

// Deterministic eigendecomposition convention: eigenvalues descending
// (ties keep solver order), each eigenvector's largest-magnitude entry made
// positive (ties broken by lowest index).
void ordered_eigs(const Eigen::MatrixXd& S, Eigen::MatrixXd& vecs, Eigen::VectorXd& vals) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success)
    throw numerical_error("eigendecomposition failed to converge");
  const int m = static_cast<int>(S.rows());
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  vecs.resize(m, m);
  vals.resize(m);
  for (int c = 0; c < m; ++c) {
    vals(c) = es.eigenvalues()(idx[c]);
    Eigen::VectorXd v = es.eigenvectors().col(idx[c]);
    int arg = 0;
    for (int i = 1; i < m; ++i)
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    if (v(arg) < 0.0) v = -v;
    vecs.col(c) = v;
  }
}

SpikedModel build_model_impl(const Eigen::MatrixXd& Sigma, DistributionSpec dist,
                             bool allow_singular) {
  if (Sigma.rows() != Sigma.cols())
    throw std::invalid_argument("covariance matrix must be square");
  const int m = static_cast<int>(Sigma.rows());
  if (m < 1) throw std::invalid_argument("signal dimension must be at least 1");
  if (m > kMaxSignalDim)
    throw std::invalid_argument("signal dimension capped at 64");
  require_finite(Sigma, "covariance matrix");
  const double scale = Sigma.cwiseAbs().maxCoeff();
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
    throw std::invalid_argument("covariance matrix must be symmetric");

  SpikedModel model;
  model.m = m;
  model.sigma = 0.5 * (Sigma + Sigma.transpose());
  model.sigma_sq = model.sigma.diagonal();
  for (int i = 0; i < m; ++i)
    if (!(model.sigma_sq(i) > 0.0))
      throw std::invalid_argument("covariance diagonal must be positive");

  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.sigma, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo < -1e-10 * std::max(1.0, hi))
      throw std::invalid_argument("covariance matrix must be positive semidefinite");
    if (!allow_singular && lo <= 1e-12 * std::max(1.0, hi))
      throw std::invalid_argument("covariance matrix must be positive definite");
    model.singular = lo <= 1e-12 * std::max(1.0, hi);
  }

  const Eigen::VectorXd dinv = model.sigma_sq.cwiseSqrt().cwiseInverse();
  model.gamma_mat = dinv.asDiagonal() * model.sigma * dinv.asDiagonal();
  model.gamma_mat = 0.5 * (model.gamma_mat + model.gamma_mat.transpose()).eval();
  model.gamma_mat.diagonal().setOnes();

  ordered_eigs(model.gamma_mat, model.P, model.L);
  const double resid =
      (model.gamma_mat * model.P - model.P * model.L.asDiagonal()).cwiseAbs().maxCoeff();
  if (resid > 1e-10 * std::max(1.0, model.L.cwiseAbs().maxCoeff()))
    throw numerical_error("correlation eigenpairs fail the residual bound");

  if (dist.kind == DistributionSpec::Kind::LinearMixing) {
    if (dist.mixing.rows() != m || dist.mixing.cols() != m)
      throw std::invalid_argument("mixing matrix must be m x m");
    require_finite(dist.mixing, "mixing matrix");
    const Eigen::MatrixXd AAt = dist.mixing * dist.mixing.transpose();
    if ((AAt - model.sigma).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, scale))
      throw std::invalid_argument("mixing matrix does not factor the covariance");
  }
  dist.kurtosis = excess_kurtosis(dist.family, dist.two_point_p);
  if (dist.kind == DistributionSpec::Kind::Gaussian) {
    dist.family = InnovationFamily::Gaussian;
    dist.kurtosis = 0.0;
  }
  model.dist = std::move(dist);
  return model;
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  if (es.info() != Eigen::Success)
    throw numerical_error("eigendecomposition failed to converge");
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace

const char* family_name(InnovationFamily f) {
  switch (f) {
    case InnovationFamily::Gaussian: return "gaussian";
    case InnovationFamily::Rademacher: return "rademacher";
    case InnovationFamily::Uniform: return "uniform";
    case InnovationFamily::TwoPointAsymmetric: return "two_point";
  }
  throw std::invalid_argument("unknown innovation family");
}

InnovationFamily family_from_name(const std::string& s) {
  if (s == "gaussian") return InnovationFamily::Gaussian;
  if (s == "rademacher") return InnovationFamily::Rademacher;
  if (s == "uniform") return InnovationFamily::Uniform;
  if (s == "two_point" || s == "twopoint") return InnovationFamily::TwoPointAsymmetric;
  throw std::invalid_argument("unknown innovation family: " + s);
}

double excess_kurtosis(InnovationFamily family, double two_point_p) {
  switch (family) {
    case InnovationFamily::Gaussian: return 0.0;
    case InnovationFamily::Rademacher: return -2.0;
    case InnovationFamily::Uniform: return -1.2;
    case InnovationFamily::TwoPointAsymmetric: {
      const double p = two_point_p;
      if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("two-point probability must lie in (0,1)");
      const double q = 1.0 - p;
      // Standardized two-point law: alpha = sqrt(q/p) w.p. p, -sqrt(p/q) w.p. q.
      return q * q / p + p * p / q - 3.0;
    }
  }
  throw std::invalid_argument("unknown innovation family");
}

DistributionSpec DistributionSpec::gaussian() {
  DistributionSpec d;
  d.kind = Kind::Gaussian;
  d.family = InnovationFamily::Gaussian;
  d.kurtosis = 0.0;
  return d;
}

DistributionSpec DistributionSpec::linear_mixing(Eigen::MatrixXd A, InnovationFamily family,
                                                 double two_point_p) {
  DistributionSpec d;
  d.kind = Kind::LinearMixing;
  d.mixing = std::move(A);
  d.family = family;
  d.two_point_p = two_point_p;
  d.kurtosis = excess_kurtosis(family, two_point_p);
  return d;
}

DistributionSpec DistributionSpec::linear_mixing_sqrt(const Eigen::MatrixXd& Sigma,
                                                      InnovationFamily family,
                                                      double two_point_p) {
  return linear_mixing(symmetric_sqrt(Sigma), family, two_point_p);
}

double SpikedModel::ell(int nu) const {
  if (nu < 1 || nu > m) throw std::invalid_argument("spike index out of range");
  return L(nu - 1);
}

Eigen::VectorXd SpikedModel::p_vec(int nu) const {
  if (nu < 1 || nu > m) throw std::invalid_argument("spike index out of range");
  return P.col(nu - 1);
}

bool SpikedModel::is_simple(int nu) const {
  if (nu < 1 || nu > m) throw std::invalid_argument("spike index out of range");
  if (m == 1) return true;
  double gap = std::numeric_limits<double>::infinity();
  for (int k = 0; k < m; ++k)
    if (k != nu - 1) gap = std::min(gap, std::abs(L(nu - 1) - L(k)));
  return gap > 1e-8 * L(0);
}

bool SpikedModel::is_gaussian() const {
  return dist.kind == DistributionSpec::Kind::Gaussian ||
         dist.family == InnovationFamily::Gaussian;
}

SpikedModel build_model(const Eigen::MatrixXd& Sigma, DistributionSpec dist) {
  return build_model_impl(Sigma, std::move(dist), false);
}

Eigen::MatrixXd constant_correlation_matrix(int m, double r) {
  if (m < 1) throw std::invalid_argument("signal dimension must be at least 1");
  if (!(r > -1.0 / std::max(1, m - 1) && r < 1.0))
    throw std::invalid_argument("constant correlation out of the valid range");
  Eigen::MatrixXd S = Eigen::MatrixXd::Constant(m, m, r);
  S.diagonal().setOnes();
  return S;
}

SpikedModel constant_correlation_model(int m, double r, DistributionSpec dist) {
  return build_model(constant_correlation_matrix(m, r), std::move(dist));
}

SpikedModel two_group_model(int m, double r, InnovationFamily family) {
  if (m < 2 || m % 2 != 0)
    throw std::invalid_argument("two-group dimension must be even and at least 2");
  if (!(r > 0.0 && r < 1.0))
    throw std::invalid_argument("two-group correlation must lie in (0,1)");
  const int h = m / 2;
  // Perfect correlation within each group, -r across: xi has rank 2, driven
  // by two independent innovations through the mixing rows below.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < h; ++i) A(i, 0) = 1.0;
  for (int i = h; i < m; ++i) {
    A(i, 0) = -r;
    A(i, 1) = std::sqrt(1.0 - r * r);
  }
  const Eigen::MatrixXd Sigma = A * A.transpose();
  DistributionSpec dist = DistributionSpec::linear_mixing(A, family);
  return build_model_impl(Sigma, std::move(dist), true);
}

SpikedModel ar1_block_model(int block, double r, int total_m, DistributionSpec dist) {
  if (block < 1 || total_m < block)
    throw std::invalid_argument("ar1 block must satisfy 1 <= block <= m");
  if (!(r > -1.0 && r < 1.0))
    throw std::invalid_argument("ar1 correlation must lie in (-1,1)");
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(total_m, total_m);
  for (int i = 0; i < block; ++i)
    for (int j = 0; j < block; ++j) S(i, j) = std::pow(r, std::abs(i - j));
  return build_model(S, std::move(dist));
}

std::string model_to_json(const SpikedModel& model) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["m"] = model.m;
  j["sigma"] = std::vector<std::vector<double>>();
  for (int i = 0; i < model.m; ++i) {
    std::vector<double> row(model.m);
    for (int k = 0; k < model.m; ++k) row[k] = model.sigma(i, k);
    j["sigma"].push_back(row);
  }
  j["singular"] = model.singular;
  nlohmann::json d;
  d["kind"] = model.dist.kind == DistributionSpec::Kind::Gaussian ? "gaussian" : "linear_mixing";
  d["family"] = family_name(model.dist.family);
  d["two_point_p"] = model.dist.two_point_p;
  d["kurtosis"] = model.dist.kurtosis;
  if (model.dist.kind == DistributionSpec::Kind::LinearMixing) {
    d["mixing"] = std::vector<std::vector<double>>();
    for (int i = 0; i < model.m; ++i) {
      std::vector<double> row(model.m);
      for (int k = 0; k < model.m; ++k) row[k] = model.dist.mixing(i, k);
      d["mixing"].push_back(row);
    }
  }
  j["dist"] = d;
  return j.dump();
}

SpikedModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("model JSON is malformed: ") + e.what());
  }
  try {
    const int m = j.at("m").get<int>();
    if (m < 1 || m > kMaxSignalDim) throw std::invalid_argument("model dimension out of range");
    Eigen::MatrixXd Sigma(m, m);
    const auto& rows = j.at("sigma");
    if (static_cast<int>(rows.size()) != m)
      throw std::invalid_argument("sigma row count mismatch");
    for (int i = 0; i < m; ++i) {
      if (static_cast<int>(rows[i].size()) != m)
        throw std::invalid_argument("sigma column count mismatch");
      for (int k = 0; k < m; ++k) Sigma(i, k) = rows[i][k].get<double>();
    }
    DistributionSpec dist = DistributionSpec::gaussian();
    if (j.contains("dist")) {
      const auto& d = j["dist"];
      const std::string kind = d.value("kind", "gaussian");
      const InnovationFamily fam = family_from_name(d.value("family", "gaussian"));
      const double tp = d.value("two_point_p", 0.5);
      if (kind == "linear_mixing") {
        Eigen::MatrixXd A(m, m);
        const auto& arows = d.at("mixing");
        for (int i = 0; i < m; ++i)
          for (int k = 0; k < m; ++k) A(i, k) = arows[i][k].get<double>();
        dist = DistributionSpec::linear_mixing(std::move(A), fam, tp);
      } else if (kind != "gaussian") {
        throw std::invalid_argument("unknown distribution kind: " + kind);
      }
    }
    const bool singular = j.value("singular", false);
    return build_model_impl(Sigma, std::move(dist), singular);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("model JSON is malformed: ") + e.what());
  }
}

SpikedModel model_from_string(const std::string& spec) {
  if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".json") {
    std::ifstream in(spec);
    if (!in) throw std::invalid_argument("cannot open model file: " + spec);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
  }
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("malformed model parameter: " + item);
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  auto get_num = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end())
      throw std::invalid_argument("model '" + name + "' needs parameter " + key);
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size())
      throw std::invalid_argument("malformed numeric value for " + key);
    return v;
  };
  const std::string dist_name = kv.count("dist") ? kv["dist"] : "gaussian";
  const double tp = kv.count("tp") ? get_num("tp") : 0.5;

  auto dist_for = [&](const Eigen::MatrixXd& Sigma) {
    if (dist_name == "gaussian") return DistributionSpec::gaussian();
    return DistributionSpec::linear_mixing_sqrt(Sigma, family_from_name(dist_name), tp);
  };

  if (name == "const-corr") {
    const int m = static_cast<int>(get_num("m"));
    const double r = get_num("r");
    const Eigen::MatrixXd S = constant_correlation_matrix(m, r);
    return build_model(S, dist_for(S));
  }
  if (name == "two-group") {
    const int m = static_cast<int>(get_num("m"));
    const double r = get_num("r");
    const InnovationFamily fam =
        dist_name == "gaussian" ? InnovationFamily::Gaussian : family_from_name(dist_name);
    return two_group_model(m, r, fam);
  }
  if (name == "ar1") {
    const int block = static_cast<int>(get_num("block"));
    const double r = get_num("r");
    const int m = static_cast<int>(get_num("m"));
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(m, m);
    for (int i = 0; i < block; ++i)
      for (int j = 0; j < block; ++j) S(i, j) = std::pow(r, std::abs(i - j));
    return build_model(S, dist_for(S));
  }
  throw std::invalid_argument("unknown model name: " + name);
}

} // namespace spikedcorr
