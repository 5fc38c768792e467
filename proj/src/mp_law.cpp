#include "spikedcorr/mp_law.hpp"

#include "spikedcorr/errors.hpp"

#include <cassert>
#include <cmath>
#include <sstream>

namespace spikedcorr {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_gamma(double gamma) {
  if (!std::isfinite(gamma) || gamma <= 0.0)
    throw std::invalid_argument("aspect ratio gamma must be positive and finite");
}

struct QuadState {
  const std::function<double(double)>& g;
  long evals = 0;
};

double adapt(QuadState& st, double a, double b, double fa, double fm, double fb,
             double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = st.g(lm);
  const double frm = st.g(rm);
  st.evals += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) {
    std::ostringstream oss;
    oss << "adaptive quadrature did not converge; residual estimate "
        << std::abs(delta) / 15.0;
    throw numerical_error(oss.str());
  }
  return adapt(st, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adapt(st, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& g, double a, double b,
                        double tol) {
  QuadState st{g};
  const double m = 0.5 * (a + b);
  const double fa = g(a);
  const double fm = g(m);
  const double fb = g(b);
  st.evals += 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adapt(st, a, b, fa, fm, fb, whole, tol, 48);
}

} // namespace

SpectralLaw SpectralLaw::make(double gamma) {
  require_gamma(gamma);
  const double sq = std::sqrt(gamma);
  SpectralLaw law;
  law.gamma = gamma;
  law.a_edge = (1.0 - sq) * (1.0 - sq);
  law.b_edge = (1.0 + sq) * (1.0 + sq);
  law.mp_atom = std::max(0.0, 1.0 - 1.0 / gamma);
  law.companion_atom = std::max(0.0, 1.0 - gamma);
  return law;
}

double SpectralLaw::mp_density(double x) const {
  if (!(x > a_edge) || !(x < b_edge) || x <= 0.0) return 0.0;
  return std::sqrt((b_edge - x) * (x - a_edge)) / (2.0 * kPi * gamma * x);
}

std::pair<double, double> mp_edges(double gamma) {
  const SpectralLaw law = SpectralLaw::make(gamma);
  return {law.a_edge, law.b_edge};
}

double companion_integrate(const std::function<double(double)>& f, double gamma,
                           double abs_tol) {
  require_gamma(gamma);
  if (!(abs_tol > 0.0)) throw std::invalid_argument("quadrature tolerance must be positive");
  const SpectralLaw law = SpectralLaw::make(gamma);
  const double mid = 0.5 * (law.a_edge + law.b_edge);
  const double half = 0.5 * (law.b_edge - law.a_edge);
  const bool zero_edge = (law.a_edge == 0.0);

  // After x = mid + half*sin(theta) the Jacobian cancels the edge square
  // roots; cos^2 = (1-s)(1+s) also cancels the 1/x pole when a_edge = 0.
  auto g = [&](double theta) {
    const double s = std::sin(theta);
    if (zero_edge) {
      const double x = half * (1.0 + s);
      return f(x) * half * (1.0 - s) / (2.0 * kPi * gamma);
    }
    const double x = mid + half * s;
    return f(x) * half * half * (1.0 - s) * (1.0 + s) / (2.0 * kPi * gamma * x);
  };

  const double quad_tol = abs_tol / std::max(1.0, gamma);
  const double cont = gamma * adaptive_simpson(g, -0.5 * kPi, 0.5 * kPi, quad_tol);
  if (law.companion_atom > 0.0) return law.companion_atom * f(0.0) + cont;
  return cont;
}

double stieltjes_m_quadrature(double t, double gamma) {
  return companion_integrate([t](double x) { return 1.0 / (x - t); }, gamma);
}

double stieltjes_m(double t, double gamma) {
  require_gamma(gamma);
  const auto [a, b] = mp_edges(gamma);
  if (!std::isfinite(t)) throw std::domain_error("stieltjes_m: t must be finite");
  double s;
  if (t > b) {
    s = std::sqrt((t - a) * (t - b));
  } else if (t > 0.0 && t < a) {
    s = -std::sqrt((a - t) * (b - t));
  } else {
    std::ostringstream oss;
    oss << "stieltjes_m: t = " << t << " lies inside the support [" << a << ", " << b
        << "] (or t <= 0)";
    throw std::domain_error(oss.str());
  }
  const double m = (gamma - 1.0 - t + s) / (2.0 * t);
  // Branch errors are the classic failure mode here; the decay m -> 0 at
  // infinity pins the sign, and debug builds verify against quadrature.
  assert(std::abs(m - stieltjes_m_quadrature(t, gamma)) <=
         1e-8 * (1.0 + std::abs(m)));
  return m;
}

double c_integral_quadrature(double t, double gamma) {
  return companion_integrate(
      [t](double x) { return x / ((t - x) * (t - x)); }, gamma);
}

double c_integral(double t, double gamma) {
  require_gamma(gamma);
  const auto [a, b] = mp_edges(gamma);
  if (!(t > b)) {
    std::ostringstream oss;
    oss << "c_integral: t = " << t << " must exceed the upper edge " << b;
    throw std::domain_error(oss.str());
  }
  // c = m + t m' = (s'(t) - 1)/2 with s = sqrt((t-a)(t-b)), using a+b = 2(1+gamma).
  const double s = std::sqrt((t - a) * (t - b));
  const double sp = (t - 1.0 - gamma) / s;
  return 0.5 * (sp - 1.0);
}

double rho(double ell, double gamma) {
  require_gamma(gamma);
  if (!std::isfinite(ell) || ell <= 1.0 + std::sqrt(gamma)) {
    std::ostringstream oss;
    oss << "rho: spike " << ell << " is not supercritical (needs ell > "
        << 1.0 + std::sqrt(gamma) << ")";
    throw std::domain_error(oss.str());
  }
  return ell + gamma * ell / (ell - 1.0);
}

double rho_dot(double ell, double gamma) {
  require_gamma(gamma);
  if (!std::isfinite(ell) || ell <= 1.0 + std::sqrt(gamma)) {
    std::ostringstream oss;
    oss << "rho_dot: spike " << ell << " is not supercritical (needs ell > "
        << 1.0 + std::sqrt(gamma) << ")";
    throw std::domain_error(oss.str());
  }
  const double d = ell - 1.0;
  return 1.0 - gamma / (d * d);
}

double critical_tol(double gamma) {
  require_gamma(gamma);
  return 1e-9 * (1.0 + std::sqrt(gamma));
}

SpikeClass classify_spike(double ell, double gamma, double tol) {
  require_gamma(gamma);
  if (!std::isfinite(ell) || ell <= 1.0)
    throw std::invalid_argument("classify_spike: spikes at or below 1 are out of model scope");
  if (!(tol >= 0.0)) throw std::invalid_argument("classify_spike: tolerance must be nonnegative");
  const double crit = 1.0 + std::sqrt(gamma);
  if (std::abs(ell - crit) <= tol) return SpikeClass::Critical;
  return ell > crit ? SpikeClass::Supercritical : SpikeClass::Subcritical;
}

SpikeClass classify_spike(double ell, double gamma) {
  return classify_spike(ell, gamma, critical_tol(gamma));
}

} // namespace spikedcorr
