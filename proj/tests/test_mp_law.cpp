#include "doctest.h"

#include "spikedcorr/errors.hpp"
#include "spikedcorr/mp_law.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

using namespace spikedcorr;

namespace {

constexpr double kPi = 3.14159265358979323846;
const double kGammas[] = {0.1, 0.5, 1.0, 2.0, 4.0};

// Independent reference for the bulk integral, used to validate the library's
// adaptive path: Gauss-Chebyshev (second kind) after x = mid + half*u absorbs
// the edge square roots exactly. Spectrally accurate for gamma != 1 (at
// gamma = 1 the 1/x pole touches the node interval, so tests there rely on
// exact identities instead).
double chebyshev_bulk_integral(const std::function<double(double)>& f, double gamma,
                               int nodes) {
  const auto [a, b] = mp_edges(gamma);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (int k = 1; k <= nodes; ++k) {
    const double phi = kPi * k / (nodes + 1);
    const double u = std::cos(phi);
    const double w = kPi / (nodes + 1) * std::sin(phi) * std::sin(phi);
    const double x = mid + half * u;
    sum += w * f(x) / x;
  }
  return half * half / (2.0 * kPi * gamma) * sum;
}

double companion_oracle(const std::function<double(double)>& f, double gamma,
                        int nodes = 6000) {
  const double atom = std::max(0.0, 1.0 - gamma);
  const double cont = gamma * chebyshev_bulk_integral(f, gamma, nodes);
  return atom > 0.0 ? atom * f(0.0) + cont : cont;
}

std::vector<double> spike_grid(double gamma) {
  const double c = 1.0 + std::sqrt(gamma);
  std::vector<double> grid{c + 0.1, c + 0.3, c + 0.7, c + 1.5, c + 3.0};
  for (double ell : {6.0, 9.0, 13.0, 20.0})
    if (ell > c + 0.1 + 1e-12) grid.push_back(ell);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-9; }),
             grid.end());
  return grid;
}

} // namespace

TEST_CASE("support edges") {
  auto e = mp_edges(0.25);
  CHECK(e.first == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(e.second == doctest::Approx(2.25).epsilon(1e-14));
  e = mp_edges(1.0);
  CHECK(e.first == 0.0);
  CHECK(e.second == doctest::Approx(4.0).epsilon(1e-14));
  e = mp_edges(4.0);
  CHECK(e.first == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e.second == doctest::Approx(9.0).epsilon(1e-14));
  CHECK_THROWS_AS(mp_edges(0.0), std::invalid_argument);
  CHECK_THROWS_AS(mp_edges(-1.0), std::invalid_argument);
}

TEST_CASE("law atoms and total mass") {
  for (double g : kGammas) {
    const auto law = SpectralLaw::make(g);
    CHECK(law.mp_atom == doctest::Approx(std::max(0.0, 1.0 - 1.0 / g)).epsilon(1e-14));
    CHECK(law.companion_atom == doctest::Approx(std::max(0.0, 1.0 - g)).epsilon(1e-14));
    const double mass = companion_integrate([](double) { return 1.0; }, g);
    CHECK(std::abs(mass - 1.0) <= 1e-9);
  }
}

TEST_CASE("companion moments match known bulk moments") {
  // bulk law: E X = 1 and E X^2 = 1 + gamma, so the companion integrals are
  // gamma and gamma (1 + gamma)
  for (double g : kGammas) {
    const double m1 = companion_integrate([](double x) { return x; }, g);
    const double m2 = companion_integrate([](double x) { return x * x; }, g);
    CHECK(m1 == doctest::Approx(g).epsilon(1e-9));
    CHECK(m2 == doctest::Approx(g * (1.0 + g)).epsilon(1e-9));
  }
  // adaptive path vs the independent Chebyshev reference on a generic integrand
  for (double g : {0.5, 2.0}) {
    auto f = [](double x) { return std::exp(-0.3 * x) + x * x; };
    const double lib = companion_integrate(f, g);
    const double ref = companion_oracle(f, g);
    CHECK(lib == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("stieltjes transform at rho equals -1/ell") {
  for (double g : kGammas) {
    for (double ell : spike_grid(g)) {
      const double r = rho(ell, g);
      CHECK(std::abs(stieltjes_m(r, g) + 1.0 / ell) <= 1e-7);
      CHECK(std::abs(stieltjes_m_quadrature(r, g) + 1.0 / ell) <= 1e-7);
    }
  }
}

TEST_CASE("stieltjes known values and decay") {
  CHECK(stieltjes_m(4.5, 1.0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(stieltjes_m(2.5, 0.25) == doctest::Approx(-0.5).epsilon(1e-12));
  const double far = stieltjes_m(1e8, 0.5);
  CHECK(far < 0.0);
  CHECK(std::abs(far) <= 1.0001e-8);
}

TEST_CASE("stieltjes closed form matches quadrature off the support") {
  std::mt19937_64 gen(20240817);
  auto unit = [&gen]() { return (gen() >> 11) * 0x1.0p-53; };
  int checked = 0;
  while (checked < 100) {
    const double g = kGammas[gen() % 5];
    const auto [a, b] = mp_edges(g);
    double t;
    if (a > 0.0 && (gen() & 1)) {
      t = a * (0.05 + 0.9 * unit());  // below the support
    } else {
      t = b + 0.05 + 30.0 * unit();   // above the support
    }
    const double closed = stieltjes_m(t, g);
    const double quad = stieltjes_m_quadrature(t, g);
    CHECK(std::abs(closed - quad) <= 1e-8 * (1.0 + std::abs(closed)));
    ++checked;
  }
}

TEST_CASE("c integral satisfies 1 + c(rho) ell = rho / (ell rho_dot)") {
  for (double g : kGammas) {
    for (double ell : spike_grid(g)) {
      const double r = rho(ell, g);
      const double lhs = 1.0 + c_integral(r, g) * ell;
      const double rhs = r / (ell * rho_dot(ell, g));
      CHECK(std::abs(lhs - rhs) <= 1e-7 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST_CASE("c integral known value and quadrature agreement") {
  CHECK(c_integral(4.5, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(c_integral_quadrature(4.5, 1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
  for (double g : {0.1, 0.5, 2.0, 4.0}) {
    const auto [a, b] = mp_edges(g);
    for (double t : {b + 0.4, b + 1.5, b + 6.0}) {
      CHECK(c_integral(t, g) == doctest::Approx(c_integral_quadrature(t, g)).epsilon(1e-8));
    }
  }
}

TEST_CASE("c integral scales linearly in gamma near zero and diverges at the edge") {
  const double g = 1e-8;
  const double c = c_integral(3.0, g);
  CHECK(c == doctest::Approx(g / 4.0).epsilon(0.01));  // limit gamma/(t-1)^2
  CHECK(c < 1e-7);

  const auto [a, b] = mp_edges(0.5);
  CHECK(c_integral(b + 1e-12, 0.5) > 1e4);
  CHECK(c_integral(b + 1e-6, 0.5) > c_integral(b + 1e-3, 0.5));
}

TEST_CASE("rho and rho_dot formulas") {
  CHECK(rho(3.0, 1.0) == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(rho_dot(3.0, 1.0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(rho(9.1, 0.5) == doctest::Approx(9.661728395061728).epsilon(1e-12));
  CHECK(rho_dot(9.1, 0.5) == doctest::Approx(0.9923792104862063).epsilon(1e-12));
  // rho_dot -> 0 at the transition
  CHECK(rho_dot(1.0 + std::sqrt(0.5) + 1e-7, 0.5) < 1e-6);
}

TEST_CASE("rho dominates ell and the bulk edge, and is increasing") {
  for (double g : kGammas) {
    const auto [a, b] = mp_edges(g);
    double prev = -1.0;
    for (double ell : spike_grid(g)) {
      const double r = rho(ell, g);
      CHECK(r > ell);
      CHECK(r > b);
      if (prev > 0.0) CHECK(r > prev);
      prev = r;
    }
  }
}

TEST_CASE("spike classification") {
  CHECK(classify_spike(3.0, 1.0, 1e-9) == SpikeClass::Supercritical);
  CHECK(classify_spike(2.0, 1.0, 1e-9) == SpikeClass::Critical);
  CHECK(classify_spike(1.5, 1.0, 1e-9) == SpikeClass::Subcritical);
  const double crit = 1.0 + std::sqrt(0.5);
  CHECK(classify_spike(crit + 1e-12, 0.5) == SpikeClass::Critical);
  CHECK(classify_spike(crit + 1e-6, 0.5) == SpikeClass::Supercritical);
  CHECK(classify_spike(crit - 1e-6, 0.5) == SpikeClass::Subcritical);
  CHECK(critical_tol(0.5) == doctest::Approx(1e-9 * crit).epsilon(1e-12));
  CHECK_THROWS_AS(classify_spike(1.0, 1.0, 1e-9), std::invalid_argument);
  CHECK_THROWS_AS(classify_spike(0.9, 1.0, 1e-9), std::invalid_argument);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(stieltjes_m(2.0, 1.0), std::domain_error);    // inside support
  CHECK_THROWS_AS(stieltjes_m(4.0, 1.0), std::domain_error);    // at the edge
  CHECK_THROWS_AS(stieltjes_m(-1.0, 0.5), std::domain_error);   // negative t
  CHECK_THROWS_AS(stieltjes_m(0.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(c_integral(2.24, 0.25), std::domain_error);
  CHECK_THROWS_AS(c_integral(2.25, 0.25), std::domain_error);   // t = b exactly
  CHECK_THROWS_AS(rho(2.0, 1.0), std::domain_error);            // critical
  CHECK_THROWS_AS(rho(1.5, 1.0), std::domain_error);            // subcritical
  CHECK_THROWS_AS(rho_dot(1.9, 1.0), std::domain_error);
  CHECK_THROWS_AS(companion_integrate([](double) { return 1.0; }, -0.5),
                  std::invalid_argument);
}
