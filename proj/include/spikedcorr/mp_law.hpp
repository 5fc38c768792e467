#pragma once

#include <functional>
#include <utility>

namespace spikedcorr {

// Marchenko-Pastur bulk law and its companion law, with the spike maps used
// throughout the eigenvalue/eigenvector limit theory.
//
// Conventions (aspect ratio gamma = p/n > 0):
//   bulk law F:      density sqrt((b - x)(x - a)) / (2 pi gamma x) on [a, b],
//                    atom max(0, 1 - 1/gamma) at zero,
//                    edges a = (1 - sqrt(gamma))^2, b = (1 + sqrt(gamma))^2
//   companion law:   (1 - gamma) * 1_[0,inf) + gamma * F,
//                    net atom max(0, 1 - gamma) at zero, same edges
//   m(t)       = int (x - t)^-1 companion(dx),   t outside the support
//   c(t)       = int x (t - x)^-2 companion(dx), t above the support
//   rho(l)     = l + gamma * l / (l - 1)         for supercritical l
//   rho_dot(l) = 1 - gamma / (l - 1)^2
//
// A spike l is supercritical iff l > 1 + sqrt(gamma); only those separate
// from the bulk, and rho/rho_dot are defined only there.

struct SpectralLaw {
  double gamma;
  double a_edge;
  double b_edge;
  double mp_atom;         // mass of the bulk law at zero
  double companion_atom;  // net mass of the companion law at zero

  static SpectralLaw make(double gamma);

  // Continuous density of the bulk law; zero outside (a_edge, b_edge).
  double mp_density(double x) const;
};

enum class SpikeClass { Supercritical, Critical, Subcritical };

std::pair<double, double> mp_edges(double gamma);

// int f d(companion law): atom contribution plus adaptive quadrature of the
// continuous part, absolute tolerance abs_tol. The sine substitution
// x = (a+b)/2 + (b-a)/2 sin(theta) removes the edge square-root singularities
// and the 1/x singularity at gamma = 1.
double companion_integrate(const std::function<double(double)>& f, double gamma,
                           double abs_tol = 1e-10);

// Closed-form Stieltjes transform of the companion law, branch fixed by
// m(t) -> 0 as t -> infinity. Valid for t > b_edge, or 0 < t < a_edge when
// a_edge > 0.
double stieltjes_m(double t, double gamma);
double stieltjes_m_quadrature(double t, double gamma);  // slow reference path

// c(t) = m(t) + t m'(t) in closed form, for t > b_edge. Diverges as t -> b_edge.
double c_integral(double t, double gamma);
double c_integral_quadrature(double t, double gamma);   // slow reference path

double rho(double ell, double gamma);
double rho_dot(double ell, double gamma);

// Scale-relative tolerance used to flag spikes at the phase transition.
double critical_tol(double gamma);

SpikeClass classify_spike(double ell, double gamma, double tol);
SpikeClass classify_spike(double ell, double gamma);

} // namespace spikedcorr
