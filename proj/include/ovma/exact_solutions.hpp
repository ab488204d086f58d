#pragma once

// Closed-form solutions u(x) = (|A(x - x0)|^2 - c)/2 of det D^2u = 1 on the
// ellipsoid {|A(x - x0)|^2 <= c}, det A = 1, and the quantities attached to
// them (integrals, boundary functional, g-transform, level-set measures).

#include <functional>
#include <span>
#include <vector>

#include "ovma/tensor_core.hpp"

namespace ovma {

struct EllipsoidSpec {
  int n = 2;
  std::vector<double> A;   // row-major n x n, det A = 1
  std::vector<double> x0;  // centre
  double c = 1.0;

  /// Throws ArgumentError on bad sizes, |det A - 1| > 1e-12 or c <= 0.
  void validate() const;

  static EllipsoidSpec ball(int n, double c);
  /// Planar A = diag(a, 1/a): the domain a^2 x^2 + y^2/a^2 <= c.
  static EllipsoidSpec ellipse(double a, double c, double cx = 0.0, double cy = 0.0);
};

struct FieldSample {
  double u = 0.0;
  std::vector<double> grad;
  SymMatrix hessian{2};
};

/// Volume of the unit ball in R^n.
double unit_ball_volume(int n);

FieldSample evaluate(const EllipsoidSpec& spec, std::span<const double> x);

/// H_{n-1}|Du|^{n+1} on the boundary through the cofactor form, checked at
/// >= 64 boundary points. Returns c; InconsistencyError if a point deviates
/// by more than 1e-10.
double boundary_functional_exact(const EllipsoidSpec& spec);

struct EllipsoidIntegrals {
  double vol = 0.0;
  double int_minus_u = 0.0;
  double int_boundary_functional = 0.0;
  double sobolev_s = 0.0;
};
EllipsoidIntegrals ellipsoid_integrals(const EllipsoidSpec& spec);

/// g(s) = ((n+1)/(2n)) [c^{n/(n+1)} - (c - 2s)^{n/(n+1)}], 0 <= s < c/2.
double g_transform(double s, double c, int n);
double g_prime(double s, double c, int n);
/// Solves g(s) = t for s; t in [0, g(c/2)).
double g_inverse(double t, double c, int n);

/// |H_{n-1}|D psi|^{n+1} - 1| for psi = g(-u), H the Gauss curvature of the
/// level set of u through x.
double psi_eikonal_residual(const EllipsoidSpec& spec, std::span<const double> x);

struct LevelsetMeasures {
  double mu = 0.0;
  double mu_prime = 0.0;
  double nu_prime_of_g = 0.0;
};
LevelsetMeasures levelset_measures(const EllipsoidSpec& spec, double s);

/// Nodes and weights on the unit sphere S^{n-1}. n = 2: 4q uniform angles;
/// n >= 3: q-point Gauss-Jacobi in the cosine of each polar angle times
/// 2q uniform azimuths.
struct SphereQuadrature {
  int n = 0;
  std::vector<double> points;  // point k at [k*n, (k+1)*n)
  std::vector<double> weights;
  std::size_t size() const { return weights.size(); }
};
SphereQuadrature sphere_quadrature(int n, int q);

/// Gauss nodes and weights on [-1, 1] for the weight (1 - t^2)^a.
void gauss_jacobi(int q, double a, std::vector<double>& nodes, std::vector<double>& weights);

/// Cone-measure integral  int_{dOmega} <x - x0, nu> F(x) dS, by pushing the
/// sphere quadrature forward; the order is doubled until the value moves by
/// less than 1e-11 relative.
double boundary_cone_integral(const EllipsoidSpec& spec,
                              const std::function<double(std::span<const double>)>& f);

/// Support function of the level set {-u >= s} (n = 2) on m uniform angles.
std::vector<double> level_set_support(const EllipsoidSpec& spec, double s, int m);

}  // namespace ovma
