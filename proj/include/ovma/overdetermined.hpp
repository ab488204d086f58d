#pragma once

// Diagnostics of the overdetermined problem on solved or exact fields:
// phi = S^{ij} u_i u_j - 2u, the Pohozaev residual, s = int(-u), the
// stationarity scan over domain families and the Hadamard shape derivative.

#include <string>
#include <vector>

#include "ovma/exact_solutions.hpp"
#include "ovma/ma_solver.hpp"

namespace ovma {

struct PhiField {
  std::vector<double> values;  // per unknown; NaN where excluded
  double max_phi = 0.0;
  Vec2 argmax;
  int excluded_nonpd = 0;     // Hessian reconstruction not positive definite
  int excluded_guard = 0;     // within the guard radius around min u
};

/// Finite-difference phi on a solved field; guard radius 2h around argmin u.
PhiField phi_field(const ScalarField& field);
/// Exact-derivative phi at a point inside an ellipsoid; excludes |A(x-x0)| < 1e-8 sqrt(c).
double phi_exact(const EllipsoidSpec& spec, std::span<const double> x);

/// Masked midpoint quadrature of -u.
double sobolev_s(const ScalarField& field);
/// Masked midpoint quadrature of the cofactor form S^{ij} u_i u_j.
double cofactor_integral(const ScalarField& field);

struct PohozaevParts {
  double interior = 0.0;  // int S^{ij} u_i u_j
  double boundary = 0.0;  // int <x - centroid, nu> H |Du|^{n+1}
  double rhs = 0.0;       // n int(-u)
  double residual = 0.0;  // |lhs - rhs| / |rhs|
  int degenerate = 0;
};

/// Solved planar field; boundary term from the trace, about the centroid.
PohozaevParts pohozaev_residual(const ScalarField& field, const BoundaryTrace& trace);
/// Exact ellipsoid in any dimension; boundary term by sphere quadrature.
PohozaevParts pohozaev_residual_exact(const EllipsoidSpec& spec);

struct TraceStats {
  double mean_w = 0.0;  // arc-length weighted, non-degenerate samples
  double min_w = 0.0;
  double max_w = 0.0;
  double relative_spread = 0.0;
};
TraceStats trace_stats(const BoundaryTrace& trace);

struct StationarityReport {
  std::string domain_id;
  double mean_w = 0.0, min_w = 0.0, max_w = 0.0, relative_spread = 0.0;
  double pohozaev_residual = 0.0;
  double sobolev_s = 0.0, sobolev_S = 0.0;
  int degenerate = 0;
  bool reliable = true;
  std::string error;  // empty on success
};

struct ScanMember {
  std::string id;
  DomainPtr domain;
};

struct ScanOptions {
  int N = 128;
  int trace_samples = 512;
  int jobs = 1;
  SolveOptions solve;
};

StationarityReport stationarity_report(const ScanMember& member, const ScanOptions& opts);
/// Members run concurrently up to opts.jobs; a failing member carries its
/// error and the scan continues. Output order matches the input order.
std::vector<StationarityReport> stationarity_scan(const std::vector<ScanMember>& family,
                                                  const ScanOptions& opts);
/// Report of an exact ellipsoid (closed forms plus quadrature).
StationarityReport stationarity_report_exact(const EllipsoidSpec& spec, const std::string& id);

struct ShapeDerivative {
  double s_plus = 0.0, s_minus = 0.0;
  double fd_derivative = 0.0;
  double hadamard_value = 0.0;
  double rel_err = 0.0;
};

/// Perturbs the support function to h +- eps V and compares the central
/// difference of s with (1/2) int w V ds on the unperturbed trace.
ShapeDerivative shape_derivative_check(DomainPtr domain, const spectral::TrigSeries& V, double eps, int N,
                                       const SolveOptions& solve_opts = {}, int trace_samples = 512);

}  // namespace ovma
