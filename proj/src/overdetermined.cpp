#include "ovma/overdetermined.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "ovma/errors.hpp"

namespace ovma {
namespace {

struct Derivs {
  double ux, uy, uxx, uyy, uxy;
};

Derivs derivs_at(const GridDomain& g, std::span<const double> u, int k) {
  Derivs d;
  d.ux = first_difference(g, u, k, 0);
  d.uy = first_difference(g, u, k, 1);
  d.uxx = second_difference(g, u, k, 0);
  d.uyy = second_difference(g, u, k, 1);
  d.uxy = 0.5 * (second_difference(g, u, k, 2) - second_difference(g, u, k, 3));
  return d;
}

double cofactor_form(const Derivs& d) {
  return d.uyy * d.ux * d.ux - 2.0 * d.uxy * d.ux * d.uy + d.uxx * d.uy * d.uy;
}

}  // namespace

PhiField phi_field(const ScalarField& field) {
  const GridDomain& g = *field.grid;
  const int n = g.size();
  const int kmin = static_cast<int>(std::min_element(field.u.begin(), field.u.end()) - field.u.begin());
  const Vec2 pmin = g.point(kmin);
  PhiField out;
  out.values.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.max_phi = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    const Vec2 p = g.point(k);
    if (norm(p - pmin) < 2.0 * g.h) {
      ++out.excluded_guard;
      continue;
    }
    const Derivs d = derivs_at(g, field.u, k);
    if (!(d.uxx > 0.0 && d.uxx * d.uyy - d.uxy * d.uxy > 0.0)) {
      ++out.excluded_nonpd;
      continue;
    }
    const double phi = cofactor_form(d) - 2.0 * field.u[k];
    out.values[k] = phi;
    if (phi > out.max_phi) {
      out.max_phi = phi;
      out.argmax = p;
    }
  }
  return out;
}

double phi_exact(const EllipsoidSpec& spec, std::span<const double> x) {
  const FieldSample fs = evaluate(spec, x);
  if (2.0 * fs.u + spec.c < 1e-16 * spec.c) throw DomainError("phi_exact: inside the guard radius");
  const DetDerivative cof = det_derivatives(fs.hessian, 1);
  double q = 0.0;
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.n; ++j) q += cof(i, j) * fs.grad[i] * fs.grad[j];
  return q - 2.0 * fs.u;
}

double sobolev_s(const ScalarField& field) {
  double s = 0.0;
  for (double v : field.u) s -= v;
  return s * field.grid->h * field.grid->h;
}

double cofactor_integral(const ScalarField& field) {
  const GridDomain& g = *field.grid;
  double s = 0.0;
  for (int k = 0; k < g.size(); ++k) s += cofactor_form(derivs_at(g, field.u, k));
  return s * g.h * g.h;
}

PohozaevParts pohozaev_residual(const ScalarField& field, const BoundaryTrace& trace) {
  const int n = 2;
  const Vec2 c = field.grid->domain->centroid();
  PohozaevParts p;
  p.interior = cofactor_integral(field);
  for (const TraceSample& s : trace.samples) {
    if (s.degenerate) continue;
    p.boundary += dot(s.point - c, s.normal) * s.w * s.ds;
  }
  p.degenerate = trace.degenerate_count;
  p.rhs = n * sobolev_s(field);
  const double lhs = (-p.interior + p.boundary) / (n + 1);
  p.residual = std::abs(lhs - p.rhs) / std::abs(p.rhs);
  return p;
}

PohozaevParts pohozaev_residual_exact(const EllipsoidSpec& spec) {
  const int n = spec.n;
  const EllipsoidIntegrals in = ellipsoid_integrals(spec);
  // The Hessian is constant, so one cofactor serves every boundary point.
  const DetDerivative cof = det_derivatives(evaluate(spec, spec.x0).hessian, 1);
  PohozaevParts p;
  p.interior = n * in.int_minus_u;  // n int(-u) det D^2u on exact fields
  p.boundary = boundary_cone_integral(spec, [&](std::span<const double> x) {
    const FieldSample fs = evaluate(spec, x);
    double q = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) q += cof(i, j) * fs.grad[i] * fs.grad[j];
    return q;
  });
  p.rhs = n * in.int_minus_u;
  const double lhs = (-p.interior + p.boundary) / (n + 1);
  p.residual = std::abs(lhs - p.rhs) / std::abs(p.rhs);
  return p;
}

TraceStats trace_stats(const BoundaryTrace& trace) {
  TraceStats t;
  double sw = 0.0, sl = 0.0;
  t.min_w = std::numeric_limits<double>::infinity();
  t.max_w = -std::numeric_limits<double>::infinity();
  for (const TraceSample& s : trace.samples) {
    if (s.degenerate) continue;
    sw += s.w * s.ds;
    sl += s.ds;
    t.min_w = std::min(t.min_w, s.w);
    t.max_w = std::max(t.max_w, s.w);
  }
  if (!(sl > 0.0)) throw InconsistencyError("trace_stats: every trace sample is degenerate");
  t.mean_w = sw / sl;
  t.relative_spread = (t.max_w - t.min_w) / t.mean_w;
  return t;
}

StationarityReport stationarity_report(const ScanMember& member, const ScanOptions& opts) {
  StationarityReport r;
  r.domain_id = member.id;
  const ScalarField f = solve(discretize(member.domain, opts.N), opts.solve);
  const BoundaryTrace tr = boundary_trace(f, opts.trace_samples);
  const TraceStats ts = trace_stats(tr);
  r.mean_w = ts.mean_w;
  r.min_w = ts.min_w;
  r.max_w = ts.max_w;
  r.relative_spread = ts.relative_spread;
  r.pohozaev_residual = pohozaev_residual(f, tr).residual;
  r.sobolev_s = sobolev_s(f);
  r.sobolev_S = r.sobolev_s * r.sobolev_s;
  r.degenerate = tr.degenerate_count;
  r.reliable = tr.reliable;
  return r;
}

std::vector<StationarityReport> stationarity_scan(const std::vector<ScanMember>& family,
                                                  const ScanOptions& opts) {
  if (opts.jobs < 1) throw ArgumentError("stationarity_scan: jobs must be >= 1");
  std::vector<StationarityReport> out(family.size());
  ScanOptions member_opts = opts;
  // one member per thread; the solver kernels stay serial inside
  if (opts.jobs > 1) member_opts.solve.parallel = false;
  const int m = static_cast<int>(family.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(opts.jobs) if (opts.jobs > 1)
  for (int i = 0; i < m; ++i) {
    try {
      out[i] = stationarity_report(family[i], member_opts);
    } catch (const std::exception& e) {
      out[i] = StationarityReport{};
      out[i].domain_id = family[i].id;
      out[i].error = e.what();
      out[i].reliable = false;
    }
  }
  return out;
}

StationarityReport stationarity_report_exact(const EllipsoidSpec& spec, const std::string& id) {
  StationarityReport r;
  r.domain_id = id;
  const double w = boundary_functional_exact(spec);
  r.mean_w = r.min_w = r.max_w = w;
  r.relative_spread = 0.0;
  r.pohozaev_residual = pohozaev_residual_exact(spec).residual;
  r.sobolev_s = ellipsoid_integrals(spec).sobolev_s;
  r.sobolev_S = std::pow(r.sobolev_s, spec.n);
  return r;
}

ShapeDerivative shape_derivative_check(DomainPtr domain, const spectral::TrigSeries& V, double eps, int N,
                                       const SolveOptions& solve_opts, int trace_samples) {
  if (!(eps > 0.0)) throw ArgumentError("shape_derivative_check: eps must be positive");
  const spectral::TrigSeries h = domain->support_series();
  DomainPtr plus, minus;
  try {
    plus = make_support_domain(h + V.scaled(eps));
    minus = make_support_domain(h + V.scaled(-eps));
  } catch (const ConvexityError& e) {
    throw PreconditionError(std::string("perturbed body is not convex: ") + e.what());
  } catch (const ConstructionError& e) {
    throw PreconditionError(std::string("perturbed body is degenerate: ") + e.what());
  }
  ShapeDerivative r;
  r.s_plus = sobolev_s(solve(discretize(plus, N), solve_opts));
  r.s_minus = sobolev_s(solve(discretize(minus, N), solve_opts));
  r.fd_derivative = (r.s_plus - r.s_minus) / (2.0 * eps);

  const ScalarField base = solve(discretize(domain, N), solve_opts);
  const BoundaryTrace tr = boundary_trace(base, trace_samples);
  double integral = 0.0;
  for (const TraceSample& s : tr.samples) {
    if (s.degenerate) continue;
    integral += s.w * V.value(std::atan2(s.normal.y, s.normal.x)) * s.ds;
  }
  r.hadamard_value = 0.5 * integral;  // (1/n) with n = 2
  const double scale = std::max(std::abs(r.fd_derivative), std::abs(r.hadamard_value));
  r.rel_err = scale > 0.0 ? std::abs(r.fd_derivative - r.hadamard_value) / scale : 0.0;
  return r;
}

}  // namespace ovma
