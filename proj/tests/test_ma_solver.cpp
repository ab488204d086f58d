#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ovma/domain.hpp"
#include "ovma/errors.hpp"
#include "ovma/ma_solver.hpp"

using namespace ovma;

namespace {

DomainPtr unit_disk() { return make_ellipse_domain(EllipsoidSpec::ellipse(1.0, 1.0)); }
DomainPtr tall_ellipse() { return make_ellipse_domain(EllipsoidSpec::ellipse(std::sqrt(2.0), 1.0)); }

double sup_error(const ScalarField& f, double a) {
  double e = 0.0;
  for (int k = 0; k < f.grid->size(); ++k) {
    const Vec2 p = f.grid->point(k);
    const double exact = 0.5 * (a * a * p.x * p.x + p.y * p.y / (a * a) - 1.0);
    e = std::max(e, std::abs(f.u[k] - exact));
  }
  return e;
}

}  // namespace

TEST_CASE("mask area of the unit disk") {
  const GridPtr g = discretize(unit_disk(), 64);
  CHECK(std::abs(g->size() * g->h * g->h - M_PI) <= 4.0 * M_PI * g->h);
}

TEST_CASE("disk mask is invariant under a quarter turn") {
  const GridPtr g = discretize(unit_disk(), 64);
  for (int j = 0; j < g->N; ++j)
    for (int i = 0; i < g->N; ++i) CHECK_EQ(g->id(i, j) >= 0, g->id(g->N - 1 - j, i) >= 0);
}

TEST_CASE("support-function disk gives the ellipse mask bitwise") {
  const GridPtr a = discretize(unit_disk(), 64);
  const GridPtr b = discretize(make_support_domain(spectral::TrigSeries(1.0, {}, {})), 64);
  REQUIRE(a->N == b->N);
  CHECK(a->h == b->h);
  CHECK(a->index == b->index);
  double dfrac = 0.0;
  for (int k = 0; k < a->size(); ++k)
    for (int arm = 0; arm < kArms; ++arm) dfrac = std::max(dfrac, std::abs(a->frac[k][arm] - b->frac[k][arm]));
  CHECK(dfrac <= 1e-10);
}

TEST_CASE("every arm has a neighbour or a cut in (0, 1]") {
  const GridPtr g = discretize(make_superellipse_domain(4.0), 48);
  for (int k = 0; k < g->size(); ++k)
    for (int arm = 0; arm < kArms; ++arm) {
      const double f = g->frac[k][arm];
      CHECK((f > 0.0 && f <= 1.0));
      if (g->nbr[k][arm] >= 0) CHECK(f == 1.0);
    }
}

TEST_CASE("argument errors") {
  CHECK_THROWS_AS(discretize(unit_disk(), 8), ArgumentError);
  SolveOptions o;
  o.tol = 1e-13;
  CHECK_THROWS_AS(solve(discretize(unit_disk(), 32), o), ArgumentError);
  CHECK_THROWS_AS(boundary_trace(solve(discretize(unit_disk(), 32)), 16), ArgumentError);
}

TEST_CASE("disk and ellipse solves meet the certificate and the error bound") {
  for (double a : {1.0, std::sqrt(2.0)}) {
    const ScalarField f = solve(discretize(a == 1.0 ? unit_disk() : tall_ellipse(), 64));
    CHECK(f.certificate.resid_inf <= 1e-10);
    CHECK(f.certificate.N == 64);
    CHECK(sup_error(f, a) <= 5e-3);
    CHECK(*std::max_element(f.u.begin(), f.u.end()) <= 0.0);
    CHECK(f.min_frame_product >= -1e-8);
  }
}

TEST_CASE("seeded with the exact solution Newton stops within 2 iterations") {
  const GridPtr g = discretize(tall_ellipse(), 64);
  SolveOptions o;
  o.initial = sample_on_grid(*g, [](Vec2 p) { return 0.5 * (2.0 * p.x * p.x + 0.5 * p.y * p.y - 1.0); });
  const ScalarField f = solve(g, o);
  CHECK(f.certificate.newton_iters <= 2);
}

TEST_CASE("superellipse solve lies between the ball quadratics") {
  const ScalarField f = solve(discretize(make_superellipse_domain(4.0), 64));
  const double h2 = f.grid->h * f.grid->h;
  const double r_in2 = 1.0 / std::sqrt(2.0);  // (2^{-1/4})^2
  for (int k = 0; k < f.grid->size(); ++k) {
    const Vec2 p = f.grid->point(k);
    const double r2 = dot(p, p);
    CHECK(f.u[k] >= 0.5 * (r2 - 2.0) - 10.0 * h2);
    if (r2 < r_in2) CHECK(f.u[k] <= 0.5 * (r2 - r_in2) + 10.0 * h2);
  }
}

TEST_CASE("serial and parallel kernels agree bitwise") {
  const GridPtr g = discretize(make_superellipse_domain(4.0), 64);
  const std::vector<double> u =
      sample_on_grid(*g, [](Vec2 p) { return 0.5 * (dot(p, p) - 1.0) + 0.1 * p.x * p.x * p.y; });
  const JacobianPattern pat = jacobian_pattern(*g);
  for (double s : {0.0, 100.0}) {
    std::vector<double> r1(g->size()), r2(g->size()), r3(g->size()), r4(g->size());
    std::vector<double> v1(pat.cols.size()), v2(pat.cols.size());
    residual_serial(*g, u, s, r1);
    residual_parallel(*g, u, s, r2);
    jacobian_serial(*g, pat, u, s, r3, v1);
    jacobian_parallel(*g, pat, u, s, r4, v2);
    CHECK(r1 == r2);
    CHECK(r3 == r4);
    CHECK(r1 == r3);
    CHECK(v1 == v2);
  }
}

TEST_CASE("serial and parallel solves agree") {
  const GridPtr g = discretize(tall_ellipse(), 48);
  SolveOptions o;
  const ScalarField a = solve(g, o);
  o.parallel = false;
  const ScalarField b = solve(g, o);
  CHECK(a.u == b.u);
}

TEST_CASE("trace of an injected exact field reproduces w = c") {
  const GridPtr g = discretize(tall_ellipse(), 64);
  ScalarField f;
  f.grid = g;
  f.u = sample_on_grid(*g, [](Vec2 p) { return 0.5 * (2.0 * p.x * p.x + 0.5 * p.y * p.y - 1.0); });
  const BoundaryTrace tr = boundary_trace(f, 128);
  CHECK(tr.samples.size() == 128);
  CHECK(tr.reliable);
  for (const TraceSample& s : tr.samples) {
    if (s.degenerate) continue;
    CHECK(s.curvature > 0.0);
    CHECK(std::abs(s.w - 1.0) <= 1e-8);
  }
}

TEST_CASE("interpolation is exact on quadratics and refuses far points") {
  const GridPtr g = discretize(unit_disk(), 64);
  ScalarField f;
  f.grid = g;
  f.u = sample_on_grid(*g, [](Vec2 p) { return p.x * p.x - 0.3 * p.x * p.y + 2.0 * p.y; });
  const Vec2 q{0.123, -0.456};
  const auto v = interpolate(f, q);
  REQUIRE(v.has_value());
  CHECK(*v == doctest::Approx(q.x * q.x - 0.3 * q.x * q.y + 2.0 * q.y).epsilon(1e-12));
  CHECK_FALSE(interpolate(f, Vec2{3.0, 3.0}).has_value());
}
