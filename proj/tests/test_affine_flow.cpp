#include <doctest.h>

#include <cmath>

#include "ovma/affine_flow.hpp"
#include "ovma/errors.hpp"

using namespace ovma;

namespace {

SupportCurve trefoil(double eps, int n) {
  std::vector<double> h(n);
  for (int j = 0; j < n; ++j) h[j] = 1.0 + eps * std::cos(3.0 * 2.0 * M_PI * j / n);
  return SupportCurve(std::move(h));
}

}  // namespace

TEST_CASE("support curve invariants") {
  CHECK_THROWS_AS(SupportCurve(std::vector<double>(24, 1.0)), ArgumentError);
  CHECK_THROWS_AS(SupportCurve(std::vector<double>(8, 1.0)), ArgumentError);
  CHECK_THROWS_AS(curvature_radius(trefoil(0.15, 128)), ConvexityError);
  CHECK_THROWS_AS(make_state(trefoil(0.15, 128)), ConvexityError);
  CHECK(closure_residual(random_convex_curve(3, 128)) <= 1e-10);
}

TEST_CASE("ellipse curvature matches the closed form") {
  const double a = 2.0, b = 0.5;
  const SupportCurve c = ellipse_curve(a, b, 256);
  const std::vector<double> rho = curvature_radius(c);
  for (int j = 0; j < c.size(); ++j) {
    const double h = c.h()[j];
    const double kappa = h * h * h / (a * a * b * b);
    CHECK(std::abs(1.0 / rho[j] - kappa) <= 1e-8 * kappa);
  }
}

TEST_CASE("entropy equality on ellipses and affine invariance") {
  CHECK(std::abs(entropy(ellipse_curve(2.0, 0.5, 512)) - petty_bound()) <= 1e-8);
  CHECK(petty_bound() == doctest::Approx(4.29006).epsilon(1e-6));
  const SupportCurve k = random_convex_curve(11, 256);
  const double L[4] = {1.4, 0.3, -0.2, (1.0 + 0.3 * 0.2) / 1.4};
  CHECK(std::abs(entropy(affine_image(k, L)) - entropy(k)) <= 1e-8);
}

TEST_CASE("Petty inequality on random bodies") {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const SupportCurve k = random_convex_curve(s, 256);
    const double e = entropy(k);
    CHECK(e <= petty_bound() + 1e-8);
    if (e >= petty_bound() - 1e-6) CHECK(fit_ellipse(k).residual <= 1e-5);
  }
}

TEST_CASE("random curves are deterministic in the seed") {
  const SupportCurve a = random_convex_curve(5, 128), b = random_convex_curve(5, 128);
  CHECK(std::equal(a.h().begin(), a.h().end(), b.h().begin()));
}

TEST_CASE("ellipse fit recovers a rotated off-centre ellipse") {
  const SupportCurve c = ellipse_curve(1.7, 0.6, 128, 0.4, {0.2, -0.3});
  const EllipseFit f = fit_ellipse(c);
  CHECK(f.residual <= 1e-12);
  CHECK(f.center.x == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(f.center.y == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK(f.m11 * f.m22 - f.m12 * f.m12 == doctest::Approx(1.7 * 1.7 * 0.6 * 0.6).epsilon(1e-10));
  CHECK(fit_ellipse(trefoil(0.1, 128)).residual > 0.05);
}

TEST_CASE("step guards") {
  const FlowState s = make_state(trefoil(0.1, 128));
  CHECK_THROWS_AS(flow_step(s, -1e-4), ArgumentError);
  CHECK_THROWS_AS(flow_step(s, 2.0 * dt_max(s)), ArgumentError);
  CHECK_THROWS_AS(flow_step(s, 1e-4, Scheme::Explicit), ArgumentError);
  CHECK(dt_max(s, Scheme::Explicit) < dt_max(s));
  const FlowState same = flow_step(s, 0.0);
  CHECK(std::equal(same.curve.h().begin(), same.curve.h().end(), s.curve.h().begin()));
}

TEST_CASE("closure is preserved by every step") {
  FlowState s = make_state(random_convex_curve(2, 128));
  for (int i = 0; i < 50; ++i) {
    s = flow_step(s, std::min(1e-3, dt_max(s)));
    CHECK(closure_residual(s.curve) <= 1e-9);
  }
}

TEST_CASE("circle follows the extinction law") {
  FlowOptions o;
  o.stop.t_end = 0.5;
  const FlowRun r = run_flow(ellipse_curve(1.0, 1.0, 128), o);
  const FlowState& end = r.series.back();
  CHECK(end.t == 0.5);
  const double exact = std::pow(1.0 / 3.0, 0.75);
  for (double h : end.curve.h()) CHECK(std::abs(h - exact) <= 1e-4 * exact);
  CHECK(r.max_area_rate_error <= 1e-3);
}

TEST_CASE("circle entropy is constant until extinction") {
  FlowOptions o;
  o.stop.area_fraction = 1e-3;
  const FlowRun r = run_flow(ellipse_curve(1.0, 1.0, 128), o);
  CHECK(r.series.back().diag.area <= 1e-3 * M_PI);
  for (const FlowState& s : r.series) CHECK(std::abs(s.diag.entropy - petty_bound()) <= 1e-6);
}

TEST_CASE("aspect-4 ellipse stays an ellipse") {
  FlowOptions o;
  o.stop.area_fraction = 1e-3;
  o.cadence = 50;
  const FlowRun r = run_flow(ellipse_curve(2.0, 0.5, 128), o);
  const double half_life = 0.75 * (1.0 - std::pow(2.0, -2.0 / 3.0));
  for (std::size_t i = 0; i < r.series.size(); ++i) {
    CHECK(std::abs(r.series[i].diag.entropy - petty_bound()) <= 1e-4);
    if (r.series[i].t <= half_life) CHECK(r.fit_residuals[i] <= 1e-4);
  }
}

TEST_CASE("non-elliptic start: entropy increases and the shape rounds off") {
  FlowOptions o;
  o.stop.area_fraction = 1e-3;
  const FlowRun r = run_flow(trefoil(0.1, 256), o);
  CHECK(r.min_entropy_increment >= -1e-6);
  for (std::size_t i = 1; i < r.series.size(); ++i) CHECK(r.series[i].diag.entropy > r.series[i - 1].diag.entropy);
  CHECK(r.fit_residuals.front() > 0.05);
  CHECK(r.fit_residuals.back() <= 1e-3);
  CHECK(r.max_area_rate_error <= 1e-3);
}

TEST_CASE("explicit scheme agrees with the semi-implicit one") {
  FlowOptions o;
  o.stop.t_end = 0.1;
  const FlowRun a = run_flow(trefoil(0.05, 64), o);
  o.scheme = Scheme::Explicit;
  const FlowRun b = run_flow(trefoil(0.05, 64), o);
  double d = 0.0;
  for (int j = 0; j < 64; ++j) d = std::max(d, std::abs(a.series.back().curve.h()[j] - b.series.back().curve.h()[j]));
  CHECK(d <= 1e-6);
}

TEST_CASE("flow matches the level sets of the exact solution") {
  const Correspondence disk = levelset_correspondence(EllipsoidSpec::ellipse(1.0, 1.0), 256, 1e-4);
  CHECK(disk.max_distance <= 1e-4);
  CHECK(disk.t_extinction == doctest::Approx(0.75));
  CHECK(disk.times.back() == doctest::Approx(0.375));
  const Correspondence ell = levelset_correspondence(EllipsoidSpec::ellipse(std::sqrt(2.0), 1.0), 256, 1e-4);
  CHECK(ell.max_distance <= 1e-3);
}
