#include "ovma/affine_flow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "ovma/spectral.hpp"

namespace ovma {
namespace {

using spectral::cplx;
constexpr double kTwoPi = 2.0 * M_PI;

double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }

// Half spectrum of the speed -rho^{-1/3}, evaluated on a 3N/2 grid and
// truncated back to |k| < N/2.
std::vector<cplx> speed_hat(const std::vector<cplx>& hh, int n, std::vector<double>* rho_out = nullptr) {
  std::vector<cplx> rh(hh.size());
  for (int k = 0; k <= n / 2; ++k) rh[k] = (1.0 - static_cast<double>(k) * k) * hh[k];
  std::vector<double> rho = spectral::inverse(rh, n);
  if (!(min_of(rho) > 0.0)) throw ConvexityError("radius of curvature h + h'' <= 0");
  const int m = 3 * n / 2;
  std::vector<double> fine = spectral::resample(rho, m);
  if (!(min_of(fine) > 0.0)) throw ConvexityError("radius of curvature h + h'' <= 0 on the dealiasing grid");
  for (double& v : fine) v = -std::cbrt(1.0 / v);
  const std::vector<cplx> fh = spectral::forward(fine);
  std::vector<cplx> out(n / 2 + 1, 0.0);
  const double scale = static_cast<double>(n) / m;
  for (int k = 0; k < n / 2; ++k) out[k] = fh[k] * scale;
  if (rho_out) *rho_out = std::move(rho);
  return out;
}

}  // namespace

SupportCurve::SupportCurve(std::vector<double> h) : h_(std::move(h)) {
  const std::size_t n = h_.size();
  if (n < 16 || !std::has_single_bit(n)) throw ArgumentError("SupportCurve: N must be a power of two >= 16");
  for (double v : h_)
    if (!std::isfinite(v)) throw ArgumentError("SupportCurve: non-finite sample");
}

double SupportCurve::theta(int j) const { return kTwoPi * j / size(); }

std::vector<double> curvature_radius(const SupportCurve& curve) {
  std::vector<double> rho = spectral::derivative(curve.h(), 2);
  for (int j = 0; j < curve.size(); ++j) {
    rho[j] += curve.h()[j];
    if (!(rho[j] > 0.0)) throw ConvexityError("curvature_radius: h + h'' <= 0");
  }
  return rho;
}

double closure_residual(const SupportCurve& curve) {
  const std::vector<double> rho = curvature_radius(curve);
  double sc = 0.0, ss = 0.0, s = 0.0;
  for (int j = 0; j < curve.size(); ++j) {
    sc += rho[j] * std::cos(curve.theta(j));
    ss += rho[j] * std::sin(curve.theta(j));
    s += rho[j];
  }
  return std::max(std::abs(sc), std::abs(ss)) / s;
}

FlowDiagnostics diagnostics(const SupportCurve& curve) {
  const std::vector<double> rho = curvature_radius(curve);
  const double dth = kTwoPi / curve.size();
  FlowDiagnostics d;
  for (int j = 0; j < curve.size(); ++j) {
    d.area += 0.5 * curve.h()[j] * rho[j] * dth;
    d.affine_length += std::cbrt(rho[j] * rho[j]) * dth;
  }
  if (!(d.area > 0.0)) throw ConvexityError("diagnostics: non-positive area");
  d.entropy = d.affine_length / std::cbrt(d.area);
  return d;
}

double entropy(const SupportCurve& curve) { return diagnostics(curve).entropy; }

double petty_bound() { return 2.0 * std::cbrt(M_PI * M_PI); }

FlowState make_state(const SupportCurve& curve, double t) { return FlowState{curve, t, diagnostics(curve)}; }

double dt_max(const FlowState& state, Scheme scheme) {
  const std::vector<double> rho = curvature_radius(state.curve);
  const double r43 = std::pow(min_of(rho), 4.0 / 3.0);
  if (scheme == Scheme::Explicit) {
    const double dth = kTwoPi / state.curve.size();
    return 0.25 * r43 * dth * dth;
  }
  return 0.0025 * r43;
}

FlowState flow_step(const FlowState& state, double dt, Scheme scheme) {
  if (!(dt >= 0.0)) throw ArgumentError("flow_step: dt must be non-negative");
  if (dt == 0.0) return state;
  const double limit = dt_max(state, scheme);
  if (dt > limit) throw ArgumentError("flow_step: dt exceeds dt_max = " + std::to_string(limit));
  const int n = state.curve.size();
  const std::vector<cplx> hh = spectral::forward(state.curve.h());
  std::vector<cplx> next(hh.size());
  try {
    std::vector<double> rho;
    const std::vector<cplx> s0 = speed_hat(hh, n, &rho);
    if (scheme == Scheme::Explicit) {
      std::vector<cplx> pred(hh.size());
      for (std::size_t k = 0; k < hh.size(); ++k) pred[k] = hh[k] + dt * s0[k];
      const std::vector<cplx> s1 = speed_hat(pred, n);
      for (std::size_t k = 0; k < hh.size(); ++k) next[k] = hh[k] + 0.5 * dt * (s0[k] + s1[k]);
    } else {
      double sigma = 0.0;
      for (double r : rho) sigma = std::max(sigma, std::pow(r, -4.0 / 3.0) / 6.0);
      std::vector<cplx> pred(hh.size());
      for (std::size_t k = 0; k < hh.size(); ++k) {
        const double L = 1.0 - static_cast<double>(k) * k;
        pred[k] = (hh[k] + dt * s0[k] - dt * sigma * L * hh[k]) / (1.0 - dt * sigma * L);
      }
      const std::vector<cplx> s1 = speed_hat(pred, n);
      for (std::size_t k = 0; k < hh.size(); ++k) {
        const double L = 1.0 - static_cast<double>(k) * k;
        next[k] = (hh[k] + 0.5 * dt * (s0[k] + s1[k]) - dt * sigma * L * pred[k]) / (1.0 - dt * sigma * L);
      }
    }
    return make_state(SupportCurve(spectral::inverse(next, n)), state.t + dt);
  } catch (const ConvexityError& e) {
    throw FlowConvexityError(std::string("flow_step: convexity lost: ") + e.what(), state);
  }
}

EllipseFit fit_ellipse(const SupportCurve& curve) {
  const int n = curve.size();
  const std::vector<cplx> c = spectral::forward(curve.h());
  EllipseFit fit;
  fit.center = {2.0 * c[1].real() / n, -2.0 * c[1].imag() / n};
  // linear start: (h - x0.u)^2 = alpha + beta cos 2t + gamma sin 2t
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  for (int j = 0; j < n; ++j) {
    const double t = curve.theta(j);
    const double g = curve.h()[j] - fit.center.x * std::cos(t) - fit.center.y * std::sin(t);
    A(j, 0) = 1.0;
    A(j, 1) = std::cos(2 * t);
    A(j, 2) = std::sin(2 * t);
    b(j) = g * g;
  }
  const Eigen::Vector3d abc = A.colPivHouseholderQr().solve(b);
  Eigen::VectorXd p(5);
  p << fit.center.x, fit.center.y, abc(0) + abc(1), abc(2), abc(0) - abc(1);
  auto model = [&](const Eigen::VectorXd& q, int j, double* grad) {
    const double t = curve.theta(j), cs = std::cos(t), sn = std::sin(t);
    const double quad = std::max(q(2) * cs * cs + 2.0 * q(3) * cs * sn + q(4) * sn * sn, 1e-300);
    const double s = std::sqrt(quad);
    if (grad) {
      grad[0] = cs;
      grad[1] = sn;
      grad[2] = cs * cs / (2.0 * s);
      grad[3] = cs * sn / s;
      grad[4] = sn * sn / (2.0 * s);
    }
    return q(0) * cs + q(1) * sn + s;
  };
  // Gauss-Newton on the 5 parameters
  Eigen::MatrixXd J(n, 5);
  Eigen::VectorXd r(n);
  for (int it = 0; it < 30; ++it) {
    for (int j = 0; j < n; ++j) {
      double g[5];
      r(j) = curve.h()[j] - model(p, j, g);
      for (int q = 0; q < 5; ++q) J(j, q) = g[q];
    }
    const Eigen::VectorXd step = J.colPivHouseholderQr().solve(r);
    p += step;
    if (step.norm() <= 1e-15 * p.norm()) break;
  }
  fit.center = {p(0), p(1)};
  fit.m11 = p(2);
  fit.m12 = p(3);
  fit.m22 = p(4);
  double sup = 0.0, mean = 0.0;
  for (int j = 0; j < n; ++j) {
    const double m = model(p, j, nullptr);
    sup = std::max(sup, std::abs(curve.h()[j] - m));
    mean += (m - p(0) * std::cos(curve.theta(j)) - p(1) * std::sin(curve.theta(j))) / n;
  }
  fit.residual = sup / mean;
  return fit;
}

FlowRun run_flow(const SupportCurve& initial, const FlowOptions& opts) {
  if (!(opts.dt > 0.0)) throw ArgumentError("run_flow: dt must be positive");
  if (opts.cadence < 1) throw ArgumentError("run_flow: cadence must be >= 1");
  const StopRule& stop = opts.stop;
  if (!(stop.area_fraction > 0.0) && !(stop.t_end > 0.0) && stop.max_steps <= 0)
    throw ArgumentError("run_flow: no stopping rule given");
  FlowRun run;
  FlowState state = make_state(initial);
  const double area0 = state.diag.area;
  const double floor_area = std::max(stop.area_fraction, opts.extinction_fraction) * area0;
  auto record = [&](const FlowState& s) {
    run.series.push_back(s);
    run.fit_residuals.push_back(fit_ellipse(s.curve).residual);
  };
  record(state);
  run.min_entropy_increment = std::numeric_limits<double>::infinity();
  while (true) {
    if (stop.max_steps > 0 && run.steps >= stop.max_steps) break;
    if (state.diag.area <= floor_area) break;
    if (stop.t_end > 0.0 && state.t >= stop.t_end) break;
    double dt = opts.dt;
    if (stop.t_end > 0.0) dt = std::min(dt, stop.t_end - state.t);
    if (opts.adapt_dt) dt = std::min(dt, dt_max(state, opts.scheme));
    FlowState next = flow_step(state, dt, opts.scheme);
    if (stop.t_end > 0.0 && stop.t_end - next.t < 1e-12 * stop.t_end) next.t = stop.t_end;
    const double inc = next.diag.entropy - state.diag.entropy;
    run.min_entropy_increment = std::min(run.min_entropy_increment, inc);
    if (inc < -opts.entropy_slack)
      throw IntegratorError("run_flow: entropy decreased by " + std::to_string(-inc) + " at t = " +
                            std::to_string(next.t));
    const double rate = (next.diag.area - state.diag.area) / dt;
    run.max_area_rate_error = std::max(run.max_area_rate_error,
                                       std::abs(rate + state.diag.affine_length) / state.diag.affine_length);
    state = std::move(next);
    ++run.steps;
    if (run.steps % opts.cadence == 0) record(state);
  }
  if (run.steps % opts.cadence != 0) record(state);
  return run;
}

SupportCurve affine_image(const SupportCurve& curve, std::span<const double> L) {
  if (L.size() != 4) throw ArgumentError("affine_image: L must be 2x2");
  const spectral::TrigSeries hk = spectral::TrigSeries::from_samples(curve.h());
  std::vector<double> h(curve.size());
  for (int j = 0; j < curve.size(); ++j) {
    const double t = curve.theta(j), cs = std::cos(t), sn = std::sin(t);
    const double vx = L[0] * cs + L[2] * sn, vy = L[1] * cs + L[3] * sn;  // L^T u
    h[j] = std::hypot(vx, vy) * hk.value(std::atan2(vy, vx));
  }
  return SupportCurve(std::move(h));
}

SupportCurve ellipse_curve(double a, double b, int N, double angle, Vec2 c) {
  if (!(a > 0.0 && b > 0.0)) throw ArgumentError("ellipse_curve: semi-axes must be positive");
  std::vector<double> h(N);
  for (int j = 0; j < N; ++j) {
    const double t = kTwoPi * j / N;
    const double ca = std::cos(t - angle), sa = std::sin(t - angle);
    h[j] = c.x * std::cos(t) + c.y * std::sin(t) + std::sqrt(a * a * ca * ca + b * b * sa * sa);
  }
  return SupportCurve(std::move(h));
}

SupportCurve random_convex_curve(std::uint64_t seed, int N) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double amp[9] = {}, phase[9] = {};
  double total = 0.0;
  for (int k = 3; k <= 8; ++k) {
    amp[k] = unif(rng) * unif(rng);
    phase[k] = kTwoPi * unif(rng);
    total += amp[k];
  }
  const double target = 0.02 + 0.10 * unif(rng);
  double bend = 0.0;
  for (int k = 3; k <= 8; ++k) {
    amp[k] *= target / total;
    bend += amp[k] * (k * k - 1);
  }
  if (bend > 0.7)  // keep rho >= 0.3
    for (int k = 3; k <= 8; ++k) amp[k] *= 0.7 / bend;
  std::vector<double> h(N);
  for (int j = 0; j < N; ++j) {
    const double t = kTwoPi * j / N;
    h[j] = 1.0;
    for (int k = 3; k <= 8; ++k) h[j] += amp[k] * std::cos(k * t + phase[k]);
  }
  const double s = 1.0 + unif(rng), a1 = kTwoPi * unif(rng), a2 = kTwoPi * unif(rng);
  const Eigen::Matrix2d R1 = Eigen::Rotation2Dd(a1).toRotationMatrix();
  const Eigen::Matrix2d R2 = Eigen::Rotation2Dd(a2).toRotationMatrix();
  const Eigen::Matrix2d L = R1 * Eigen::Vector2d(s, 1.0 / s).asDiagonal() * R2;
  const double Lr[4] = {L(0, 0), L(0, 1), L(1, 0), L(1, 1)};
  return affine_image(SupportCurve(std::move(h)), Lr);
}

Correspondence levelset_correspondence(const EllipsoidSpec& spec, int N, double dt, double t_fraction,
                                       int cadence) {
  spec.validate();
  if (spec.n != 2) throw ArgumentError("levelset_correspondence: planar specs only");
  if (!(t_fraction > 0.0 && t_fraction < 1.0)) throw ArgumentError("t_fraction must lie in (0, 1)");
  Correspondence out;
  out.t_extinction = 0.75 * std::cbrt(spec.c * spec.c);  // g(c/2) for n = 2
  FlowOptions opts;
  opts.dt = dt;
  opts.cadence = cadence;
  opts.stop.t_end = t_fraction * out.t_extinction;
  const FlowRun run = run_flow(SupportCurve(level_set_support(spec, 0.0, N)), opts);
  for (const FlowState& st : run.series) {
    const double s = g_inverse(st.t, spec.c, 2);
    const std::vector<double> ref = level_set_support(spec, s, N);
    double d = 0.0;
    for (int j = 0; j < N; ++j) d = std::max(d, std::abs(st.curve.h()[j] - ref[j]));
    out.times.push_back(st.t);
    out.distances.push_back(d);
    out.max_distance = std::max(out.max_distance, d);
  }
  return out;
}

}  // namespace ovma
