#pragma once

// Planar affine curvature flow h_t = -(h + h'')^{-1/3} in support-function
// form, the entropy V^{-1/3} int rho^{2/3} dtheta, ellipse fitting, and the
// correspondence between the flow and level sets of the exact solution.

#include <cstdint>
#include <span>
#include <vector>

#include "ovma/errors.hpp"
#include "ovma/exact_solutions.hpp"
#include "ovma/geometry.hpp"

namespace ovma {

/// Support-function samples on theta_j = 2 pi j / N, N a power of two >= 16.
class SupportCurve {
 public:
  explicit SupportCurve(std::vector<double> h);

  int size() const noexcept { return static_cast<int>(h_.size()); }
  std::span<const double> h() const noexcept { return h_; }
  double theta(int j) const;

 private:
  std::vector<double> h_;
};

/// rho = h + h'' (spectral); ConvexityError if any rho_j <= 0.
std::vector<double> curvature_radius(const SupportCurve& curve);
/// |sum rho cos|, |sum rho sin| relative to sum rho.
double closure_residual(const SupportCurve& curve);

struct FlowDiagnostics {
  double area = 0.0;
  double affine_length = 0.0;
  double entropy = 0.0;
};
FlowDiagnostics diagnostics(const SupportCurve& curve);
double entropy(const SupportCurve& curve);

/// Value of the entropy on ellipses, 2 pi^{2/3}.
double petty_bound();

struct FlowState {
  SupportCurve curve;
  double t = 0.0;
  FlowDiagnostics diag;
};
FlowState make_state(const SupportCurve& curve, double t = 0.0);

enum class Scheme { SemiImplicit, Explicit };

/// Largest admissible step. Explicit: 0.25 min rho^{4/3} (2 pi / N)^2.
/// Semi-implicit: 0.0025 min rho^{4/3}, an accuracy bound that keeps the
/// relative change of L_aff per step near 1e-3 close to extinction.
double dt_max(const FlowState& state, Scheme scheme = Scheme::SemiImplicit);

/// Raised when a step destroys convexity; carries the last valid state.
class FlowConvexityError : public ConvexityError {
 public:
  FlowConvexityError(const std::string& what, FlowState last)
      : ConvexityError(what), last_(std::move(last)) {}
  const FlowState& last_valid() const noexcept { return last_; }

 private:
  FlowState last_;
};

/// One step. Semi-implicit: predictor-corrector with a constant stabiliser
/// sigma = max (1/3) rho^{-4/3} applied through (1 - dt sigma (1 + d^2)),
/// which is diagonal in Fourier space. ArgumentError if dt > dt_max.
FlowState flow_step(const FlowState& state, double dt, Scheme scheme = Scheme::SemiImplicit);

struct EllipseFit {
  Vec2 center;
  double m11 = 0.0, m12 = 0.0, m22 = 0.0;  // h(u) = center.u + sqrt(u^T M u)
  double residual = 0.0;                   // sup |h - fit| / mean sqrt(u^T M u)
};
EllipseFit fit_ellipse(const SupportCurve& curve);

struct StopRule {
  double area_fraction = 0.0;  // stop once area <= fraction * initial area
  double t_end = 0.0;          // stop at this time (exactly)
  long max_steps = 0;
};

struct FlowOptions {
  double dt = 1e-4;
  StopRule stop;
  int cadence = 100;  // record every cadence steps (plus first and last)
  Scheme scheme = Scheme::SemiImplicit;
  double entropy_slack = 1e-6;
  /// Shrink dt to dt_max when needed instead of failing.
  bool adapt_dt = true;
  /// Absolute floor; the flow always stops below 1e-4 of the initial area.
  double extinction_fraction = 1e-4;
};

struct FlowRun {
  std::vector<FlowState> series;
  std::vector<double> fit_residuals;  // one per recorded state
  long steps = 0;
  double min_entropy_increment = 0.0;
  double max_area_rate_error = 0.0;  // |dV/dt + L_aff| / L_aff, per step
};

/// IntegratorError if the entropy decreases by more than entropy_slack.
FlowRun run_flow(const SupportCurve& initial, const FlowOptions& opts);

/// Support function of L K: h(u) = |L^T u| h_K(L^T u / |L^T u|), L row-major 2x2.
SupportCurve affine_image(const SupportCurve& curve, std::span<const double> L);
/// Ellipse with semi-axes a, b rotated by angle, centred at c.
SupportCurve ellipse_curve(double a, double b, int N, double angle = 0.0, Vec2 c = {});

/// Smooth convex body for the randomized corpora: unit circle plus random
/// modes 3..8, total amplitude in [0.02, 0.12], then a random area-preserving
/// linear map. Deterministic in seed.
SupportCurve random_convex_curve(std::uint64_t seed, int N);

struct Correspondence {
  std::vector<double> times;
  std::vector<double> distances;  // sup_j |h_flow - h_level|
  double max_distance = 0.0;
  double t_extinction = 0.0;
};

/// Runs the flow from the boundary of a planar ellipsoid spec and compares it
/// with the level sets {psi > t} of the exact solution up to t_fraction t_E.
Correspondence levelset_correspondence(const EllipsoidSpec& spec, int N, double dt, double t_fraction = 0.5,
                                       int cadence = 100);

}  // namespace ovma
