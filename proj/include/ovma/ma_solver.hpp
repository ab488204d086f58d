#pragma once

// Finite-difference Dirichlet solver for det D^2u = 1, u = 0 on the boundary
// of a smooth convex planar domain, and reconstruction of boundary data.
//
// Discretization: cell-centred N x N lattice over the bounding box. Each
// interior node has 8 arms (+x, -x, +y, -y, (1,1), (-1,-1), (1,-1), (-1,1));
// an arm that leaves the domain is cut at the boundary, where u = 0. The
// operator is the two-frame monotone form
//   MA_h = min over {axis, diagonal} of  D1+ D2+ - D1- - D2-
// with D the non-uniform three-point second difference along each arm pair.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ovma/domain.hpp"

namespace ovma {

inline constexpr int kArms = 8;

struct GridDomain {
  DomainPtr domain;
  int N = 0;
  double h = 0.0;
  Vec2 first_node;               // coordinates of lattice node (0, 0)
  std::vector<int> index;        // N*N, unknown id or -1
  std::vector<int> node_i, node_j;
  // per unknown: neighbour id along each arm (-1 when the arm is cut) and
  // the arm fraction in (0, 1]
  std::vector<std::array<int, kArms>> nbr;
  std::vector<std::array<double, kArms>> frac;

  int size() const { return static_cast<int>(node_i.size()); }
  Vec2 node(int i, int j) const { return {first_node.x + i * h, first_node.y + j * h}; }
  Vec2 point(int k) const { return node(node_i[k], node_j[k]); }
  int id(int i, int j) const {
    return (i < 0 || j < 0 || i >= N || j >= N) ? -1 : index[static_cast<std::size_t>(j) * N + i];
  }
  double arm_length(int arm) const { return arm < 4 ? h : h * M_SQRT2; }
};

using GridPtr = std::shared_ptr<const GridDomain>;

/// Lattice step of arm a.
extern const std::array<std::array<int, 2>, kArms> kArmStep;

/// N >= 16. Throws ConstructionError for degenerate domains.
GridPtr discretize(DomainPtr domain, int N);

struct SolveCertificate {
  double resid_inf = 0.0;
  int newton_iters = 0;
  int N = 0;
  double tol = 0.0;
};

struct ScalarField {
  GridPtr grid;
  std::vector<double> u;  // one value per unknown; 0 on the boundary implied
  SolveCertificate certificate;
  std::vector<double> history;  // residual after each Newton step
  double min_frame_product = 0.0;  // discrete convexity diagnostic
};

struct SolveOptions {
  double tol = 1e-10;
  int max_iterations = 60;  // per continuation stage
  std::vector<double> sharpness{1e1, 1e2, 1e3, 1e4};
  /// Soft stages are skipped when the initial exact residual is below this.
  double skip_soft_below = 1e-3;
  std::optional<std::vector<double>> initial;  // defaults to the enclosing-ball quadratic
  bool parallel = true;
};

ScalarField solve(GridPtr grid, const SolveOptions& opts = {});

/// Samples an arbitrary function on the interior nodes.
std::vector<double> sample_on_grid(const GridDomain& grid, const std::function<double(Vec2)>& f);

// Kernels. sharpness <= 0 selects the exact min. The Jacobian is written into
// a fixed sparsity pattern: per row the diagonal followed by every uncut arm.
struct JacobianPattern {
  std::vector<int> row_start;  // size()+1
  std::vector<int> cols;
};
JacobianPattern jacobian_pattern(const GridDomain& grid);

void residual_serial(const GridDomain& grid, std::span<const double> u, double sharpness,
                     std::span<double> out);
void residual_parallel(const GridDomain& grid, std::span<const double> u, double sharpness,
                       std::span<double> out);
void jacobian_serial(const GridDomain& grid, const JacobianPattern& pat, std::span<const double> u,
                     double sharpness, std::span<double> resid, std::span<double> values);
void jacobian_parallel(const GridDomain& grid, const JacobianPattern& pat, std::span<const double> u,
                       double sharpness, std::span<double> resid, std::span<double> values);

/// Second difference along arm pair (2p, 2p+1) at unknown k.
double second_difference(const GridDomain& grid, std::span<const double> u, int k, int pair);
/// First derivative along arm pair (2p, 2p+1), direction of arm 2p.
double first_difference(const GridDomain& grid, std::span<const double> u, int k, int pair);

/// Biquadratic interpolation from a 3x3 block of interior nodes near q.
std::optional<double> interpolate(const ScalarField& field, Vec2 q);

struct TraceSample {
  Vec2 point;
  Vec2 normal;
  double curvature = 0.0;
  double ds = 0.0;
  double grad_norm = 0.0;
  double w = 0.0;  // curvature * |Du|^3
  bool degenerate = false;
};

struct BoundaryTrace {
  std::vector<TraceSample> samples;
  int degenerate_count = 0;
  bool reliable = true;  // degenerate share <= 5%
};

/// M >= 32 samples from the analytic boundary; |Du| from the one-sided
/// quadratic fit u(s) = alpha s + beta s^2 along the inward normal.
BoundaryTrace boundary_trace(const ScalarField& field, int M);

}  // namespace ovma
