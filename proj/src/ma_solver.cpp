#include "ovma/ma_solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ovma/errors.hpp"

namespace ovma {

const std::array<std::array<int, 2>, kArms> kArmStep{{{1, 0}, {-1, 0}, {0, 1}, {0, -1},
                                                     {1, 1}, {-1, -1}, {1, -1}, {-1, 1}}};

GridPtr discretize(DomainPtr domain, int N) {
  if (!domain) throw ArgumentError("discretize: null domain");
  if (N < 16) throw ArgumentError("discretize: N must be >= 16");
  auto g = std::make_shared<GridDomain>();
  g->domain = domain;
  g->N = N;
  const Box b = domain->bbox();
  const double L = std::max(b.hi.x - b.lo.x, b.hi.y - b.lo.y);
  if (!(L > 0.0) || !std::isfinite(L)) throw ConstructionError("discretize: degenerate bounding box");
  g->h = L / N;
  const Vec2 c = 0.5 * (b.lo + b.hi);
  g->first_node = {c.x + (0.5 - 0.5 * N) * g->h, c.y + (0.5 - 0.5 * N) * g->h};
  g->index.assign(static_cast<std::size_t>(N) * N, -1);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i)
      if (domain->contains(g->node(i, j))) {
        g->index[static_cast<std::size_t>(j) * N + i] = static_cast<int>(g->node_i.size());
        g->node_i.push_back(i);
        g->node_j.push_back(j);
      }
  const int n = g->size();
  if (n < 9) throw ConstructionError("discretize: fewer than 9 interior nodes");
  g->nbr.resize(n);
  g->frac.resize(n);
  for (int k = 0; k < n; ++k) {
    const Vec2 p = g->point(k);
    for (int a = 0; a < kArms; ++a) {
      const int id = g->id(g->node_i[k] + kArmStep[a][0], g->node_j[k] + kArmStep[a][1]);
      g->nbr[k][a] = id;
      if (id >= 0) {
        g->frac[k][a] = 1.0;
        continue;
      }
      const double len = g->arm_length(a);
      const Vec2 d = (1.0 / len) * Vec2{kArmStep[a][0] * g->h, kArmStep[a][1] * g->h};
      const double t = domain->exit_distance(p, d) / len;
      if (!std::isfinite(t)) throw ConstructionError("discretize: boundary intersection failed");
      g->frac[k][a] = std::clamp(t, 1e-12, 1.0);
    }
  }
  return g;
}

std::vector<double> sample_on_grid(const GridDomain& grid, const std::function<double(Vec2)>& f) {
  std::vector<double> out(grid.size());
  for (int k = 0; k < grid.size(); ++k) out[k] = f(grid.point(k));
  return out;
}

namespace {

struct PairDiff {
  double d = 0.0;    // second difference
  double dself = 0.0;
  double dfwd = 0.0;
  double dback = 0.0;
};

inline PairDiff pair_diff(const GridDomain& g, std::span<const double> u, int k, int p) {
  const int af = 2 * p, ab = 2 * p + 1;
  const double a = g.frac[k][af], b = g.frac[k][ab];
  const double H = g.arm_length(af);
  const double uf = g.nbr[k][af] >= 0 ? u[g.nbr[k][af]] : 0.0;
  const double ub = g.nbr[k][ab] >= 0 ? u[g.nbr[k][ab]] : 0.0;
  const double s = 2.0 / (H * H * (a + b));
  PairDiff r;
  r.dfwd = s / a;
  r.dback = s / b;
  r.dself = -(r.dfwd + r.dback);
  r.d = r.dfwd * (uf - u[k]) + r.dback * (ub - u[k]);
  return r;
}

// F = D1+ D2+ - D1- - D2- and its partial derivatives
inline double frame_value(double d1, double d2, double& g1, double& g2) {
  const double p1 = std::max(d1, 0.0), p2 = std::max(d2, 0.0);
  g1 = d1 > 0.0 ? p2 : 1.0;
  g2 = d2 > 0.0 ? p1 : 1.0;
  return p1 * p2 + std::min(d1, 0.0) + std::min(d2, 0.0);
}

// min(fa, fd) or its soft version; wa, wd are the weights of each frame.
inline double combine(double fa, double fd, double s, double& wa, double& wd) {
  if (s <= 0.0) {
    wa = fa <= fd ? 1.0 : 0.0;
    wd = 1.0 - wa;
    return std::min(fa, fd);
  }
  const double m = std::min(fa, fd), gap = std::abs(fa - fd);
  const double e = std::exp(-s * gap);
  const double wmin = 1.0 / (1.0 + e), wmax = e / (1.0 + e);
  if (fa <= fd) wa = wmin, wd = wmax;
  else wa = wmax, wd = wmin;
  return m - std::log1p(e) / s;
}

inline double node_residual(const GridDomain& g, std::span<const double> u, int k, double s) {
  PairDiff q[4];
  for (int p = 0; p < 4; ++p) q[p] = pair_diff(g, u, k, p);
  double g1, g2, wa, wd;
  const double fa = frame_value(q[0].d, q[1].d, g1, g2);
  const double fd = frame_value(q[2].d, q[3].d, g1, g2);
  return combine(fa, fd, s, wa, wd) - 1.0;
}

inline double node_jacobian(const GridDomain& g, const JacobianPattern& pat, std::span<const double> u,
                            int k, double s, std::span<double> values) {
  PairDiff q[4];
  for (int p = 0; p < 4; ++p) q[p] = pair_diff(g, u, k, p);
  double dF[4];
  const double fa = frame_value(q[0].d, q[1].d, dF[0], dF[1]);
  const double fd = frame_value(q[2].d, q[3].d, dF[2], dF[3]);
  double wa, wd;
  const double ma = combine(fa, fd, s, wa, wd);
  double coef[4] = {wa * dF[0], wa * dF[1], wd * dF[2], wd * dF[3]};
  int pos = pat.row_start[k];
  double diag = 0.0;
  for (int p = 0; p < 4; ++p) diag += coef[p] * q[p].dself;
  values[pos++] = diag;
  for (int a = 0; a < kArms; ++a) {
    if (g.nbr[k][a] < 0) continue;
    const int p = a / 2;
    values[pos++] = coef[p] * (a % 2 == 0 ? q[p].dfwd : q[p].dback);
  }
  return ma - 1.0;
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double second_difference(const GridDomain& grid, std::span<const double> u, int k, int pair) {
  return pair_diff(grid, u, k, pair).d;
}

double first_difference(const GridDomain& g, std::span<const double> u, int k, int p) {
  const int af = 2 * p, ab = 2 * p + 1;
  const double a = g.frac[k][af], b = g.frac[k][ab];
  const double H = g.arm_length(af);
  const double uf = g.nbr[k][af] >= 0 ? u[g.nbr[k][af]] : 0.0;
  const double ub = g.nbr[k][ab] >= 0 ? u[g.nbr[k][ab]] : 0.0;
  return (b * b * (uf - u[k]) - a * a * (ub - u[k])) / (a * b * (a + b) * H);
}

JacobianPattern jacobian_pattern(const GridDomain& grid) {
  JacobianPattern pat;
  pat.row_start.reserve(grid.size() + 1);
  pat.row_start.push_back(0);
  for (int k = 0; k < grid.size(); ++k) {
    pat.cols.push_back(k);
    for (int a = 0; a < kArms; ++a)
      if (grid.nbr[k][a] >= 0) pat.cols.push_back(grid.nbr[k][a]);
    pat.row_start.push_back(static_cast<int>(pat.cols.size()));
  }
  return pat;
}

void residual_serial(const GridDomain& grid, std::span<const double> u, double s, std::span<double> out) {
  for (int k = 0; k < grid.size(); ++k) out[k] = node_residual(grid, u, k, s);
}

void residual_parallel(const GridDomain& grid, std::span<const double> u, double s, std::span<double> out) {
  const int n = grid.size();
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) out[k] = node_residual(grid, u, k, s);
}

void jacobian_serial(const GridDomain& grid, const JacobianPattern& pat, std::span<const double> u, double s,
                     std::span<double> resid, std::span<double> values) {
  for (int k = 0; k < grid.size(); ++k) resid[k] = node_jacobian(grid, pat, u, k, s, values);
}

void jacobian_parallel(const GridDomain& grid, const JacobianPattern& pat, std::span<const double> u,
                       double s, std::span<double> resid, std::span<double> values) {
  const int n = grid.size();
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) resid[k] = node_jacobian(grid, pat, u, k, s, values);
}

ScalarField solve(GridPtr grid, const SolveOptions& opts) {
  if (!grid) throw ArgumentError("solve: null grid");
  if (!(opts.tol >= 1e-12)) throw ArgumentError("solve: tol must be >= 1e-12");
  const GridDomain& g = *grid;
  const int n = g.size();

  ScalarField field;
  field.grid = grid;
  if (opts.initial) {
    if (static_cast<int>(opts.initial->size()) != n) throw ArgumentError("solve: initial guess size mismatch");
    field.u = *opts.initial;
  } else {
    const Box b = g.domain->bbox();
    const Vec2 c = 0.5 * (b.lo + b.hi);
    double r2 = 0.0;
    for (const BoundarySample& s : g.domain->boundary_samples(2048))
      r2 = std::max(r2, dot(s.point - c, s.point - c));
    field.u = sample_on_grid(g, [&](Vec2 p) { return 0.5 * (dot(p - c, p - c) - r2); });
  }

  const JacobianPattern pat = jacobian_pattern(g);
  std::vector<Eigen::Triplet<double>> trips(pat.cols.size());
  std::vector<double> values(pat.cols.size()), resid(n), trial(n), trial_res(n);
  Eigen::SparseMatrix<double> J(n, n);
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;

  auto residual = [&](std::span<const double> u, double s, std::span<double> out) {
    if (opts.parallel) residual_parallel(g, u, s, out);
    else residual_serial(g, u, s, out);
    return inf_norm(out);
  };

  residual(field.u, 0.0, resid);
  std::vector<double> stages;
  if (inf_norm(resid) > opts.skip_soft_below) stages = opts.sharpness;
  stages.push_back(0.0);

  int iters = 0;
  for (std::size_t st = 0; st < stages.size(); ++st) {
    const double s = stages[st];
    const bool final_stage = st + 1 == stages.size();
    const double stage_tol = final_stage ? opts.tol : std::max(opts.tol, 1e-6);
    for (int it = 0;; ++it) {
      if (opts.parallel) jacobian_parallel(g, pat, field.u, s, resid, values);
      else jacobian_serial(g, pat, field.u, s, resid, values);
      const double rn = inf_norm(resid);
      if (rn <= stage_tol) break;
      if (it == opts.max_iterations) {
        if (final_stage) throw ConvergenceError("solve: Newton iteration limit reached", field.history);
        break;
      }
      for (int k = 0; k < n; ++k)
        for (int e = pat.row_start[k]; e < pat.row_start[k + 1]; ++e)
          trips[e] = Eigen::Triplet<double>(k, pat.cols[e], values[e]);
      J.setFromTriplets(trips.begin(), trips.end());
      if (!analyzed) {
        lu.analyzePattern(J);
        analyzed = true;
      }
      lu.factorize(J);
      if (lu.info() != Eigen::Success) throw ConvergenceError("solve: singular Newton Jacobian", field.history);
      Eigen::Map<const Eigen::VectorXd> r(resid.data(), n);
      const Eigen::VectorXd delta = lu.solve(-r);

      double lambda = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 40; ++bt, lambda *= 0.5) {
        for (int k = 0; k < n; ++k) trial[k] = field.u[k] + lambda * delta(k);
        const double tn = residual(trial, s, trial_res);
        if (tn < rn) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (final_stage) throw ConvergenceError("solve: Newton stagnated after 40 backtracks", field.history);
        break;
      }
      field.u.swap(trial);
      ++iters;
      field.history.push_back(inf_norm(trial_res));
    }
  }

  field.certificate.resid_inf = residual(field.u, 0.0, resid);
  field.certificate.newton_iters = iters;
  field.certificate.N = g.N;
  field.certificate.tol = opts.tol;
  if (field.certificate.resid_inf > opts.tol)
    throw ConvergenceError("solve: residual above tolerance", field.history);

  double mfp = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    const double d0 = second_difference(g, field.u, k, 0), d1 = second_difference(g, field.u, k, 1);
    const double d2 = second_difference(g, field.u, k, 2), d3 = second_difference(g, field.u, k, 3);
    mfp = std::min({mfp, d0 * d1, d2 * d3});
  }
  field.min_frame_product = mfp;
  return field;
}

std::optional<double> interpolate(const ScalarField& field, Vec2 q) {
  const GridDomain& g = *field.grid;
  const double fi = (q.x - g.first_node.x) / g.h, fj = (q.y - g.first_node.y) / g.h;
  const int i0 = static_cast<int>(std::lround(fi)), j0 = static_cast<int>(std::lround(fj));
  int best_i = 0, best_j = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int di = -2; di <= 2; ++di)
    for (int dj = -2; dj <= 2; ++dj) {
      const int ic = i0 + di, jc = j0 + dj;
      const double dist = std::max(std::abs(fi - ic), std::abs(fj - jc));
      if (dist > 1.5 || dist >= best) continue;
      bool ok = true;
      for (int a = -1; a <= 1 && ok; ++a)
        for (int b = -1; b <= 1 && ok; ++b) ok = g.id(ic + a, jc + b) >= 0;
      if (ok) best = dist, best_i = ic, best_j = jc;
    }
  if (!std::isfinite(best)) return std::nullopt;
  auto lagrange = [](double t, double w[3]) {
    w[0] = 0.5 * t * (t - 1.0);
    w[1] = 1.0 - t * t;
    w[2] = 0.5 * t * (t + 1.0);
  };
  double wx[3], wy[3];
  lagrange(fi - best_i, wx);
  lagrange(fj - best_j, wy);
  double v = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) v += wx[a] * wy[b] * field.u[g.id(best_i + a - 1, best_j + b - 1)];
  return v;
}

BoundaryTrace boundary_trace(const ScalarField& field, int M) {
  if (M < 32) throw ArgumentError("boundary_trace: M must be >= 32");
  const GridDomain& g = *field.grid;
  BoundaryTrace tr;
  const double cand[4] = {1.5, 2.0, 2.5, 3.0};
  for (const BoundarySample& bs : g.domain->boundary_samples(M)) {
    TraceSample ts;
    ts.point = bs.point;
    ts.normal = bs.normal;
    ts.curvature = bs.curvature;
    ts.ds = bs.ds;
    std::optional<double> vals[4];
    for (int c = 0; c < 4; ++c) vals[c] = interpolate(field, bs.point - (cand[c] * g.h) * bs.normal);
    int c1 = -1, c2 = -1;
    for (int a = 0; a < 4 && c1 < 0; ++a)
      for (int b = a + 1; b < 4; ++b)
        if (vals[a] && vals[b] && cand[b] - cand[a] >= 1.0) {
          c1 = a, c2 = b;
          break;
        }
    if (c1 < 0) {
      ts.degenerate = true;
      ++tr.degenerate_count;
    } else {
      const double s1 = cand[c1] * g.h, s2 = cand[c2] * g.h;
      const double u1 = *vals[c1], u2 = *vals[c2];
      const double alpha = (u1 * s2 * s2 - u2 * s1 * s1) / (s1 * s2 * (s2 - s1));
      ts.grad_norm = std::abs(alpha);
      ts.w = ts.curvature * std::pow(ts.grad_norm, 3);
    }
    tr.samples.push_back(ts);
  }
  tr.reliable = tr.degenerate_count <= 0.05 * M;
  return tr;
}

}  // namespace ovma
