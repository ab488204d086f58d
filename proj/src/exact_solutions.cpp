#include "ovma/exact_solutions.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "ovma/errors.hpp"

namespace ovma {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMat matrix_of(const EllipsoidSpec& spec) {
  return Eigen::Map<const RowMat>(spec.A.data(), spec.n, spec.n);
}

SymMatrix gram(const RowMat& a) {
  const Eigen::MatrixXd g = a.transpose() * a;
  SymMatrix h(static_cast<int>(a.rows()));
  for (int i = 0; i < h.dim(); ++i)
    for (int j = i; j < h.dim(); ++j) h(i, j) = 0.5 * (g(i, j) + g(j, i));
  return h;
}

double quad_form(const DetDerivative& cof, std::span<const double> g) {
  const int n = cof.dim();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += cof(i, j) * g[i] * g[j];
  return s;
}

double vnorm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void check_s(double s, double c) {
  if (!(s >= 0.0 && s < 0.5 * c)) throw DomainError("s must lie in [0, c/2)");
}

}  // namespace

void EllipsoidSpec::validate() const {
  if (n < kMinDim || n > kMaxDim) throw ArgumentError("ellipsoid dimension must be in [2, 6]");
  if (static_cast<int>(A.size()) != n * n) throw ArgumentError("A must have n*n entries");
  if (static_cast<int>(x0.size()) != n) throw ArgumentError("x0 must have n entries");
  if (!(c > 0.0)) throw ArgumentError("c must be positive");
  const double d = dense_determinant(A, n);
  if (std::abs(d - 1.0) > 1e-12) throw ArgumentError("det A must equal 1 (got " + std::to_string(d) + ")");
}

EllipsoidSpec EllipsoidSpec::ball(int n, double c) {
  EllipsoidSpec s;
  s.n = n;
  s.A.assign(n * n, 0.0);
  for (int i = 0; i < n; ++i) s.A[i * n + i] = 1.0;
  s.x0.assign(n, 0.0);
  s.c = c;
  s.validate();
  return s;
}

EllipsoidSpec EllipsoidSpec::ellipse(double a, double c, double cx, double cy) {
  if (!(a > 0.0)) throw ArgumentError("ellipse parameter a must be positive");
  EllipsoidSpec s;
  s.n = 2;
  s.A = {a, 0.0, 0.0, 1.0 / a};
  s.x0 = {cx, cy};
  s.c = c;
  s.validate();
  return s;
}

double unit_ball_volume(int n) {
  return std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

FieldSample evaluate(const EllipsoidSpec& spec, std::span<const double> x) {
  const int n = spec.n;
  if (static_cast<int>(x.size()) != n) throw ArgumentError("evaluate: point dimension mismatch");
  const RowMat a = matrix_of(spec);
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = x[i] - spec.x0[i];
  const Eigen::VectorXd ad = a * d;
  const Eigen::VectorXd g = a.transpose() * ad;
  FieldSample out;
  out.u = 0.5 * (ad.squaredNorm() - spec.c);
  out.grad.assign(g.data(), g.data() + n);
  out.hessian = gram(a);
  return out;
}

SphereQuadrature sphere_quadrature(int n, int q) {
  if (n < 2 || q < 1) throw ArgumentError("sphere_quadrature: need n >= 2, q >= 1");
  SphereQuadrature out;
  out.n = n;
  if (n == 2) {
    const int m = 4 * q;
    for (int k = 0; k < m; ++k) {
      const double t = 2.0 * M_PI * (k + 0.5) / m;
      out.points.push_back(std::cos(t));
      out.points.push_back(std::sin(t));
      out.weights.push_back(2.0 * M_PI / m);
    }
    return out;
  }
  // polar angle p carries the weight sin^{n-2-p}; with t = cos(phi) this is
  // the Gauss-Jacobi weight (1 - t^2)^{(n-3-p)/2}
  const int polar = n - 2, az = 2 * q;
  std::vector<std::vector<double>> gx(polar), gw(polar);
  for (int p = 0; p < polar; ++p) gauss_jacobi(q, 0.5 * (n - 3 - p), gx[p], gw[p]);
  std::vector<int> idx(polar, 0);
  std::vector<double> z(n);
  while (true) {
    for (int k = 0; k < az; ++k) {
      double w = 2.0 * M_PI / az, sprod = 1.0;
      for (int p = 0; p < polar; ++p) {
        const double t = gx[p][idx[p]];
        z[p] = sprod * t;
        w *= gw[p][idx[p]];
        sprod *= std::sqrt(std::max(0.0, 1.0 - t * t));
      }
      const double phi = 2.0 * M_PI * (k + 0.5) / az;
      z[n - 2] = sprod * std::cos(phi);
      z[n - 1] = sprod * std::sin(phi);
      out.points.insert(out.points.end(), z.begin(), z.end());
      out.weights.push_back(w);
    }
    int p = 0;
    while (p < polar && ++idx[p] == q) idx[p++] = 0;
    if (p == polar) break;
  }
  return out;
}

void gauss_jacobi(int q, double a, std::vector<double>& nodes, std::vector<double>& weights) {
  if (q < 1 || a < 0.0) throw ArgumentError("gauss_jacobi: need q >= 1, a >= 0");
  // Golub-Welsch on the symmetric Jacobi matrix for the weight (1 - t^2)^a.
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(q, q);
  for (int k = 1; k < q; ++k) {
    const double s = 2.0 * k + 2.0 * a;
    const double b2 = 4.0 * k * (k + a) * (k + a) * (k + 2.0 * a) / (s * s * (s + 1.0) * (s - 1.0));
    j(k, k - 1) = j(k - 1, k) = std::sqrt(b2);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  const double mu0 = std::pow(2.0, 2.0 * a + 1.0) * std::tgamma(a + 1.0) * std::tgamma(a + 1.0) /
                     std::tgamma(2.0 * a + 2.0);
  nodes.resize(q);
  weights.resize(q);
  for (int i = 0; i < q; ++i) {
    nodes[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    weights[i] = mu0 * v * v;
  }
}

double boundary_cone_integral(const EllipsoidSpec& spec,
                              const std::function<double(std::span<const double>)>& f) {
  spec.validate();
  const int n = spec.n;
  const RowMat ainv = matrix_of(spec).inverse();
  const double sc = std::sqrt(spec.c);
  const double jac = std::pow(spec.c, 0.5 * n);  // |det(sqrt(c) A^{-1})|
  auto integrate = [&](int q) {
    const SphereQuadrature sq = sphere_quadrature(n, q);
    std::vector<double> x(n);
    double total = 0.0;
    for (std::size_t k = 0; k < sq.size(); ++k) {
      Eigen::Map<const Eigen::VectorXd> z(sq.points.data() + k * n, n);
      const Eigen::VectorXd bz = sc * (ainv * z);
      for (int i = 0; i < n; ++i) x[i] = spec.x0[i] + bz(i);
      total += sq.weights[k] * f(x);
    }
    return jac * total;
  };
  int q = n == 2 ? 16 : 6;
  double prev = integrate(q);
  for (int round = 0; round < 4; ++round) {
    q *= 2;
    const double cur = integrate(q);
    if (std::abs(cur - prev) <= 1e-11 * std::abs(cur)) return cur;
    prev = cur;
  }
  throw InconsistencyError("boundary_cone_integral: quadrature did not settle");
}

double boundary_functional_exact(const EllipsoidSpec& spec) {
  spec.validate();
  const int n = spec.n;
  const SphereQuadrature sq = sphere_quadrature(n, n == 2 ? 16 : 6);
  const RowMat ainv = matrix_of(spec).inverse();
  const double sc = std::sqrt(spec.c);
  std::vector<double> x(n);
  double worst = 0.0;
  for (std::size_t k = 0; k < sq.size(); ++k) {
    Eigen::Map<const Eigen::VectorXd> z(sq.points.data() + k * n, n);
    const Eigen::VectorXd bz = sc * (ainv * z);
    for (int i = 0; i < n; ++i) x[i] = spec.x0[i] + bz(i);
    const FieldSample fs = evaluate(spec, x);
    // H |Du|^{n+1} = S^{ij} u_i u_j with S the cofactor of D^2u
    const double value = quad_form(det_derivatives(fs.hessian, 1), fs.grad);
    worst = std::max(worst, std::abs(value - spec.c));
  }
  if (worst > 1e-10 * std::max(1.0, spec.c))
    throw InconsistencyError("boundary functional deviates from c by " + std::to_string(worst));
  return spec.c;
}

EllipsoidIntegrals ellipsoid_integrals(const EllipsoidSpec& spec) {
  spec.validate();
  const int n = spec.n;
  EllipsoidIntegrals r;
  r.vol = unit_ball_volume(n) * std::pow(spec.c, 0.5 * n);
  r.int_minus_u = spec.c * r.vol / (n + 2);
  r.int_boundary_functional = n * r.int_minus_u;
  r.sobolev_s = r.int_minus_u;
  return r;
}

double g_transform(double s, double c, int n) {
  check_s(s, c);
  const double e = static_cast<double>(n) / (n + 1);
  return (n + 1.0) / (2.0 * n) * (std::pow(c, e) - std::pow(c - 2.0 * s, e));
}

double g_prime(double s, double c, int n) {
  check_s(s, c);
  return std::pow(c - 2.0 * s, -1.0 / (n + 1));
}

double g_inverse(double t, double c, int n) {
  const double e = static_cast<double>(n) / (n + 1);
  const double gmax = (n + 1.0) / (2.0 * n) * std::pow(c, e);
  if (!(t >= 0.0 && t < gmax)) throw DomainError("g_inverse: t must lie in [0, g(c/2))");
  const double base = std::pow(c, e) - 2.0 * n * t / (n + 1.0);
  return 0.5 * (c - std::pow(base, 1.0 / e));
}

double psi_eikonal_residual(const EllipsoidSpec& spec, std::span<const double> x) {
  spec.validate();
  const FieldSample fs = evaluate(spec, x);
  const double r2 = 2.0 * fs.u + spec.c;  // |A(x - x0)|^2
  if (fs.u > 1e-12 * spec.c) throw DomainError("psi_eikonal_residual: point outside the domain");
  if (std::sqrt(std::max(r2, 0.0)) < 1e-8 * std::sqrt(spec.c))
    throw DomainError("psi_eikonal_residual: level set degenerates at the centre");
  const int n = spec.n;
  const double s = std::max(-fs.u, 0.0);
  const double du = vnorm(fs.grad);
  const double curvature = quad_form(det_derivatives(fs.hessian, 1), fs.grad) / std::pow(du, n + 1);
  const double dpsi = g_prime(s, spec.c, n) * du;
  return std::abs(curvature * std::pow(dpsi, n + 1) - 1.0);
}

LevelsetMeasures levelset_measures(const EllipsoidSpec& spec, double s) {
  spec.validate();
  check_s(s, spec.c);
  const int n = spec.n;
  const double w = unit_ball_volume(n), r = spec.c - 2.0 * s;
  LevelsetMeasures m;
  m.mu = w * std::pow(r, 0.5 * n);
  m.mu_prime = -n * w * std::pow(r, 0.5 * n - 1.0);
  const double gp = g_prime(s, spec.c, n);
  m.nu_prime_of_g = -n * m.mu * std::pow(gp, n);
  const double ode = m.mu_prime + n * m.mu * std::pow(gp, n + 1);
  if (std::abs(ode) > 1e-10 * std::abs(m.mu_prime))
    throw InconsistencyError("level-set measure ODE violated");
  return m;
}

std::vector<double> level_set_support(const EllipsoidSpec& spec, double s, int m) {
  spec.validate();
  if (spec.n != 2) throw ArgumentError("level_set_support: planar specs only");
  check_s(s, spec.c);
  const RowMat ainv_t = matrix_of(spec).inverse().transpose();
  const double r = std::sqrt(spec.c - 2.0 * s);
  std::vector<double> h(m);
  for (int j = 0; j < m; ++j) {
    const double t = 2.0 * M_PI * j / m;
    const Eigen::Vector2d u(std::cos(t), std::sin(t));
    h[j] = spec.x0[0] * u(0) + spec.x0[1] * u(1) + r * (ainv_t * u).norm();
  }
  return h;
}

}  // namespace ovma
