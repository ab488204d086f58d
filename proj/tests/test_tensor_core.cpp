#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>

#include "ovma/errors.hpp"
#include "ovma/tensor_core.hpp"

using namespace ovma;

namespace {

SymMatrix random_symmetric(int n, std::uint64_t seed, bool spd) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = unif(rng);
  Eigen::MatrixXd s = spd ? Eigen::MatrixXd(m * m.transpose() + 0.3 * Eigen::MatrixXd::Identity(n, n))
                          : Eigen::MatrixXd(m + m.transpose());
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) out(i, j) = s(i, j);
  return out;
}

// Nested central differences of det over independent entries. det is affine
// in each entry, so the only error source is roundoff.
double fd_det(std::vector<double> dense, int n, const std::vector<std::array<int, 2>>& entries,
              double step) {
  const int m = static_cast<int>(entries.size());
  double total = 0.0;
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<double> a = dense;
    double sign = 1.0;
    for (int t = 0; t < m; ++t) {
      const double sgn = (mask & (1 << t)) ? -1.0 : 1.0;
      sign *= sgn;
      a[entries[t][0] * n + entries[t][1]] += sgn * step;
    }
    total += sign * Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                        a.data(), n, n)
                        .determinant();
  }
  return total / std::pow(2.0 * step, m);
}

// Product of the eigenvalues not indexed by `excluded` (diagonal input).
double product_excluding(const std::vector<double>& lam, std::initializer_list<int> excluded) {
  double p = 1.0;
  for (int q = 0; q < static_cast<int>(lam.size()); ++q)
    if (std::find(excluded.begin(), excluded.end(), q) == excluded.end()) p *= lam[q];
  return p;
}

Eigen::MatrixXd random_rotation(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

}  // namespace

TEST_CASE("elementary symmetric functions") {
  const std::vector<double> d{1.0, 2.0, 3.0};
  CHECK(elementary_symmetric(SymMatrix::diagonal(d), 2) == doctest::Approx(11.0).epsilon(1e-15));
  CHECK(elementary_symmetric(SymMatrix::identity(4), 3) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(elementary_symmetric(SymMatrix::diagonal(d), 1) == doctest::Approx(6.0));
  CHECK(elementary_symmetric(SymMatrix::diagonal(d), 3) == doctest::Approx(6.0));

  SUBCASE("random SPD against eigenvalue pairs") {
    const SymMatrix a = random_symmetric(4, 11, true);
    const std::vector<double> flat = a.dense();
    const Eigen::Matrix4d dm = Eigen::Map<const Eigen::Matrix4d>(flat.data());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(dm);
    const auto lam = es.eigenvalues();
    double pairs = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) pairs += lam(i) * lam(j);
    CHECK(std::abs(elementary_symmetric(a, 2) - pairs) <= 1e-10 * std::abs(pairs));
  }

  SUBCASE("homogeneity S_k(tA) = t^k S_k(A)") {
    for (int n = 2; n <= 6; ++n) {
      const SymMatrix a = random_symmetric(n, 100 + n, true);
      for (int k = 1; k <= n; ++k)
        for (double t : {0.3, 1.7, 4.0}) {
          const double lhs = elementary_symmetric(a.scaled(t), k);
          const double rhs = std::pow(t, k) * elementary_symmetric(a, k);
          CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
        }
    }
  }

  CHECK_THROWS_AS(elementary_symmetric(SymMatrix::identity(3), 0), ArgumentError);
  CHECK_THROWS_AS(elementary_symmetric(SymMatrix::identity(3), 4), ArgumentError);
}

TEST_CASE("determinant derivatives on diag(1,2,3)") {
  const SymMatrix a = SymMatrix::diagonal(std::vector<double>{1.0, 2.0, 3.0});
  const DetDerivative d1 = det_derivatives(a, 1);
  CHECK(d1(0, 0) == 6.0);
  CHECK(d1(1, 1) == 3.0);
  CHECK(d1(2, 2) == 2.0);
  CHECK(d1(0, 1) == 0.0);
  const DetDerivative d2 = det_derivatives(a, 2);
  CHECK(d2(0, 0, 1, 1) == 3.0);
  CHECK(d2(0, 1, 1, 0) == -3.0);
  CHECK(d2(0, 0, 0, 0) == 0.0);
  CHECK_THROWS_AS(det_derivatives(SymMatrix::identity(2), 3), ArgumentError);
  CHECK_THROWS_AS(det_derivatives(a, 4), ArgumentError);
}

TEST_CASE("determinant derivatives match finite differences") {
  for (int n = 3; n <= 5; ++n) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const SymMatrix a = random_symmetric(n, seed * 31 + n, false);
      const std::vector<double> dense = a.dense();
      const DetDerivative d1 = det_derivatives(a, 1), d2 = det_derivatives(a, 2),
                          d3 = det_derivatives(a, 3);
      double scale1 = 0, scale2 = 0, scale3 = 0;
      for (double v : d1.values()) scale1 = std::max(scale1, std::abs(v));
      for (double v : d2.values()) scale2 = std::max(scale2, std::abs(v));
      for (double v : d3.values()) scale3 = std::max(scale3, std::abs(v));
      double err1 = 0, err2 = 0, err3 = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          err1 = std::max(err1, std::abs(d1(i, j) - fd_det(dense, n, {{i, j}}, 1e-5)));
          for (int r = 0; r < n; ++r)
            for (int s = 0; s < n; ++s) {
              err2 = std::max(err2, std::abs(d2(i, j, r, s) - fd_det(dense, n, {{i, j}, {r, s}}, 1e-2)));
              if (n == 3 || seed == 1) {
                const int al = (i + 2 * j + r) % n, be = (s + j + 1) % n;
                err3 = std::max(err3, std::abs(d3(i, j, r, s, al, be) -
                                               fd_det(dense, n, {{i, j}, {r, s}, {al, be}}, 1e-1)));
              }
            }
        }
      CHECK(err1 <= 1e-6 * scale1);
      CHECK(err2 <= 1e-6 * scale2);
      CHECK(err3 <= 1e-6 * scale3);
    }
  }
}

TEST_CASE("diagonal case table of determinant derivatives") {
  for (int n = 3; n <= 5; ++n) {
    std::vector<double> lam(n);
    for (int q = 0; q < n; ++q) lam[q] = 1.0 + 0.7 * q + 0.13 * q * q;
    const SymMatrix a = SymMatrix::diagonal(lam);
    const DetDerivative d1 = det_derivatives(a, 1), d2 = det_derivatives(a, 2),
                        d3 = det_derivatives(a, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        CHECK(d1(i, j) == (i == j ? product_excluding(lam, {i}) : 0.0));
        for (int r = 0; r < n; ++r)
          for (int s = 0; s < n; ++s) {
            double expect = 0.0;
            if (i == j && r == s && i != r) expect = product_excluding(lam, {i, r});
            if (i != j && r == j && s == i) expect = -product_excluding(lam, {i, j});
            CHECK(d2(i, j, r, s) == expect);
          }
      }
    // Third order: the listed branches, then every remaining pattern.
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < n; ++r)
        for (int al = 0; al < n; ++al) {
          if (r == i || al == i || al == r) continue;
          const double p = product_excluding(lam, {i, r, al});
          CHECK(d3(i, i, r, r, al, al) == p);
          CHECK(d3(i, i, r, al, al, r) == -p);
          CHECK(d3(i, r, r, al, al, i) == p);
          // transpositions and the other 3-cycle also contribute
          CHECK(d3(i, r, r, i, al, al) == -p);
          CHECK(d3(i, al, r, r, al, i) == -p);
          CHECK(d3(i, al, r, i, al, r) == p);
        }
    // Zero whenever the partial map i->j, r->s, a->b does not permute its rows.
    int nonzero = 0;
    for (int q = 0; q < static_cast<int>(d3.values().size()); ++q) {
      int rem = q;
      std::array<int, 6> idx{};
      for (int t = 5; t >= 0; --t) {
        idx[t] = rem % n;
        rem /= n;
      }
      std::array<int, 3> rows{idx[0], idx[2], idx[4]}, cols{idx[1], idx[3], idx[5]};
      std::array<int, 3> sr = rows, sc = cols;
      std::sort(sr.begin(), sr.end());
      std::sort(sc.begin(), sc.end());
      const bool distinct = sr[0] != sr[1] && sr[1] != sr[2];
      const bool permutes = distinct && sr == sc;
      if (!permutes) CHECK(d3.values()[q] == 0.0);
      else ++nonzero;
    }
    CHECK(nonzero == n * (n - 1) * (n - 2) * 6);
  }
}

TEST_CASE("Euler identity for homogeneous functions") {
  const SymMatrix d = SymMatrix::diagonal(std::vector<double>{1.0, 2.0, 3.0});
  CHECK(euler_identity_residual(d, 3) <= 1e-14);
  CHECK(euler_identity_residual(SymMatrix::identity(3), 1) <= 1e-12);
  const SymMatrix a = random_symmetric(4, 5, true);
  CHECK(euler_identity_residual(a, 4) <= 1e-10);
  for (int k = 1; k <= 4; ++k) CHECK(euler_identity_residual(a, k) <= 1e-10);
  CHECK_THROWS_AS(euler_identity_residual(a, 5), ArgumentError);
}

TEST_CASE("cofactor identity S^{ij} a_jk = det delta_ik") {
  for (int n = 2; n <= 6; ++n)
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const SymMatrix a = random_symmetric(n, 700 + seed * 7 + n, seed % 2 == 0);
      const double det = a.determinant();
      if (std::abs(det) < 1e-6) continue;
      const DetDerivative cof = det_derivatives(a, 1);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          double s = 0.0;
          for (int j = 0; j < n; ++j) s += cof(i, j) * a(j, k);
          CHECK(std::abs(s - (i == k ? det : 0.0)) <= 1e-10 * std::abs(det));
        }
    }
}

TEST_CASE("Jacobi eigen-decomposition") {
  const SymMatrix a = random_symmetric(5, 3, true);
  const SymEigen e = jacobi_eigen(a);
  Eigen::Map<const Eigen::MatrixXd> q(e.vectors.data(), 5, 5);
  const std::vector<double> flat = a.dense();
  Eigen::Map<const Eigen::MatrixXd> dense(flat.data(), 5, 5);
  const Eigen::MatrixXd rebuilt = q * Eigen::VectorXd::Map(e.values.data(), 5).asDiagonal() * q.transpose();
  CHECK((rebuilt - dense).norm() <= 1e-12 * dense.norm());
  CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(5, 5)).norm() <= 1e-13);
}

TEST_CASE("L(phi) identity") {
  SUBCASE("quadratic solution has no third derivatives") {
    for (int n = 2; n <= 4; ++n) {
      PointData pd{SymMatrix::identity(n), Sym3Tensor(n), std::vector<double>(n, 0.7)};
      const LphiValues v = lphi_identity(pd);
      CHECK(v.lhs == 0.0);
      CHECK(v.rhs == 0.0);
      CHECK(v.claim2_value == 0.0);
    }
  }
  SUBCASE("planar case equals -2 det(u2 D^2u1 - u1 D^2u2)") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const PointData pd = sample_constrained_point(2, seed);
      const LphiValues v = lphi_identity(pd);
      const double eq2 = planar_lphi_determinant_form(pd);
      CHECK(std::abs(v.lhs - eq2) <= 1e-8 * std::max(std::abs(eq2), 1e-12));
      CHECK(std::abs(v.lhs - v.rhs) <= 1e-8 * std::max(std::abs(v.rhs), 1e-12));
    }
  }
  SUBCASE("n = 3: general frame equals eigenframe sum of squares") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const PointData pd = sample_constrained_point(3, 1000 + seed);
      const LphiValues v = lphi_identity(pd);
      CHECK(v.rhs >= -1e-10);
      CHECK(std::abs(v.lhs - v.rhs) <= 1e-8 * std::max(std::abs(v.rhs), 1e-12));
    }
  }
  SUBCASE("frame covariance") {
    for (int n = 2; n <= 5; ++n) {
      const PointData pd = sample_constrained_point(n, 77 + n);
      const Eigen::MatrixXd q = random_rotation(n, 5 + n);
      const PointData rotated = change_frame(pd, std::span<const double>(q.data(), n * n));
      const double a = lphi_identity(pd).lhs, b = lphi_identity(rotated).lhs;
      CHECK(std::abs(a - b) <= 1e-8 * std::abs(a));
    }
  }
  SUBCASE("repeated eigenvalues need no special casing") {
    PointData pd = sample_constrained_point(3, 4);
    PointData iso{SymMatrix::identity(3), Sym3Tensor(3), pd.grad};
    // third tensor traceless in every slot: T_111 = -T_221, others zero
    iso.third(0, 0, 0) = 1.0;
    iso.third(1, 1, 0) = -1.0;
    const LphiValues v = lphi_identity(iso);
    CHECK(std::abs(v.lhs - v.rhs) <= 1e-12 * std::abs(v.rhs));
    CHECK(v.rhs > 0.0);
  }
  SUBCASE("constraint violation is a precondition error") {
    PointData pd = sample_constrained_point(3, 9);
    pd.third(0, 0, 0) += 1e-3;
    CHECK_THROWS_AS(lphi_identity(pd), PreconditionError);
    PointData bad_det{SymMatrix::identity(3).scaled(1.01), Sym3Tensor(3), {1, 0, 0}};
    CHECK_THROWS_AS(lphi_identity(bad_det), PreconditionError);
  }
}

TEST_CASE("planar third-tensor check") {
  SUBCASE("zero tensor") {
    PointData pd{SymMatrix::identity(2), Sym3Tensor(2), {0.3, -0.4}};
    const PlanarCheck c = planar_third_tensor_check(pd);
    CHECK(c.max_det == 0.0);
    CHECK(c.degenerate);
    CHECK(c.discriminant_residual == 0.0);
    CHECK(c.passed);
  }
  SUBCASE("random constrained data") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const PlanarCheck c = planar_third_tensor_check(sample_constrained_point(2, seed));
      CHECK(c.max_det <= 1e-10);
      CHECK(c.passed);
      CHECK_FALSE(c.degenerate);
    }
  }
  SUBCASE("ellipse solution data") {
    // D^2u = A^T A is constant, so the slices vanish
    const double s = std::sqrt(2.0);
    SymMatrix h(2);
    h(0, 0) = s * s;
    h(1, 1) = 1.0 / (s * s);
    PointData pd{h, Sym3Tensor(2), {0.5, 1.0}};
    const PlanarCheck c = planar_third_tensor_check(pd);
    CHECK(c.max_det == 0.0);
    CHECK(c.passed);
  }
  CHECK_THROWS_AS(planar_third_tensor_check(sample_constrained_point(3, 1)), ArgumentError);
}

TEST_CASE("constrained sampler") {
  for (int n = 2; n <= 6; ++n) {
    const PointData a = sample_constrained_point(n, 5), b = sample_constrained_point(n, 5);
    CHECK(a.hessian.dense() == b.hessian.dense());
    CHECK(a.third.dense() == b.third.dense());
    CHECK(a.grad == b.grad);
    CHECK_NOTHROW(validate_point_data(a));
  }
  CHECK(constraint_residual(sample_constrained_point(3, 1)) <= 1e-12);
  CHECK(planar_third_tensor_check(sample_constrained_point(2, 7)).passed);
  CHECK_THROWS_AS(sample_constrained_point(7, 1), ArgumentError);
}

TEST_CASE("identity sweep: OpenMP kernel matches the serial reference") {
  for (int n = 2; n <= 4; ++n) {
    const IdentitySweep s = identity_sweep_serial(n, 40, 42);
    const IdentitySweep p = identity_sweep(n, 40, 42);
    CHECK(s.max_lphi_rel == p.max_lphi_rel);
    CHECK(s.min_claim2 == p.min_claim2);
    CHECK(s.max_cofactor == p.max_cofactor);
    CHECK(s.worst_seed == p.worst_seed);
    CHECK(s.max_lphi_rel <= 1e-8);
    CHECK(s.min_claim2 >= -1e-10);
  }
  CHECK_THROWS_AS(identity_sweep(1, 10, 1), ArgumentError);
  CHECK_THROWS_AS(identity_sweep(3, 0, 1), ArgumentError);
}
