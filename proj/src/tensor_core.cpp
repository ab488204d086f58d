#include "ovma/tensor_core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <exception>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "ovma/errors.hpp"

namespace ovma {

namespace {

void check_dim(int n) {
  if (n < kMinDim || n > kMaxDim)
    throw ArgumentError("dimension must lie in [2, 6], got " + std::to_string(n));
}

int permutation_sign(std::array<int, kMaxDim> p, int n) {
  int sign = 1;
  for (int i = 0; i < n; ++i) {
    while (p[i] != i) {
      std::swap(p[i], p[p[i]]);
      sign = -sign;
    }
  }
  return sign;
}

// Signed minor for d^m det / (d a_{i1 j1} ... d a_{im jm}): zero unless the
// rows and the columns are pairwise distinct; otherwise the sign of the
// permutation sending i_t -> j_t and the remaining rows to the remaining
// columns in order, times the complementary minor.
double signed_minor(const std::vector<double>& dense, int n, const int* rows, const int* cols,
                    int m) {
  unsigned row_mask = 0, col_mask = 0;
  for (int t = 0; t < m; ++t) {
    const unsigned rb = 1u << rows[t], cb = 1u << cols[t];
    if ((row_mask & rb) || (col_mask & cb)) return 0.0;
    row_mask |= rb;
    col_mask |= cb;
  }
  std::array<int, kMaxDim> sigma{};
  std::array<int, kMaxDim> rest_rows{}, rest_cols{};
  int nr = 0, nc = 0;
  for (int q = 0; q < n; ++q) {
    if (!(row_mask & (1u << q))) rest_rows[nr++] = q;
    if (!(col_mask & (1u << q))) rest_cols[nc++] = q;
  }
  for (int t = 0; t < m; ++t) sigma[rows[t]] = cols[t];
  for (int q = 0; q < nr; ++q) sigma[rest_rows[q]] = rest_cols[q];
  const int sign = permutation_sign(sigma, n);
  if (nr == 0) return sign;
  std::array<double, kMaxDim * kMaxDim> sub{};
  for (int a = 0; a < nr; ++a)
    for (int b = 0; b < nr; ++b) sub[a * nr + b] = dense[rest_rows[a] * n + rest_cols[b]];
  return sign * dense_determinant(std::span<const double>(sub.data(), nr * nr), nr);
}

// Sum of k x k principal minors of a dense (not necessarily symmetric) matrix.
double principal_minor_sum(const std::vector<double>& dense, int n, int k) {
  double total = 0.0;
  std::array<double, kMaxDim * kMaxDim> sub{};
  std::array<int, kMaxDim> idx{};
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != k) continue;
    int c = 0;
    for (int q = 0; q < n; ++q)
      if (mask & (1u << q)) idx[c++] = q;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) sub[a * k + b] = dense[idx[a] * n + idx[b]];
    total += dense_determinant(std::span<const double>(sub.data(), k * k), k);
  }
  return total;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// SymMatrix

SymMatrix::SymMatrix(int n) : n_(n), a_(static_cast<size_t>(n * (n + 1) / 2), 0.0) {
  check_dim(n);
}

SymMatrix SymMatrix::identity(int n) {
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
  SymMatrix m(static_cast<int>(d.size()));
  for (int i = 0; i < m.dim(); ++i) m(i, i) = d[i];
  return m;
}

SymMatrix SymMatrix::from_dense(std::span<const double> rowmajor, int n) {
  if (rowmajor.size() != static_cast<size_t>(n * n))
    throw ArgumentError("dense matrix has wrong size");
  SymMatrix m(n);
  double scale = 0.0;
  for (double v : rowmajor) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double aij = rowmajor[i * n + j], aji = rowmajor[j * n + i];
      if (std::abs(aij - aji) > 1e-12 * std::max(1.0, scale))
        throw ArgumentError("matrix is not symmetric");
      m(i, j) = 0.5 * (aij + aji);
    }
  return m;
}

std::vector<double> SymMatrix::dense() const {
  std::vector<double> d(static_cast<size_t>(n_ * n_));
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) d[i * n_ + j] = (*this)(i, j);
  return d;
}

double SymMatrix::determinant() const { return dense_determinant(dense(), n_); }

SymMatrix SymMatrix::scaled(double t) const {
  SymMatrix m = *this;
  for (double& v : m.a_) v *= t;
  return m;
}

// ---------------------------------------------------------------------------
// Sym3Tensor

Sym3Tensor::Sym3Tensor(int n) : n_(n), offsets_(static_cast<size_t>(n * n * n)) {
  check_dim(n);
  int count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      for (int k = j; k < n; ++k) {
        std::array<int, 3> s{i, j, k};
        do {
          offsets_[(s[0] * n + s[1]) * n + s[2]] = count;
        } while (std::next_permutation(s.begin(), s.end()));
        ++count;
      }
  a_.assign(static_cast<size_t>(count), 0.0);
}

int Sym3Tensor::slot(int i, int j, int k) const noexcept { return offsets_[(i * n_ + j) * n_ + k]; }

std::vector<double> Sym3Tensor::dense() const {
  std::vector<double> d(offsets_.size());
  for (size_t q = 0; q < d.size(); ++q) d[q] = a_[offsets_[q]];
  return d;
}

Sym3Tensor Sym3Tensor::from_dense_symmetrized(std::span<const double> full, int n) {
  Sym3Tensor t(n);
  std::vector<double> acc(t.a_.size(), 0.0);
  std::vector<int> hits(t.a_.size(), 0);
  for (size_t q = 0; q < full.size(); ++q) {
    acc[t.offsets_[q]] += full[q];
    ++hits[t.offsets_[q]];
  }
  for (size_t s = 0; s < acc.size(); ++s) t.a_[s] = acc[s] / hits[s];
  return t;
}

double Sym3Tensor::norm_squared() const {
  double s = 0.0;
  for (int q : offsets_) s += a_[q] * a_[q];
  return s;
}

// ---------------------------------------------------------------------------

double dense_determinant(std::span<const double> rowmajor, int n) {
  if (n == 0) return 1.0;
  if (n == 1) return rowmajor[0];
  if (n == 2) return rowmajor[0] * rowmajor[3] - rowmajor[1] * rowmajor[2];
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      rowmajor.data(), n, n);
  return m.partialPivLu().determinant();
}

double elementary_symmetric(const SymMatrix& a, int k) {
  const int n = a.dim();
  if (k < 1 || k > n)
    throw ArgumentError("elementary_symmetric: k must lie in [1, n]");
  return principal_minor_sum(a.dense(), n, k);
}

DetDerivative::DetDerivative(int n, int order, std::vector<double> values)
    : n_(n), order_(order), v_(std::move(values)) {}

double DetDerivative::operator()(int i, int j) const {
  if (order_ != 1) throw ArgumentError("DetDerivative: expected order 1 access");
  return v_[i * n_ + j];
}

double DetDerivative::operator()(int i, int j, int r, int s) const {
  if (order_ != 2) throw ArgumentError("DetDerivative: expected order 2 access");
  return v_[((i * n_ + j) * n_ + r) * n_ + s];
}

double DetDerivative::operator()(int i, int j, int r, int s, int a, int b) const {
  if (order_ != 3) throw ArgumentError("DetDerivative: expected order 3 access");
  return v_[((((i * n_ + j) * n_ + r) * n_ + s) * n_ + a) * n_ + b];
}

DetDerivative det_derivatives(const SymMatrix& a, int order) {
  const int n = a.dim();
  if (order < 1 || order > 3) throw ArgumentError("det_derivatives: order must be 1, 2 or 3");
  if (order == 3 && n < 3)
    throw ArgumentError("det_derivatives: third derivatives of a 2x2 determinant vanish");
  const std::vector<double> dense = a.dense();
  size_t total = 1;
  for (int q = 0; q < 2 * order; ++q) total *= static_cast<size_t>(n);
  std::vector<double> out(total);
  std::array<int, 6> idx{};
  std::array<int, 3> rows{}, cols{};
  for (size_t flat = 0; flat < total; ++flat) {
    size_t rem = flat;
    for (int q = 2 * order - 1; q >= 0; --q) {
      idx[q] = static_cast<int>(rem % n);
      rem /= n;
    }
    for (int t = 0; t < order; ++t) {
      rows[t] = idx[2 * t];
      cols[t] = idx[2 * t + 1];
    }
    out[flat] = signed_minor(dense, n, rows.data(), cols.data(), order);
  }
  return DetDerivative(n, order, std::move(out));
}

double euler_identity_residual(const SymMatrix& a, int k) {
  const int n = a.dim();
  if (k < 1 || k > n) throw ArgumentError("euler_identity_residual: k must lie in [1, n]");
  const double sk = elementary_symmetric(a, k);
  double contraction = 0.0;
  if (k == n) {
    const DetDerivative cof = det_derivatives(a, 1);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) contraction += cof(i, j) * a(i, j);
  } else {
    // S_k is affine in every single entry, so the central difference is exact
    // up to roundoff for any step.
    std::vector<double> dense = a.dense();
    double scale = 0.0;
    for (double v : dense) scale = std::max(scale, std::abs(v));
    const double step = 1e-3 * std::max(1.0, scale);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double saved = dense[i * n + j];
        dense[i * n + j] = saved + step;
        const double plus = principal_minor_sum(dense, n, k);
        dense[i * n + j] = saved - step;
        const double minus = principal_minor_sum(dense, n, k);
        dense[i * n + j] = saved;
        contraction += (plus - minus) / (2.0 * step) * saved;
      }
  }
  return std::abs(sk - contraction / k);
}

SymEigen jacobi_eigen(const SymMatrix& a, double off_tol) {
  const int n = a.dim();
  std::vector<double> m = a.dense();
  std::vector<double> v(static_cast<size_t>(n * n), 0.0);
  for (int i = 0; i < n; ++i) v[i * n + i] = 1.0;  // row-major during iteration

  double frob = 0.0;
  for (double x : m) frob += x * x;
  frob = std::sqrt(frob);
  const double threshold = off_tol * std::max(frob, 1e-300);

  auto off_norm = [&] {
    double s = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        if (p != q) s += m[p * n + q] * m[p * n + q];
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > threshold; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = m[p * n + q];
        if (apq == 0.0) continue;
        const double app = m[p * n + p], aqq = m[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m[k * n + p], mkq = m[k * n + q];
          m[k * n + p] = c * mkp - s * mkq;
          m[k * n + q] = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m[p * n + k], mqk = m[q * n + k];
          m[p * n + k] = c * mpk - s * mqk;
          m[q * n + k] = s * mpk + c * mqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  SymEigen out;
  out.values.resize(n);
  out.vectors.resize(static_cast<size_t>(n * n));
  for (int k = 0; k < n; ++k) {
    out.values[k] = m[k * n + k];
    for (int i = 0; i < n; ++i) out.vectors[k * n + i] = v[i * n + k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pointwise identities

double constraint_residual(const PointData& data) {
  const int n = data.hessian.dim();
  const DetDerivative cof = det_derivatives(data.hessian, 1);
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += cof(i, j) * data.third(i, j, k);
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

void validate_point_data(const PointData& data) {
  const int n = data.hessian.dim();
  if (data.third.dim() != n || static_cast<int>(data.grad.size()) != n)
    throw PreconditionError("point data: inconsistent dimensions");
  const double det = data.hessian.determinant();
  if (std::abs(det - 1.0) > 1e-12)
    throw PreconditionError("point data: |det D^2u - 1| = " + std::to_string(std::abs(det - 1.0)));
  const double res = constraint_residual(data);
  if (res > 1e-10)
    throw PreconditionError("point data: gradient constraint residual " + std::to_string(res));
}

LphiValues lphi_identity(const PointData& data) {
  validate_point_data(data);
  const int n = data.hessian.dim();
  const std::vector<double>& p = data.grad;
  const std::vector<double> t = data.third.dense();
  auto T = [&](int a, int b, int c) { return t[(a * n + b) * n + c]; };
  const int n2 = n * n;

  const DetDerivative s1 = det_derivatives(data.hessian, 1);
  const DetDerivative s2 = det_derivatives(data.hessian, 2);
  const auto s2v = s2.values();

  // First term: sum S^{kl} S^{ij,rs,ab} T_rsk T_abl p_i p_j (absent for n = 2).
  double first = 0.0;
  if (n >= 3) {
    const DetDerivative s3 = det_derivatives(data.hessian, 3);
    const auto s3v = s3.values();
    std::vector<double> w(static_cast<size_t>(n2 * n2), 0.0);  // w[rs][ab]
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double pij = p[i] * p[j];
        const size_t base = static_cast<size_t>(i * n + j) * n2 * n2;
        for (int q = 0; q < n2 * n2; ++q) w[q] += s3v[base + q] * pij;
      }
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        const double skl = s1(k, l);
        if (skl == 0.0) continue;
        double x = 0.0;
        for (int rs = 0; rs < n2; ++rs) {
          const double trsk = T(rs / n, rs % n, k);
          if (trsk == 0.0) continue;
          double inner = 0.0;
          for (int ab = 0; ab < n2; ++ab) inner += w[rs * n2 + ab] * T(ab / n, ab % n, l);
          x += trsk * inner;
        }
        first += skl * x;
      }
  }

  // Second term: sum S^{ij,kl} p_i p_j * S^{rs,ab} T_rsk T_abl.
  double second = 0.0;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      double y = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) y += s2v[(i * n + j) * n2 + (k * n + l)] * p[i] * p[j];
      if (y == 0.0) continue;
      double z = 0.0;
      for (int rs = 0; rs < n2; ++rs) {
        const double trsk = T(rs / n, rs % n, k);
        if (trsk == 0.0) continue;
        double inner = 0.0;
        for (int ab = 0; ab < n2; ++ab) inner += s2v[rs * n2 + ab] * T(ab / n, ab % n, l);
        z += trsk * inner;
      }
      second += y * z;
    }

  // Eigenframe: sum_{k,a} (sum_g p_g T_akg / l_g)^2 / (l_a l_k).
  const SymEigen eig = jacobi_eigen(data.hessian);
  const std::vector<double>& q = eig.vectors;
  auto Q = [&](int row, int col) { return q[col * n + row]; };
  std::vector<double> pq(n, 0.0);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i) pq[a] += Q(i, a) * p[i];
  // Rotate the third tensor one index at a time.
  std::vector<double> r1(t.size(), 0.0), r2(t.size(), 0.0), r3(t.size(), 0.0);
  for (int a = 0; a < n; ++a)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += Q(i, a) * T(i, j, k);
        r1[(a * n + j) * n + k] = s;
      }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int k = 0; k < n; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += Q(j, b) * r1[(a * n + j) * n + k];
        r2[(a * n + b) * n + k] = s;
      }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += Q(k, c) * r2[(a * n + b) * n + k];
        r3[(a * n + b) * n + c] = s;
      }
  const std::vector<double>& lam = eig.values;
  double rhs = 0.0;
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k) {
      double v = 0.0;
      for (int g = 0; g < n; ++g) v += pq[g] * r3[(a * n + k) * n + g] / lam[g];
      rhs += v * v / (lam[a] * lam[k]);
    }

  return {first - second, rhs, rhs};
}

double planar_lphi_determinant_form(const PointData& data) {
  if (data.hessian.dim() != 2) throw ArgumentError("planar form requires n = 2");
  const Sym3Tensor& t = data.third;
  const double u1 = data.grad[0], u2 = data.grad[1];
  // V = u2 M1 - u1 M2, M_k = (T_ijk)_ij
  const double v11 = u2 * t(0, 0, 0) - u1 * t(0, 0, 1);
  const double v12 = u2 * t(0, 1, 0) - u1 * t(0, 1, 1);
  const double v22 = u2 * t(1, 1, 0) - u1 * t(1, 1, 1);
  return -2.0 * (v11 * v22 - v12 * v12);
}

PlanarCheck planar_third_tensor_check(const PointData& data, int circle_samples) {
  if (data.hessian.dim() != 2) throw ArgumentError("planar_third_tensor_check requires n = 2");
  validate_point_data(data);
  const Sym3Tensor& t = data.third;
  const double m1[3] = {t(0, 0, 0), t(0, 0, 1), t(0, 1, 1)};  // (11, 12, 22) of M1
  const double m2[3] = {t(0, 0, 1), t(0, 1, 1), t(1, 1, 1)};
  PlanarCheck out;
  out.max_det = -std::numeric_limits<double>::infinity();
  for (int q = 0; q < circle_samples; ++q) {
    const double ang = 2.0 * M_PI * q / circle_samples;
    const double a = std::cos(ang), b = std::sin(ang);
    const double x11 = a * m1[0] + b * m2[0], x12 = a * m1[1] + b * m2[1],
                 x22 = a * m1[2] + b * m2[2];
    out.max_det = std::max(out.max_det, x11 * x22 - x12 * x12);
  }
  out.det_ok = out.max_det <= 1e-10;

  const double lphi = planar_lphi_determinant_form(data);
  const double gnorm = std::hypot(data.grad[0], data.grad[1]);
  const double scale = std::max(1.0, t.norm_squared() * gnorm * gnorm);
  out.degenerate = gnorm > 1e-12 && std::abs(lphi) <= 1e-12 * scale;
  bool disc_ok = true;
  if (out.degenerate) {
    const double x = t(0, 0, 0) * t(1, 1, 1) - t(0, 0, 1) * t(0, 1, 1);
    const double d1 = m1[0] * m1[2] - m1[1] * m1[1];
    const double d2 = m2[0] * m2[2] - m2[1] * m2[1];
    out.discriminant_residual = std::abs(x * x - 4.0 * d1 * d2);
    disc_ok = out.discriminant_residual <= 1e-8 * std::max(1.0, x * x);
  }
  out.passed = out.det_ok && disc_ok;
  return out;
}

PointData sample_constrained_point(int n, std::uint64_t seed) {
  check_dim(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = normal(rng);
  Eigen::MatrixXd h = m * m.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  h /= std::pow(h.determinant(), 1.0 / n);
  SymMatrix hess(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) hess(i, j) = 0.5 * (h(i, j) + h(j, i));

  const int n3 = n * n * n;
  std::vector<double> raw(static_cast<size_t>(n3));
  for (double& v : raw) v = normal(rng);
  std::vector<double> t = Sym3Tensor::from_dense_symmetrized(raw, n).dense();

  // Constraint functionals c_k(T) = <T, G_k>, G_k = sym(S (x) e_k).
  const DetDerivative cof = det_derivatives(hess, 1);
  std::vector<std::vector<double>> g(n, std::vector<double>(static_cast<size_t>(n3), 0.0));
  for (int k = 0; k < n; ++k) {
    std::vector<double> full(static_cast<size_t>(n3), 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) full[(i * n + j) * n + k] = cof(i, j);
    g[k] = Sym3Tensor::from_dense_symmetrized(full, n).dense();
  }
  Eigen::MatrixXd gram(n, n);
  Eigen::VectorXd rhs(n);
  for (int k = 0; k < n; ++k) {
    rhs(k) = std::inner_product(t.begin(), t.end(), g[k].begin(), 0.0);
    for (int l = 0; l < n; ++l) gram(k, l) = std::inner_product(g[k].begin(), g[k].end(), g[l].begin(), 0.0);
  }
  const Eigen::VectorXd lambda = gram.ldlt().solve(rhs);
  for (int k = 0; k < n; ++k)
    for (int q = 0; q < n3; ++q) t[q] -= lambda(k) * g[k][q];

  PointData out{hess, Sym3Tensor::from_dense_symmetrized(t, n), std::vector<double>(n)};
  for (double& v : out.grad) v = normal(rng);
  return out;
}

PointData change_frame(const PointData& data, std::span<const double> q) {
  const int n = data.hessian.dim();
  auto Q = [&](int row, int col) { return q[col * n + row]; };
  SymMatrix h(n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += Q(i, a) * data.hessian(i, j) * Q(j, b);
      h(a, b) = s;
    }
  const std::vector<double> t = data.third.dense();
  std::vector<double> r(t.size(), 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) s += t[(i * n + j) * n + k] * Q(i, a) * Q(j, b) * Q(k, c);
        r[(a * n + b) * n + c] = s;
      }
  std::vector<double> p(n, 0.0);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i) p[a] += Q(i, a) * data.grad[i];
  return {h, Sym3Tensor::from_dense_symmetrized(r, n), p};
}

// ---------------------------------------------------------------------------
// Batched sweep

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(trial) + 1));
}

namespace {

struct TrialResult {
  double lphi_rel = 0.0, claim2 = 0.0, cofactor = 0.0, euler = 0.0, constraint = 0.0;
  double planar_det = 0.0, eq2_rel = 0.0;
};

TrialResult run_trial(int n, std::uint64_t seed) {
  const PointData pd = sample_constrained_point(n, seed);
  TrialResult r;
  const LphiValues lv = lphi_identity(pd);
  r.lphi_rel = std::abs(lv.lhs - lv.rhs) / std::max({std::abs(lv.lhs), std::abs(lv.rhs), 1e-12});
  r.claim2 = lv.claim2_value;

  const DetDerivative cof = det_derivatives(pd.hessian, 1);
  const double det = pd.hessian.determinant();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += cof(i, k) * pd.hessian(k, j);
      r.cofactor = std::max(r.cofactor, std::abs(s - (i == j ? det : 0.0)) / std::abs(det));
    }
  for (int k = 1; k <= n; ++k)
    r.euler = std::max(r.euler, euler_identity_residual(pd.hessian, k) /
                                    std::max(1.0, std::abs(elementary_symmetric(pd.hessian, k))));
  r.constraint = constraint_residual(pd);
  if (n == 2) {
    r.planar_det = planar_third_tensor_check(pd).max_det;
    const double eq2 = planar_lphi_determinant_form(pd);
    r.eq2_rel = std::abs(eq2 - lv.lhs) / std::max({std::abs(eq2), std::abs(lv.lhs), 1e-12});
  }
  return r;
}

IdentitySweep reduce(int n, int trials, std::uint64_t seed, const std::vector<TrialResult>& rs) {
  IdentitySweep out;
  out.n = n;
  out.trials = trials;
  out.min_claim2 = std::numeric_limits<double>::infinity();
  out.max_planar_det = n == 2 ? -std::numeric_limits<double>::infinity() : 0.0;
  double worst = -1.0;
  for (int q = 0; q < trials; ++q) {
    const TrialResult& r = rs[q];
    if (r.lphi_rel > worst) {
      worst = r.lphi_rel;
      out.worst_seed = trial_seed(seed, q);
    }
    out.max_lphi_rel = std::max(out.max_lphi_rel, r.lphi_rel);
    out.min_claim2 = std::min(out.min_claim2, r.claim2);
    out.max_cofactor = std::max(out.max_cofactor, r.cofactor);
    out.max_euler = std::max(out.max_euler, r.euler);
    out.max_constraint = std::max(out.max_constraint, r.constraint);
    if (n == 2) {
      out.max_planar_det = std::max(out.max_planar_det, r.planar_det);
      out.max_eq2_rel = std::max(out.max_eq2_rel, r.eq2_rel);
    }
  }
  return out;
}

void check_sweep_args(int n, int trials) {
  check_dim(n);
  if (trials < 1) throw ArgumentError("trials must be >= 1");
}

}  // namespace

IdentitySweep identity_sweep_serial(int n, int trials, std::uint64_t seed) {
  check_sweep_args(n, trials);
  std::vector<TrialResult> rs(static_cast<size_t>(trials));
  for (int q = 0; q < trials; ++q) rs[q] = run_trial(n, trial_seed(seed, q));
  return reduce(n, trials, seed, rs);
}

IdentitySweep identity_sweep(int n, int trials, std::uint64_t seed) {
  check_sweep_args(n, trials);
  std::vector<TrialResult> rs(static_cast<size_t>(trials));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (int q = 0; q < trials; ++q) {
    try {
      rs[q] = run_trial(n, trial_seed(seed, q));
    } catch (...) {
#pragma omp critical(ovma_sweep_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return reduce(n, trials, seed, rs);
}

}  // namespace ovma
