#pragma once

// Small-dimension algebra behind the ellipsoid characterization: elementary
// symmetric functions, analytic derivatives of the determinant with respect
// to the matrix entries, and the pointwise identity for L(phi) with its
// diagonalized sum-of-squares form.
//
// All routines are pure; dimensions are limited to 2 <= n <= 6.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ovma {

inline constexpr int kMinDim = 2;
inline constexpr int kMaxDim = 6;

/// Real symmetric n x n matrix, one stored value per unordered index pair.
class SymMatrix {
 public:
  explicit SymMatrix(int n);

  static SymMatrix identity(int n);
  static SymMatrix diagonal(std::span<const double> d);
  /// Builds from a dense row-major array; the input must be symmetric to 1e-12.
  static SymMatrix from_dense(std::span<const double> rowmajor, int n);

  int dim() const noexcept { return n_; }
  double operator()(int i, int j) const noexcept { return a_[slot(i, j)]; }
  double& operator()(int i, int j) noexcept { return a_[slot(i, j)]; }

  std::vector<double> dense() const;
  double determinant() const;
  SymMatrix scaled(double t) const;

 private:
  int slot(int i, int j) const noexcept {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i - 1) / 2 + (j - i);
  }
  int n_;
  std::vector<double> a_;
};

/// Fully symmetric third-order array; one stored value per sorted triple.
class Sym3Tensor {
 public:
  explicit Sym3Tensor(int n);

  int dim() const noexcept { return n_; }
  double operator()(int i, int j, int k) const noexcept { return a_[slot(i, j, k)]; }
  double& operator()(int i, int j, int k) noexcept { return a_[slot(i, j, k)]; }

  /// Dense n^3 copy, index (i*n + j)*n + k.
  std::vector<double> dense() const;
  static Sym3Tensor from_dense_symmetrized(std::span<const double> full, int n);
  double norm_squared() const;

 private:
  int slot(int i, int j, int k) const noexcept;
  int n_;
  std::vector<int> offsets_;
  std::vector<double> a_;
};

/// Hessian, third derivatives and gradient of a solution of det D^2u = 1 at
/// a single point.
struct PointData {
  SymMatrix hessian;
  Sym3Tensor third;
  std::vector<double> grad;
};

/// Sum of all k x k principal minors of A.
double elementary_symmetric(const SymMatrix& a, int k);

/// Derivatives of det with respect to the entries a_ij, each entry treated as
/// an independent variable. Order m holds n^(2m) values indexed by
/// (i1, j1, ..., im, jm), row-major.
class DetDerivative {
 public:
  DetDerivative(int n, int order, std::vector<double> values);

  int dim() const noexcept { return n_; }
  int order() const noexcept { return order_; }
  std::span<const double> values() const noexcept { return v_; }

  double operator()(int i, int j) const;
  double operator()(int i, int j, int r, int s) const;
  double operator()(int i, int j, int r, int s, int a, int b) const;

 private:
  int n_;
  int order_;
  std::vector<double> v_;
};

/// Analytic S_n^{ij}, S_n^{ij,rs} or S_n^{ij,rs,ab} from signed minors.
/// Order 3 with n = 2 is rejected: the result would be identically zero.
DetDerivative det_derivatives(const SymMatrix& a, int order);

/// |S_k(A) - (1/k) sum_ij S_k^{ij}(A) a_ij|.
double euler_identity_residual(const SymMatrix& a, int k);

/// Eigen-decomposition by cyclic Jacobi rotations.
struct SymEigen {
  std::vector<double> values;
  std::vector<double> vectors;  // column-major: column k is the k-th eigenvector
};
SymEigen jacobi_eigen(const SymMatrix& a, double off_tol = 1e-13);

struct LphiValues {
  double lhs = 0.0;           // general-frame expression
  double rhs = 0.0;           // sum of squares in the eigenframe
  double claim2_value = 0.0;  // == rhs
};

/// Throws PreconditionError when |det - 1| > 1e-12 or a gradient constraint
/// sum_ij S^{ij} u_ijk exceeds 1e-10.
void validate_point_data(const PointData& data);
/// max_k |sum_ij S^{ij} T_ijk|.
double constraint_residual(const PointData& data);

LphiValues lphi_identity(const PointData& data);

/// -2 det(u_2 M_1 - u_1 M_2) with M_k the slice (T_ijk)_ij; planar only.
double planar_lphi_determinant_form(const PointData& data);

struct PlanarCheck {
  double max_det = 0.0;        // max over the unit circle of det(a M1 + b M2)
  bool det_ok = false;         // max_det <= 1e-10
  bool degenerate = false;     // L(phi) vanished with a nonzero gradient
  double discriminant_residual = 0.0;  // only meaningful when degenerate
  bool passed = false;
};
PlanarCheck planar_third_tensor_check(const PointData& data, int circle_samples = 720);

/// Deterministic factory for constrained point data. The Hessian is SPD
/// rescaled to det 1; the third tensor is projected onto the constraints in
/// the canonical symmetric-tensor inner product.
PointData sample_constrained_point(int n, std::uint64_t seed);

/// (Q^T H Q, T x Q x Q x Q, Q^T p) for an orthogonal Q given column-major.
PointData change_frame(const PointData& data, std::span<const double> q);

/// Determinant of a dense row-major n x n matrix (partial-pivot LU).
double dense_determinant(std::span<const double> rowmajor, int n);

/// Aggregate of all pointwise identities over a batch of sampled points.
struct IdentitySweep {
  int n = 0;
  int trials = 0;
  double max_lphi_rel = 0.0;
  double min_claim2 = 0.0;
  double max_cofactor = 0.0;
  double max_euler = 0.0;
  double max_constraint = 0.0;
  double max_planar_det = 0.0;  // n == 2 only
  double max_eq2_rel = 0.0;     // n == 2 only
  std::uint64_t worst_seed = 0;
};

/// Per-trial seeds are derived from (seed, trial index), so results do not
/// depend on the evaluation order.
IdentitySweep identity_sweep_serial(int n, int trials, std::uint64_t seed);
IdentitySweep identity_sweep(int n, int trials, std::uint64_t seed);
std::uint64_t trial_seed(std::uint64_t seed, int trial);

}  // namespace ovma
