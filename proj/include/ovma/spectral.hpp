#pragma once

// Fourier tools for uniformly sampled periodic data on [0, 2*pi).
// Transforms go through FFTW; plans are cached per length and shared by all
// threads (plan creation is serialized, execution is not).

#include <complex>
#include <span>
#include <vector>

namespace ovma::spectral {

using cplx = std::complex<double>;

/// Unnormalized half spectrum: n/2 + 1 values c_k = sum_j x_j exp(-i k theta_j).
std::vector<cplx> forward(std::span<const double> x);
/// Inverse of forward() for length n (includes the 1/n factor).
std::vector<double> inverse(std::span<const cplx> c, int n);

/// d^order x / dtheta^order of the trigonometric interpolant, order 1 or 2.
std::vector<double> derivative(std::span<const double> x, int order);

/// Trigonometric interpolant of x evaluated on m uniform nodes. Upsampling
/// is exact; downsampling drops every mode with |k| >= m/2.
std::vector<double> resample(std::span<const double> x, int m);

/// Real trigonometric polynomial a0 + sum_k a_k cos(k t) + b_k sin(k t),
/// k = 1..K, evaluable at any angle.
class TrigSeries {
 public:
  TrigSeries() = default;
  TrigSeries(double a0, std::vector<double> a, std::vector<double> b);

  /// Interpolant of uniform samples; trailing modes below rel_cut * max
  /// coefficient are dropped.
  static TrigSeries from_samples(std::span<const double> x, double rel_cut = 0.0);

  int degree() const noexcept { return static_cast<int>(a_.size()); }
  double a0() const noexcept { return a0_; }
  double a(int k) const { return k == 0 ? a0_ : a_.at(k - 1); }
  double b(int k) const { return k == 0 ? 0.0 : b_.at(k - 1); }

  double value(double t) const;
  /// Value and first two derivatives in one pass.
  void eval(double t, double& f, double& df, double& d2f) const;
  std::vector<double> sample(int n) const;

  TrigSeries operator+(const TrigSeries& o) const;
  TrigSeries scaled(double s) const;

 private:
  double a0_ = 0.0;
  std::vector<double> a_, b_;
};

}  // namespace ovma::spectral
