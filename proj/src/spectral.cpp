#include "ovma/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "ovma/errors.hpp"

namespace ovma::spectral {
namespace {

struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

std::mutex plan_mutex;

const PlanPair& plans_for(int n) {
  static std::map<int, PlanPair> cache;
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  PlanPair p;
  p.r2c = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.c2r = fftw_plan_dft_c2r_1d(n, out, in, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(in);
  fftw_free(out);
  return cache.emplace(n, p).first->second;
}

void check_length(std::size_t n) {
  if (n < 4 || n % 2 != 0) throw ArgumentError("spectral: length must be even and >= 4");
}

}  // namespace

std::vector<cplx> forward(std::span<const double> x) {
  check_length(x.size());
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x.begin(), x.end());
  std::vector<cplx> out(n / 2 + 1);
  fftw_execute_dft_r2c(plans_for(n).r2c, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

std::vector<double> inverse(std::span<const cplx> c, int n) {
  check_length(n);
  if (static_cast<int>(c.size()) != n / 2 + 1) throw ArgumentError("spectral: half spectrum size mismatch");
  std::vector<cplx> in(c.begin(), c.end());  // c2r overwrites its input
  std::vector<double> out(n);
  fftw_execute_dft_c2r(plans_for(n).c2r, reinterpret_cast<fftw_complex*>(in.data()), out.data());
  for (double& v : out) v /= n;
  return out;
}

std::vector<double> derivative(std::span<const double> x, int order) {
  if (order != 1 && order != 2) throw ArgumentError("spectral: derivative order must be 1 or 2");
  const int n = static_cast<int>(x.size());
  std::vector<cplx> c = forward(x);
  for (int k = 0; k <= n / 2; ++k) {
    if (order == 1) c[k] *= cplx(0.0, k);
    else c[k] *= -static_cast<double>(k) * k;
  }
  if (order == 1) c[n / 2] = 0.0;
  return inverse(c, n);
}

std::vector<double> resample(std::span<const double> x, int m) {
  const int n = static_cast<int>(x.size());
  check_length(m);
  if (m == n) return {x.begin(), x.end()};
  const std::vector<cplx> c = forward(x);
  std::vector<cplx> d(m / 2 + 1, 0.0);
  const double scale = static_cast<double>(m) / n;
  if (m > n) {
    for (int k = 0; k < n / 2; ++k) d[k] = c[k] * scale;
    d[n / 2] = 0.5 * c[n / 2] * scale;  // split the Nyquist cosine between +-n/2
  } else {
    for (int k = 0; k < m / 2; ++k) d[k] = c[k] * scale;
  }
  return inverse(d, m);
}

TrigSeries::TrigSeries(double a0, std::vector<double> a, std::vector<double> b)
    : a0_(a0), a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() != b_.size()) throw ArgumentError("TrigSeries: coefficient size mismatch");
}

TrigSeries TrigSeries::from_samples(std::span<const double> x, double rel_cut) {
  const int n = static_cast<int>(x.size());
  const std::vector<cplx> c = forward(x);
  std::vector<double> a(n / 2), b(n / 2);
  for (int k = 1; k < n / 2; ++k) {
    a[k - 1] = 2.0 * c[k].real() / n;
    b[k - 1] = -2.0 * c[k].imag() / n;
  }
  a[n / 2 - 1] = c[n / 2].real() / n;
  b[n / 2 - 1] = 0.0;
  double cmax = std::abs(c[0].real()) / n;
  for (int k = 0; k < n / 2; ++k) cmax = std::max({cmax, std::abs(a[k]), std::abs(b[k])});
  int keep = n / 2;
  while (keep > 0 && std::abs(a[keep - 1]) <= rel_cut * cmax && std::abs(b[keep - 1]) <= rel_cut * cmax)
    --keep;
  a.resize(keep);
  b.resize(keep);
  return TrigSeries(c[0].real() / n, std::move(a), std::move(b));
}

double TrigSeries::value(double t) const {
  double f, df, d2f;
  eval(t, f, df, d2f);
  return f;
}

void TrigSeries::eval(double t, double& f, double& df, double& d2f) const {
  f = a0_;
  df = d2f = 0.0;
  // cos(k t), sin(k t) by the angle-addition recurrence
  const double c1 = std::cos(t), s1 = std::sin(t);
  double ck = 1.0, sk = 0.0;
  for (std::size_t k = 1; k <= a_.size(); ++k) {
    const double cn = ck * c1 - sk * s1;
    sk = sk * c1 + ck * s1;
    ck = cn;
    const double kk = static_cast<double>(k);
    const double term = a_[k - 1] * ck + b_[k - 1] * sk;
    f += term;
    df += kk * (b_[k - 1] * ck - a_[k - 1] * sk);
    d2f -= kk * kk * term;
  }
}

std::vector<double> TrigSeries::sample(int n) const {
  std::vector<double> out(n);
  for (int j = 0; j < n; ++j) out[j] = value(2.0 * M_PI * j / n);
  return out;
}

TrigSeries TrigSeries::operator+(const TrigSeries& o) const {
  const std::size_t k = std::max(a_.size(), o.a_.size());
  std::vector<double> a(k, 0.0), b(k, 0.0);
  for (std::size_t i = 0; i < a_.size(); ++i) a[i] += a_[i], b[i] += b_[i];
  for (std::size_t i = 0; i < o.a_.size(); ++i) a[i] += o.a_[i], b[i] += o.b_[i];
  return TrigSeries(a0_ + o.a0_, std::move(a), std::move(b));
}

TrigSeries TrigSeries::scaled(double s) const {
  std::vector<double> a = a_, b = b_;
  for (double& v : a) v *= s;
  for (double& v : b) v *= s;
  return TrigSeries(a0_ * s, std::move(a), std::move(b));
}

}  // namespace ovma::spectral
