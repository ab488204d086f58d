#include "ovma/domain.hpp"

#include <boost/math/tools/roots.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ovma/errors.hpp"

namespace ovma {
namespace {

constexpr double kTwoPi = 2.0 * M_PI;

class EllipseDomain final : public ConvexDomain {
 public:
  explicit EllipseDomain(const EllipsoidSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.n != 2) throw ArgumentError("ellipse domain needs a planar spec");
    a_ << spec_.A[0], spec_.A[1], spec_.A[2], spec_.A[3];
    ainv_ = a_.inverse();
    x0_ = {spec_.x0[0], spec_.x0[1]};
    sc_ = std::sqrt(spec_.c);
  }

  bool contains(Vec2 p) const override {
    const Eigen::Vector2d r = a_ * Eigen::Vector2d(p.x - x0_.x, p.y - x0_.y);
    return r.squaredNorm() < spec_.c;
  }

  double exit_distance(Vec2 p, Vec2 d) const override {
    const Eigen::Vector2d ad = a_ * Eigen::Vector2d(d.x, d.y);
    const Eigen::Vector2d ar = a_ * Eigen::Vector2d(p.x - x0_.x, p.y - x0_.y);
    const double qa = ad.squaredNorm(), qb = ad.dot(ar), slack = spec_.c - ar.squaredNorm();
    const double disc = std::sqrt(std::max(qb * qb + qa * slack, 0.0));
    // positive root of qa t^2 + 2 qb t - slack = 0, cancellation-free
    return qb >= 0.0 ? slack / (qb + disc) : (disc - qb) / qa;
  }

  Box bbox() const override {
    const double wx = sc_ * std::hypot(ainv_(0, 0), ainv_(0, 1));
    const double wy = sc_ * std::hypot(ainv_(1, 0), ainv_(1, 1));
    return {{x0_.x - wx, x0_.y - wy}, {x0_.x + wx, x0_.y + wy}};
  }

  std::vector<BoundarySample> boundary_samples(int m) const override {
    std::vector<BoundarySample> out(m);
    for (int k = 0; k < m; ++k) {
      const double t = kTwoPi * k / m;
      const Eigen::Vector2d z(std::cos(t), std::sin(t)), dz(-std::sin(t), std::cos(t));
      const Eigen::Vector2d x = sc_ * (ainv_ * z);
      const Eigen::Vector2d nrm = a_.transpose() * z;
      const double g = nrm.norm();
      out[k].point = {x0_.x + x(0), x0_.y + x(1)};
      out[k].normal = {nrm(0) / g, nrm(1) / g};
      out[k].curvature = 1.0 / (sc_ * g * g * g);
      out[k].ds = sc_ * (ainv_ * dz).norm() * kTwoPi / m;
    }
    return out;
  }

  Vec2 centroid() const override { return x0_; }
  double area() const override { return M_PI * spec_.c; }

  spectral::TrigSeries support_series() const override {
    const int m = 1024;
    std::vector<double> h(m);
    const Eigen::Matrix2d ait = ainv_.transpose();
    for (int j = 0; j < m; ++j) {
      const double t = kTwoPi * j / m;
      const Eigen::Vector2d u(std::cos(t), std::sin(t));
      h[j] = x0_.x * u(0) + x0_.y * u(1) + sc_ * (ait * u).norm();
    }
    return spectral::TrigSeries::from_samples(h, 1e-16);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "ellipse A=[" << a_(0, 0) << "," << a_(0, 1) << ";" << a_(1, 0) << "," << a_(1, 1)
       << "] c=" << spec_.c;
    return os.str();
  }

 private:
  EllipsoidSpec spec_;
  Eigen::Matrix2d a_, ainv_;
  Vec2 x0_;
  double sc_ = 1.0;
};

class SupportDomain final : public ConvexDomain {
 public:
  explicit SupportDomain(spectral::TrigSeries h) : h_(std::move(h)) {
    const int m = std::max(2048, 16 * h_.degree());
    hmin_ = std::numeric_limits<double>::infinity();
    double f, df, d2f;
    std::vector<double> rho(m);
    for (int j = 0; j < m; ++j) {
      const double t = kTwoPi * j / m;
      h_.eval(t, f, df, d2f);
      rho[j] = f + d2f;
      if (!(rho[j] > 0.0)) throw ConvexityError("support curve: radius of curvature h + h'' <= 0");
      hmin_ = std::min(hmin_, f);
      const Vec2 x = f * unit_vector(t) + df * perp(unit_vector(t));
      rmax_ = std::max(rmax_, norm(x));
      area_ += 0.5 * f * rho[j] * kTwoPi / m;
      centroid_ += (f * rho[j] * kTwoPi / m) * x;
    }
    if (!(hmin_ > 0.0)) throw ConstructionError("support curve: origin must lie strictly inside the body");
    centroid_ *= 1.0 / (3.0 * area_);
  }

  bool contains(Vec2 p) const override {
    const double r = norm(p);
    if (r < hmin_) return true;
    if (r >= rmax_) return false;
    return r < exit_distance({0.0, 0.0}, (1.0 / r) * p);
  }

  double exit_distance(Vec2 p, Vec2 d) const override {
    // The exit point is the boundary point X(t) whose normal angle t lies in
    // (td - pi/2, td + pi/2) with cross(d, X(t) - p) = 0; that function is
    // increasing there with derivative rho(t) (d . u(t)).
    const double td = std::atan2(d.y, d.x);
    auto fn = [&](double t) {
      double f, df, d2f;
      h_.eval(t, f, df, d2f);
      const Vec2 u = unit_vector(t);
      const Vec2 x = f * u + df * perp(u);
      return std::make_pair(cross(d, x - p), (f + d2f) * dot(d, u));
    };
    std::uintmax_t iters = 100;
    const double t = boost::math::tools::newton_raphson_iterate(fn, td, td - 0.5 * M_PI, td + 0.5 * M_PI,
                                                                std::numeric_limits<double>::digits - 2, iters);
    double f, df, d2f;
    h_.eval(t, f, df, d2f);
    const Vec2 u = unit_vector(t);
    return dot(d, f * u + df * perp(u) - p);
  }

  Box bbox() const override {
    return {{-h_.value(M_PI), -h_.value(1.5 * M_PI)}, {h_.value(0.0), h_.value(0.5 * M_PI)}};
  }

  std::vector<BoundarySample> boundary_samples(int m) const override {
    std::vector<BoundarySample> out(m);
    for (int k = 0; k < m; ++k) {
      const double t = kTwoPi * k / m;
      double f, df, d2f;
      h_.eval(t, f, df, d2f);
      const Vec2 u = unit_vector(t);
      out[k].point = f * u + df * perp(u);
      out[k].normal = u;
      out[k].curvature = 1.0 / (f + d2f);
      out[k].ds = (f + d2f) * kTwoPi / m;
    }
    return out;
  }

  Vec2 centroid() const override { return centroid_; }
  double area() const override { return area_; }
  spectral::TrigSeries support_series() const override { return h_; }

  std::string describe() const override {
    std::ostringstream os;
    os << "support degree " << h_.degree() << " h0=" << h_.a0();
    return os.str();
  }

 private:
  spectral::TrigSeries h_;
  double hmin_ = 0.0, rmax_ = 0.0, area_ = 0.0;
  Vec2 centroid_;
};

class SuperellipseDomain final : public ConvexDomain {
 public:
  explicit SuperellipseDomain(double p) : p_(p) {
    if (!(p >= 2.0)) throw ArgumentError("superellipse exponent must be >= 2");
  }

  bool contains(Vec2 q) const override { return level(q) < 1.0; }

  double exit_distance(Vec2 q, Vec2 d) const override {
    // level() is convex along the ray, below 1 at t = 0
    auto fn = [&](double t) { return level(q + t * d) - 1.0; };
    double hi = 1.0;
    while (fn(hi) < 0.0) hi *= 2.0;
    std::uintmax_t iters = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 3);
    const auto r = boost::math::tools::toms748_solve(fn, 0.0, hi, fn(0.0), fn(hi), tol, iters);
    return 0.5 * (r.first + r.second);
  }

  Box bbox() const override { return {{-1.0, -1.0}, {1.0, 1.0}}; }

  std::vector<BoundarySample> boundary_samples(int m) const override {
    std::vector<BoundarySample> out(m);
    const double p = p_;
    for (int k = 0; k < m; ++k) {
      // polar angles offset by half a step
      const double phi = kTwoPi * (k + 0.5) / m;
      const double c = std::cos(phi), s = std::sin(phi);
      const double g = std::pow(std::abs(c), p) + std::pow(std::abs(s), p);
      const double r = std::pow(g, -1.0 / p);
      const double dg = p * (std::pow(std::abs(c), p - 1) * std::copysign(1.0, c) * (-s) +
                             std::pow(std::abs(s), p - 1) * std::copysign(1.0, s) * c);
      const double dr = -r / (p * g) * dg;
      const Vec2 x{r * c, r * s};
      const double fx = p * std::pow(std::abs(x.x), p - 1) * std::copysign(1.0, x.x);
      const double fy = p * std::pow(std::abs(x.y), p - 1) * std::copysign(1.0, x.y);
      const double fxx = p * (p - 1) * std::pow(std::abs(x.x), p - 2);
      const double fyy = p * (p - 1) * std::pow(std::abs(x.y), p - 2);
      const double gn = std::hypot(fx, fy);
      out[k].point = x;
      out[k].normal = {fx / gn, fy / gn};
      out[k].curvature = (fxx * fy * fy + fyy * fx * fx) / (gn * gn * gn);
      out[k].ds = std::hypot(r, dr) * kTwoPi / m;
    }
    return out;
  }

  Vec2 centroid() const override { return {0.0, 0.0}; }
  double area() const override {
    return 4.0 * std::pow(std::tgamma(1.0 + 1.0 / p_), 2) / std::tgamma(1.0 + 2.0 / p_);
  }

  spectral::TrigSeries support_series() const override {
    // dual norm: h(u) = (|u1|^q + |u2|^q)^{1/q}, 1/p + 1/q = 1
    const double q = p_ / (p_ - 1.0);
    const int m = 1024;
    std::vector<double> h(m);
    for (int j = 0; j < m; ++j) {
      const double t = kTwoPi * j / m;
      h[j] = std::pow(std::pow(std::abs(std::cos(t)), q) + std::pow(std::abs(std::sin(t)), q), 1.0 / q);
    }
    return spectral::TrigSeries::from_samples(h);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "superellipse p=" << p_;
    return os.str();
  }

 private:
  double level(Vec2 q) const { return std::pow(std::abs(q.x), p_) + std::pow(std::abs(q.y), p_); }
  double p_;
};

}  // namespace

DomainPtr make_ellipse_domain(const EllipsoidSpec& spec) { return std::make_shared<EllipseDomain>(spec); }
DomainPtr make_support_domain(const spectral::TrigSeries& h) { return std::make_shared<SupportDomain>(h); }
DomainPtr make_superellipse_domain(double p) { return std::make_shared<SuperellipseDomain>(p); }

}  // namespace ovma
