#pragma once

// Smooth convex planar domains with analytic boundary data. Three kinds:
// ellipses from an EllipsoidSpec, bodies given by a Fourier support function
// (origin strictly inside), and superellipses |x|^p + |y|^p <= 1.

#include <memory>
#include <string>
#include <vector>

#include "ovma/exact_solutions.hpp"
#include "ovma/geometry.hpp"
#include "ovma/spectral.hpp"

namespace ovma {

struct BoundarySample {
  Vec2 point;
  Vec2 normal;       // outward unit normal
  double curvature;  // from the analytic representation
  double ds;         // arc-length quadrature weight
};

class ConvexDomain {
 public:
  virtual ~ConvexDomain() = default;

  /// Strict interior test.
  virtual bool contains(Vec2 p) const = 0;
  /// Distance from an interior point p to the boundary along the unit vector d.
  virtual double exit_distance(Vec2 p, Vec2 d) const = 0;
  virtual Box bbox() const = 0;
  /// m points covering the boundary once, with weights summing to the perimeter.
  virtual std::vector<BoundarySample> boundary_samples(int m) const = 0;
  virtual Vec2 centroid() const = 0;
  virtual double area() const = 0;
  /// Fourier support function about the origin; used for normal perturbations.
  virtual spectral::TrigSeries support_series() const = 0;
  virtual std::string describe() const = 0;
};

using DomainPtr = std::shared_ptr<const ConvexDomain>;

/// Planar spec only.
DomainPtr make_ellipse_domain(const EllipsoidSpec& spec);
/// Requires h > 0 and h + h'' > 0; ConvexityError otherwise.
DomainPtr make_support_domain(const spectral::TrigSeries& h);
/// p >= 2. For p > 2 the curvature vanishes at the four axis points.
DomainPtr make_superellipse_domain(double p);

}  // namespace ovma
