#pragma once

#include <span>
#include <vector>

#include "hycone/common.hpp"

// Hyperboloid model of hyperbolic space with curvature -kappa, kappa > 0.
// Points are stored by their spatial coordinates only; the time coordinate
// p0 = sqrt(1/kappa + |spatial|^2) is derived on demand, so stored points are
// on-manifold by construction. The ambient Minkowski inner product is
//   <p, q>_L = -p0*q0 + <spatial_p, spatial_q>.
namespace hycone::manifold {

class Curvature {
 public:
  explicit Curvature(double kappa);
  double value() const { return kappa_; }

 private:
  double kappa_;
};

struct HyperPoint {
  std::vector<double> spatial;
  double kappa = 1.0;

  std::size_t dim() const { return spatial.size(); }
  double time() const;           // sqrt(1/kappa + |spatial|^2)
  double spatial_norm() const;   // Euclidean norm of the spatial part
};

// Tangent vector, represented by spatial coordinates. At the origin the time
// component is identically zero; at a general base point it is derived from
// Minkowski-orthogonality to the base: v0 = <base_spatial, v_spatial> / p0.
struct TangentVector {
  std::vector<double> spatial;

  std::size_t dim() const { return spatial.size(); }
};

HyperPoint make_point(std::vector<double> spatial, Curvature kappa);
HyperPoint origin(Curvature kappa, std::size_t dim);

// Full ambient inner product on (n+1)-vectors laid out as (time, spatial...).
double lorentz_inner(std::span<const double> p_full, std::span<const double> q_full);

// Inner product of two stored points. Evaluated through a cancellation-free
// residual so that kappa * lorentz_inner(p, p) == -1 holds to machine
// precision; the naive -p0*q0 + <p~,q~> form loses ~|p|^2 * eps here.
double lorentz_inner(const HyperPoint& p, const HyperPoint& q);

// delta >= 0 with kappa * <p,q>_L = -(1 + delta). Stable for p ~ q.
double minkowski_residual(const HyperPoint& p, const HyperPoint& q);

// Prepends the derived time coordinate: (sqrt(1/kappa + |s|^2), s...).
std::vector<double> time_lift(std::span<const double> spatial, Curvature kappa);

// Geodesic distance (1/sqrt(kappa)) * acosh(-kappa * <p,q>_L); the acosh
// argument is clamped to >= 1 so rounding near coincident points yields 0.
double geodesic_distance(const HyperPoint& p, const HyperPoint& q);

// Norm induced on tangent vectors, sqrt(max(<v,v>_L, 0)) with the time
// component derived at the base point.
double tangent_norm(const HyperPoint& base, const TangentVector& v);

// exp_map(base, v): geodesic from base with initial velocity v, evaluated at
// unit time. sinh(x)/x is series-expanded below x < 1e-4.
HyperPoint exp_map(const HyperPoint& base, const TangentVector& v);

// log_map(base, q): inverse of exp_map at base. Returns the zero vector when
// (kappa * <p,q>_L)^2 - 1 < 1e-14 (coincident points).
TangentVector log_map(const HyperPoint& base, const HyperPoint& q);

// Scales a raw vector and lifts it through the origin exp map. This is the
// encoder head: raw outputs live in the origin tangent space.
HyperPoint project_to_manifold(std::span<const double> raw, double scale, Curvature kappa);

}  // namespace hycone::manifold
