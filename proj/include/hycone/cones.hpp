#pragma once

#include "hycone/manifold.hpp"

// Entailment cones on the hyperboloid. Each point q carries a cone opening
// toward the boundary; p lies inside it when the exterior angle at q is at
// most the half-aperture. Curvature is taken from the points themselves.
namespace hycone::cones {

struct ApertureParams {
  double boundary_k = 0.1;  // cone boundary constant, > 0
  double eta = 1.0;         // aperture threshold multiplier, >= 0
};

// Half-aperture asin(clamp(2K / (sqrt(kappa) * |q~|), -1, 1)). The spatial
// norm is floored at 1e-8; at and inside the floor radius the aperture
// saturates to pi/2 (the cone at the origin is the whole space).
double half_aperture(const manifold::HyperPoint& q, double boundary_k);

// Exterior angle at q between the geodesic to p and the radial direction,
//   acos(clamp((p0 + q0*kappa*<p,q>_L) / (|q~| * sqrt((kappa*<p,q>_L)^2 - 1)))).
// Returns 0 when (kappa*<p,q>_L)^2 - 1 < 1e-14 (coincident points).
double exterior_angle(const manifold::HyperPoint& p, const manifold::HyperPoint& q);

// Hinge penalty max(0, exterior_angle(p, q) - eta * half_aperture(q)).
// p is the specific point, q the general one; zero iff p lies within the
// eta-scaled cone of q.
double entailment_penalty(const manifold::HyperPoint& p, const manifold::HyperPoint& q,
                          const ApertureParams& params);

}  // namespace hycone::cones
