#include "hycone/cones.hpp"

#include <algorithm>
#include <cmath>

namespace hycone::cones {

namespace {
constexpr double kMinSpatialNorm = 1e-8;
constexpr double kCoincidentGuard = 1e-14;  // on (kappa*<p,q>)^2 - 1
}  // namespace

double half_aperture(const manifold::HyperPoint& q, double boundary_k) {
  if (!(boundary_k > 0.0))
    throw contract_violation("half_aperture: boundary constant must be > 0");
  double nq = std::max(q.spatial_norm(), kMinSpatialNorm);
  double arg = 2.0 * boundary_k / (std::sqrt(q.kappa) * nq);
  return std::asin(std::clamp(arg, -1.0, 1.0));
}

double exterior_angle(const manifold::HyperPoint& p, const manifold::HyperPoint& q) {
  if (p.dim() != q.dim() || p.kappa != q.kappa)
    throw contract_violation("exterior_angle: mismatched points");
  double delta = manifold::minkowski_residual(p, q);
  double w2 = delta * (delta + 2.0);  // (kappa*<p,q>_L)^2 - 1
  if (w2 < kCoincidentGuard) return 0.0;
  // Two algebraically equal forms of num = p0 + q0*kappa*<p,q>_L:
  //   (a) (|p~|^2-|q~|^2)/(p0+q0) - q0*delta, strong at large kappa*radius;
  //   (b) kappa*(c*q0 - |q~|^2*p0) as an fma-compensated 2x2 determinant
  //       (kappa*q0^2 = 1 + kappa*|q~|^2), strong for small |q~|.
  // Collinear pairs cancel catastrophically in whichever form has the larger
  // intermediate terms, so pick the smaller-magnitude one.
  double c = 0.0, nq2 = 0.0, diff2 = 0.0;
  for (std::size_t i = 0; i < p.spatial.size(); ++i) {
    c += p.spatial[i] * q.spatial[i];
    nq2 += q.spatial[i] * q.spatial[i];
    diff2 += (p.spatial[i] - q.spatial[i]) * (p.spatial[i] + q.spatial[i]);
  }
  double term1 = diff2 / (p.time() + q.time());
  double term2 = q.time() * delta;
  double w1 = c * q.time();
  double e1 = std::fma(c, q.time(), -w1);
  double v1 = nq2 * p.time();
  double e2 = std::fma(nq2, p.time(), -v1);
  double cond_a = std::abs(term1) + term2;
  double cond_b = p.kappa * (std::abs(w1) + std::abs(v1));
  double num = cond_a <= cond_b ? term1 - term2
                                : p.kappa * ((w1 - v1) + (e1 - e2));
  double den = std::max(q.spatial_norm(), kMinSpatialNorm) * std::sqrt(w2);
  return std::acos(std::clamp(num / den, -1.0, 1.0));
}

double entailment_penalty(const manifold::HyperPoint& p, const manifold::HyperPoint& q,
                          const ApertureParams& params) {
  if (params.eta < 0.0)
    throw contract_violation("entailment_penalty: eta must be >= 0");
  double phi = exterior_angle(p, q);
  double omega = half_aperture(q, params.boundary_k);
  return std::max(0.0, phi - params.eta * omega);
}

}  // namespace hycone::cones
