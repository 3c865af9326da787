#include "hycone/manifold.hpp"

#include <cmath>

namespace hycone::manifold {

namespace {

constexpr double kSinhcSeriesCutoff = 1e-4;
constexpr double kCoincidentGuard = 1e-14;  // on (kappa*<p,q>)^2 - 1

void check_same_geometry(const HyperPoint& p, const HyperPoint& q, const char* op) {
  if (p.dim() != q.dim())
    throw contract_violation(std::string(op) + ": dimension mismatch");
  if (p.kappa != q.kappa)
    throw contract_violation(std::string(op) + ": curvature mismatch");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// sinh(x)/x, even and smooth through x = 0.
double sinhc(double x) {
  if (std::abs(x) < kSinhcSeriesCutoff) {
    double x2 = x * x;
    return 1.0 + x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sinh(x) / x;
}

// acosh(1 + d) for d >= 0 without cancellation near d = 0.
double acosh1p(double d) {
  return std::log1p(d + std::sqrt(d * (d + 2.0)));
}

}  // namespace

Curvature::Curvature(double kappa) : kappa_(kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    throw contract_violation("Curvature: kappa must be finite and > 0");
}

double HyperPoint::time() const {
  double s2 = dot(spatial, spatial);
  return std::sqrt(1.0 / kappa + s2);
}

double HyperPoint::spatial_norm() const {
  return std::sqrt(dot(spatial, spatial));
}

HyperPoint make_point(std::vector<double> spatial, Curvature kappa) {
  return HyperPoint{std::move(spatial), kappa.value()};
}

HyperPoint origin(Curvature kappa, std::size_t dim) {
  return HyperPoint{std::vector<double>(dim, 0.0), kappa.value()};
}

double lorentz_inner(std::span<const double> p_full, std::span<const double> q_full) {
  if (p_full.size() != q_full.size() || p_full.empty())
    throw contract_violation("lorentz_inner: dimension mismatch");
  double s = -p_full[0] * q_full[0];
  for (std::size_t i = 1; i < p_full.size(); ++i) s += p_full[i] * q_full[i];
  return s;
}

double minkowski_residual(const HyperPoint& p, const HyperPoint& q) {
  check_same_geometry(p, q, "minkowski_residual");
  double k = p.kappa;
  double a = dot(p.spatial, p.spatial);
  double b = dot(q.spatial, q.spatial);
  double c = dot(p.spatial, q.spatial);
  double dd = 0.0;  // |p~ - q~|^2, accumulated from differences
  for (std::size_t i = 0; i < p.spatial.size(); ++i) {
    double d = p.spatial[i] - q.spatial[i];
    dd += d * d;
  }
  // kappa*<p,q>_L + 1 = -(kappa*dd + kappa^2*(a*b - c^2)) / denom with
  // denom = 1 + kappa*c + sqrt((1+kappa*a)(1+kappa*b)) >= 2. Both numerator
  // terms are nonnegative up to rounding, so the residual never cancels.
  double denom = 1.0 + k * c + std::sqrt((1.0 + k * a) * (1.0 + k * b));
  // Lagrange identity: a*b - c^2 as a sum of squared cross terms, so nearly
  // collinear pairs keep absolute accuracy instead of cancelling.
  double gram = 0.0;
  for (std::size_t i = 0; i + 1 < p.spatial.size(); ++i)
    for (std::size_t j = i + 1; j < p.spatial.size(); ++j) {
      double x = p.spatial[i] * q.spatial[j] - p.spatial[j] * q.spatial[i];
      gram += x * x;
    }
  double num = k * dd + k * k * gram;
  double delta = num / denom;
  return delta > 0.0 ? delta : 0.0;
}

double lorentz_inner(const HyperPoint& p, const HyperPoint& q) {
  return -(1.0 + minkowski_residual(p, q)) / p.kappa;
}

std::vector<double> time_lift(std::span<const double> spatial, Curvature kappa) {
  std::vector<double> full(spatial.size() + 1);
  full[0] = std::sqrt(1.0 / kappa.value() + dot(spatial, spatial));
  for (std::size_t i = 0; i < spatial.size(); ++i) full[i + 1] = spatial[i];
  return full;
}

double geodesic_distance(const HyperPoint& p, const HyperPoint& q) {
  double delta = minkowski_residual(p, q);
  return acosh1p(delta) / std::sqrt(p.kappa);
}

double tangent_norm(const HyperPoint& base, const TangentVector& v) {
  if (base.dim() != v.dim())
    throw contract_violation("tangent_norm: dimension mismatch");
  double sv = dot(base.spatial, v.spatial);
  double v0 = sv / base.time();  // Minkowski-orthogonality to the base
  double n2 = dot(v.spatial, v.spatial) - v0 * v0;
  return std::sqrt(n2 > 0.0 ? n2 : 0.0);
}

HyperPoint exp_map(const HyperPoint& base, const TangentVector& v) {
  if (base.dim() != v.dim())
    throw contract_violation("exp_map: dimension mismatch");
  double k = base.kappa;
  double norm = tangent_norm(base, v);
  double u = std::sqrt(k) * norm;
  // result = cosh(u)*p + (sinh(u)/u)*v on full vectors; the time coordinate
  // of the result is derived, so only the spatial part is materialized.
  double ch = std::cosh(u);
  double sc = sinhc(u);
  HyperPoint out;
  out.kappa = k;
  out.spatial.resize(base.dim());
  for (std::size_t i = 0; i < base.dim(); ++i)
    out.spatial[i] = ch * base.spatial[i] + sc * v.spatial[i];
  return out;
}

TangentVector log_map(const HyperPoint& base, const HyperPoint& q) {
  check_same_geometry(base, q, "log_map");
  double k = base.kappa;
  double delta = minkowski_residual(base, q);
  double w2 = delta * (delta + 2.0);  // (kappa*<p,q>)^2 - 1
  TangentVector v;
  v.spatial.assign(base.dim(), 0.0);
  if (w2 < kCoincidentGuard) return v;
  double s = -(1.0 + delta);  // kappa * <p,q>_L
  double coef = acosh1p(delta) / std::sqrt(w2);
  // v = coef * (q + kappa*<p,q>_L * p); spatial part only, time is derived.
  for (std::size_t i = 0; i < base.dim(); ++i)
    v.spatial[i] = coef * (q.spatial[i] + s * base.spatial[i]);
  return v;
}

HyperPoint project_to_manifold(std::span<const double> raw, double scale, Curvature kappa) {
  TangentVector v;
  v.spatial.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) v.spatial[i] = scale * raw[i];
  return exp_map(origin(kappa, raw.size()), v);
}

}  // namespace hycone::manifold
