#include "hycone/geo.hpp"

#include <limits>

namespace hycone::geo {

std::vector<manifold::HyperPoint> interpolate(const manifold::HyperPoint& source,
                                              const manifold::HyperPoint& target,
                                              std::size_t n, bool include_source) {
  if (n < 1) throw contract_violation("interpolate: n must be >= 1");
  if (source.dim() != target.dim() || source.kappa != target.kappa)
    throw contract_violation("interpolate: endpoints must share geometry");
  manifold::Curvature kappa(source.kappa);
  manifold::HyperPoint o = manifold::origin(kappa, source.dim());
  manifold::TangentVector u = manifold::log_map(o, source);
  manifold::TangentVector v = manifold::log_map(o, target);
  std::vector<manifold::HyperPoint> out;
  out.reserve(n + (include_source ? 1 : 0));
  std::size_t first = include_source ? 0 : 1;
  for (std::size_t i = first; i <= n; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(n);
    manifold::TangentVector w;
    w.spatial.resize(u.dim());
    for (std::size_t d = 0; d < u.dim(); ++d)
      w.spatial[d] = (1.0 - t) * u.spatial[d] + t * v.spatial[d];
    out.push_back(manifold::exp_map(o, w));
  }
  return out;
}

std::vector<TraversalHit> traverse(const manifold::HyperPoint& source,
                                   const manifold::HyperPoint& target,
                                   std::span<const manifold::HyperPoint> gallery,
                                   std::size_t n, bool dedup_global,
                                   bool include_source) {
  if (gallery.empty()) throw contract_violation("traverse: empty gallery");
  std::vector<manifold::HyperPoint> path = interpolate(source, target, n, include_source);
  std::vector<TraversalHit> hits;
  std::vector<char> used(gallery.size(), 0);
  std::size_t first = include_source ? 0 : 1;
  for (std::size_t i = 0; i < path.size(); ++i) {
    std::size_t best = gallery.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < gallery.size(); ++g) {
      double d = manifold::geodesic_distance(path[i], gallery[g]);
      if (d < best_d) {
        best = g;
        best_d = d;
      }
    }
    if (!hits.empty() && hits.back().item_id == best) continue;
    if (dedup_global && used[best]) continue;
    used[best] = 1;
    double t = static_cast<double>(first + i) / static_cast<double>(n);
    hits.push_back({t, best, best_d});
  }
  return hits;
}

manifold::HyperPoint root_point(double kappa, std::size_t dim) {
  return manifold::origin(manifold::Curvature(kappa), dim);
}

std::vector<double> euclidean_centroid(std::span<const std::vector<double>> samples) {
  if (samples.empty()) throw contract_violation("euclidean_centroid: no samples");
  std::vector<double> mean(samples[0].size(), 0.0);
  for (const auto& s : samples) {
    if (s.size() != mean.size())
      throw contract_violation("euclidean_centroid: dimension mismatch");
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += s[d];
  }
  for (double& v : mean) v /= static_cast<double>(samples.size());
  return mean;
}

}  // namespace hycone::geo
