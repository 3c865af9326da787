#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hycone/manifold.hpp"

namespace hycone::geo {

// Equally spaced path from source to target through the origin chart: both
// endpoints are pulled back with the origin log map, blended linearly at
// t_i = i/N for i in 1..N, and mapped back. The source itself (t = 0) is
// not part of the set unless include_source is set.
std::vector<manifold::HyperPoint> interpolate(const manifold::HyperPoint& source,
                                              const manifold::HyperPoint& target,
                                              std::size_t n,
                                              bool include_source = false);

struct TraversalHit {
  double t = 0.0;
  std::size_t item_id = 0;
  double distance = 0.0;
};

// Nearest gallery item for every interpolation point, distance ties going to
// the lower id. Consecutive repeats of the same item are dropped;
// dedup_global drops an item everywhere after its first appearance.
std::vector<TraversalHit> traverse(const manifold::HyperPoint& source,
                                   const manifold::HyperPoint& target,
                                   std::span<const manifold::HyperPoint> gallery,
                                   std::size_t n, bool dedup_global = false,
                                   bool include_source = false);

// The hyperboloid origin: time 1/sqrt(kappa), spatial zeros. Traversals
// toward the hierarchy root aim here.
manifold::HyperPoint root_point(double kappa, std::size_t dim);

// Arithmetic mean of feature vectors; the root stand-in for imported
// flat-space baselines. Errors on an empty sample set.
std::vector<double> euclidean_centroid(std::span<const std::vector<double>> samples);

}  // namespace hycone::geo
