#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "hycone/manifold.hpp"
#include "hycone/model.hpp"
#include "hycone/taxonomy.hpp"

namespace hycone::hiereval {

// Per-pair hierarchical error report.
struct MetricReport {
  double tie = 0.0;      // graph distance between labels
  double lca = 0.0;      // distance from the true label to the deepest common ancestor
  double jaccard = 0.0;  // over ancestor sets
  double p_h = 0.0;
  double r_h = 0.0;
};

// Sum of edge weights on the shortest undirected path between the labels.
double tie(const TaxonomyGraph& g, const std::string& y_pred, const std::string& y_true);

// Distance from y_true to the deepest common ancestor of the pair.
double lca_error(const TaxonomyGraph& g, const std::string& y_pred,
                 const std::string& y_true);

struct SetMetrics {
  double jaccard = 0.0, p_h = 0.0, r_h = 0.0;
};

// Ancestor-set overlap. Sets include the label itself and, by default,
// exclude the root (a shared constant element that would inflate every
// score); include_root keeps it. Equal labels score (1, 1, 1). A root-label
// ancestor set can be empty under the default; ratios against an empty set
// are 0.
SetMetrics set_metrics(const TaxonomyGraph& g, const std::string& y_pred,
                       const std::string& y_true, bool include_root = false);

MetricReport metric_report(const TaxonomyGraph& g, const std::string& y_pred,
                           const std::string& y_true, bool include_root = false);

// Per-class prompt features -> one manifold point per class. Prompts are
// averaged as raw encoder outputs in the origin tangent space, then scaled
// and projected; the hyperboloid itself is not closed under averaging.
std::vector<manifold::HyperPoint> embed_class_prompts(
    const model::EmbeddingModel& m,
    const std::vector<std::vector<std::vector<double>>>& class_prompts);

// Index of the geodesically nearest class embedding; ties pick the lower id.
std::size_t classify(const manifold::HyperPoint& image,
                     std::span<const manifold::HyperPoint> class_embeddings);

// embed_class_prompts + embed_image + classify.
std::size_t zero_shot_classify(
    const model::EmbeddingModel& m,
    const std::vector<std::vector<std::vector<double>>>& class_prompts,
    std::span<const double> image_features);

// Ids of the k geodesically nearest gallery points, ascending distance,
// ties by lower id.
std::vector<std::size_t> retrieve_topk(const manifold::HyperPoint& query,
                                       std::span<const manifold::HyperPoint> gallery,
                                       std::size_t k);

struct RoleEmbeddings {
  std::vector<manifold::HyperPoint> img, txt, img_box, txt_box;
};

// Geodesic distance-from-origin histograms per role, with per-role means.
// Role order in the arrays: img, txt, img_box, txt_box.
struct RadiusReport {
  std::vector<double> edges;
  std::array<std::vector<std::size_t>, 4> counts;
  std::array<double, 4> means{};
};

RadiusReport radius_histogram(const RoleEmbeddings& roles, std::span<const double> edges);

}  // namespace hycone::hiereval
