#include "hycone/hiereval.hpp"

#include <algorithm>

namespace hycone::hiereval {

double tie(const TaxonomyGraph& g, const std::string& y_pred, const std::string& y_true) {
  return g.path_distance(g.index_of(y_pred), g.index_of(y_true));
}

double lca_error(const TaxonomyGraph& g, const std::string& y_pred,
                 const std::string& y_true) {
  TaxonomyGraph::NodeIdx p = g.index_of(y_pred);
  TaxonomyGraph::NodeIdx t = g.index_of(y_true);
  return g.path_distance(t, g.lowest_common_ancestor(p, t));
}

SetMetrics set_metrics(const TaxonomyGraph& g, const std::string& y_pred,
                       const std::string& y_true, bool include_root) {
  TaxonomyGraph::NodeIdx p = g.index_of(y_pred);
  TaxonomyGraph::NodeIdx t = g.index_of(y_true);
  if (p == t) return {1.0, 1.0, 1.0};
  auto anc_set = [&](TaxonomyGraph::NodeIdx n) {
    std::vector<TaxonomyGraph::NodeIdx> a = g.ancestors(n);
    if (!include_root) std::erase(a, g.root());
    return a;  // sorted
  };
  std::vector<TaxonomyGraph::NodeIdx> pa = anc_set(p), ta = anc_set(t);
  std::vector<TaxonomyGraph::NodeIdx> both;
  std::set_intersection(pa.begin(), pa.end(), ta.begin(), ta.end(),
                        std::back_inserter(both));
  double inter = static_cast<double>(both.size());
  double uni = static_cast<double>(pa.size() + ta.size() - both.size());
  SetMetrics out;
  out.jaccard = uni > 0.0 ? inter / uni : 0.0;
  out.p_h = pa.empty() ? 0.0 : inter / static_cast<double>(pa.size());
  out.r_h = ta.empty() ? 0.0 : inter / static_cast<double>(ta.size());
  return out;
}

MetricReport metric_report(const TaxonomyGraph& g, const std::string& y_pred,
                           const std::string& y_true, bool include_root) {
  MetricReport r;
  r.tie = tie(g, y_pred, y_true);
  r.lca = lca_error(g, y_pred, y_true);
  SetMetrics s = set_metrics(g, y_pred, y_true, include_root);
  r.jaccard = s.jaccard;
  r.p_h = s.p_h;
  r.r_h = s.r_h;
  return r;
}

std::vector<manifold::HyperPoint> embed_class_prompts(
    const model::EmbeddingModel& m,
    const std::vector<std::vector<std::vector<double>>>& class_prompts) {
  if (class_prompts.empty()) throw contract_violation("zero-shot: no classes given");
  std::vector<manifold::HyperPoint> out;
  out.reserve(class_prompts.size());
  for (std::size_t c = 0; c < class_prompts.size(); ++c) {
    const auto& prompts = class_prompts[c];
    if (prompts.empty())
      throw contract_violation("zero-shot: class " + std::to_string(c) + " has no prompts");
    std::vector<double> mean(m.txt_cfg.embed_dim, 0.0);
    for (const auto& prompt : prompts) {
      std::vector<double> raw = model::encode_text_raw(m, prompt);
      for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += raw[d];
    }
    for (double& v : mean) v /= static_cast<double>(prompts.size());
    out.push_back(model::project_text_raw(m, mean));
  }
  return out;
}

std::size_t classify(const manifold::HyperPoint& image,
                     std::span<const manifold::HyperPoint> class_embeddings) {
  if (class_embeddings.empty()) throw contract_violation("classify: no class embeddings");
  std::size_t best = 0;
  double best_d = manifold::geodesic_distance(image, class_embeddings[0]);
  for (std::size_t c = 1; c < class_embeddings.size(); ++c) {
    double d = manifold::geodesic_distance(image, class_embeddings[c]);
    if (d < best_d) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

std::size_t zero_shot_classify(
    const model::EmbeddingModel& m,
    const std::vector<std::vector<std::vector<double>>>& class_prompts,
    std::span<const double> image_features) {
  std::vector<manifold::HyperPoint> classes = embed_class_prompts(m, class_prompts);
  return classify(model::embed_image(m, image_features), classes);
}

std::vector<std::size_t> retrieve_topk(const manifold::HyperPoint& query,
                                       std::span<const manifold::HyperPoint> gallery,
                                       std::size_t k) {
  if (gallery.empty()) throw contract_violation("retrieve_topk: empty gallery");
  if (k > gallery.size())
    throw contract_violation("retrieve_topk: k exceeds gallery size");
  std::vector<std::pair<double, std::size_t>> ranked(gallery.size());
  parallel_for(gallery.size(), [&](std::size_t i) {
    ranked[i] = {manifold::geodesic_distance(query, gallery[i]), i};
  });
  // Pair order gives the lower-id tie-break.
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::size_t> ids(k);
  for (std::size_t i = 0; i < k; ++i) ids[i] = ranked[i].second;
  return ids;
}

RadiusReport radius_histogram(const RoleEmbeddings& roles, std::span<const double> edges) {
  const std::vector<manifold::HyperPoint>* lists[4] = {&roles.img, &roles.txt,
                                                      &roles.img_box, &roles.txt_box};
  RadiusReport report;
  report.edges.assign(edges.begin(), edges.end());
  for (std::size_t r = 0; r < 4; ++r) {
    std::vector<double> dist;
    dist.reserve(lists[r]->size());
    double sum = 0.0;
    for (const manifold::HyperPoint& p : *lists[r]) {
      double d = manifold::geodesic_distance(
          p, manifold::origin(manifold::Curvature(p.kappa), p.dim()));
      dist.push_back(d);
      sum += d;
    }
    report.counts[r] = histogram_counts(dist, edges);
    report.means[r] = dist.empty() ? 0.0 : sum / static_cast<double>(dist.size());
  }
  return report;
}

}  // namespace hycone::hiereval
