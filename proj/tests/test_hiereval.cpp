#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <string>
#include <vector>

#include "hycone/common.hpp"
#include "hycone/hiereval.hpp"
#include "hycone/manifold.hpp"
#include "hycone/model.hpp"

using namespace hycone;
using namespace hycone::hiereval;
using namespace hycone::manifold;

namespace {

TaxonomyGraph chain_and_fork() {
  // root -> a -> b, root -> c, a -> d
  TaxonomyGraph g("root");
  g.add_edge("root", "a");
  g.add_edge("a", "b");
  g.add_edge("root", "c");
  g.add_edge("a", "d");
  g.validate();
  return g;
}

// Independent oracle machinery over a random tree stored as a parent array.
struct OracleTree {
  std::vector<std::size_t> parent;  // parent[0] unused
  TaxonomyGraph graph{"n0"};

  explicit OracleTree(Rng& rng, std::size_t n) {
    parent.resize(n, 0);
    for (std::size_t i = 1; i < n; ++i) {
      parent[i] = rng.index(i);
      graph.add_edge("n" + std::to_string(parent[i]), "n" + std::to_string(i));
    }
    graph.validate();
  }

  std::vector<std::size_t> chain(std::size_t v) const {
    std::vector<std::size_t> c = {v};
    while (v != 0) {
      v = parent[v];
      c.push_back(v);
    }
    return c;  // v..root
  }

  std::size_t depth(std::size_t v) const { return chain(v).size() - 1; }

  // Unweighted shortest path by breadth-first search over the undirected
  // edges, deliberately ignorant of the tree structure.
  std::size_t bfs_distance(std::size_t a, std::size_t b) const {
    std::vector<std::vector<std::size_t>> adj(parent.size());
    for (std::size_t i = 1; i < parent.size(); ++i) {
      adj[i].push_back(parent[i]);
      adj[parent[i]].push_back(i);
    }
    std::vector<int> dist(parent.size(), -1);
    std::deque<std::size_t> q = {a};
    dist[a] = 0;
    while (!q.empty()) {
      std::size_t v = q.front();
      q.pop_front();
      if (v == b) break;
      for (std::size_t w : adj[v])
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push_back(w);
        }
    }
    return static_cast<std::size_t>(dist[b]);
  }

  std::size_t lca(std::size_t a, std::size_t b) const {
    auto ca = chain(a), cb = chain(b);
    std::set<std::size_t> in_a(ca.begin(), ca.end());
    std::size_t best = 0, best_depth = 0;
    for (std::size_t v : cb)
      if (in_a.count(v) && depth(v) >= best_depth) {
        best = v;
        best_depth = depth(v);
      }
    return best;
  }

  SetMetrics sets(std::size_t a, std::size_t b, bool include_root) const {
    // Matching labels count as a perfect match even when root exclusion
    // empties both ancestor sets.
    if (a == b) return {1.0, 1.0, 1.0};
    auto ca = chain(a), cb = chain(b);
    std::set<std::size_t> sa(ca.begin(), ca.end()), sb(cb.begin(), cb.end());
    if (!include_root) {
      sa.erase(0);
      sb.erase(0);
    }
    std::vector<std::size_t> inter, uni;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::back_inserter(inter));
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(),
                   std::back_inserter(uni));
    SetMetrics m;
    m.jaccard = uni.empty() ? 0.0
                            : static_cast<double>(inter.size()) /
                                  static_cast<double>(uni.size());
    m.p_h = sa.empty() ? 0.0
                       : static_cast<double>(inter.size()) /
                             static_cast<double>(sa.size());
    m.r_h = sb.empty() ? 0.0
                       : static_cast<double>(inter.size()) /
                             static_cast<double>(sb.size());
    return m;
  }

  std::string name(std::size_t v) const { return "n" + std::to_string(v); }
};

}  // namespace

TEST_CASE("tie distance worked values") {
  TaxonomyGraph g = chain_and_fork();
  CHECK(tie(g, "b", "b") == 0.0);
  CHECK(tie(g, "b", "d") == 2.0);  // siblings under a
  CHECK(tie(g, "root", "b") == 2.0);
  CHECK(tie(g, "b", "c") == 3.0);
}

TEST_CASE("lca error worked values") {
  TaxonomyGraph g = chain_and_fork();
  CHECK(lca_error(g, "b", "b") == 0.0);
  // Siblings: common ancestor a, one step above the true label.
  CHECK(lca_error(g, "d", "b") == 1.0);
  // Chain: predicting the root against true b costs the full depth of b.
  CHECK(lca_error(g, "root", "b") == 2.0);
}

TEST_CASE("set metrics worked values") {
  TaxonomyGraph g = chain_and_fork();

  SetMetrics eq = set_metrics(g, "b", "b");
  CHECK(eq.jaccard == 1.0);
  CHECK(eq.p_h == 1.0);
  CHECK(eq.r_h == 1.0);

  // b and c share only the root, which the default excludes.
  SetMetrics disjoint = set_metrics(g, "b", "c");
  CHECK(disjoint.jaccard == 0.0);
  CHECK(disjoint.p_h == 0.0);
  CHECK(disjoint.r_h == 0.0);

  SetMetrics with_root = set_metrics(g, "b", "c", true);
  // {root,a,b} vs {root,c}: intersection 1, union 4.
  CHECK(with_root.jaccard == doctest::Approx(0.25));
  CHECK(with_root.p_h == doctest::Approx(1.0 / 3.0));
  CHECK(with_root.r_h == doctest::Approx(0.5));

  // Sibling leaves under a: {a,b} vs {a,d}.
  SetMetrics sib = set_metrics(g, "b", "d");
  CHECK(sib.jaccard == doctest::Approx(1.0 / 3.0));
  CHECK(sib.p_h == 0.5);
  CHECK(sib.r_h == 0.5);
}

TEST_CASE("metric report composes the individual metrics") {
  TaxonomyGraph g = chain_and_fork();
  MetricReport r = metric_report(g, "d", "b");
  CHECK(r.tie == tie(g, "d", "b"));
  CHECK(r.lca == lca_error(g, "d", "b"));
  SetMetrics s = set_metrics(g, "d", "b");
  CHECK(r.jaccard == s.jaccard);
  CHECK(r.p_h == s.p_h);
  CHECK(r.r_h == s.r_h);
}

TEST_CASE("metrics agree with brute-force oracles on random trees") {
  Rng rng(1234);
  for (int tree = 0; tree < 10; ++tree) {
    std::size_t n = 2 + rng.index(60);
    OracleTree t(rng, n);
    for (int pair = 0; pair < 25; ++pair) {
      std::size_t a = rng.index(n), b = rng.index(n);
      CHECK(tie(t.graph, t.name(a), t.name(b)) ==
            static_cast<double>(t.bfs_distance(a, b)));
      CHECK(lca_error(t.graph, t.name(a), t.name(b)) ==
            static_cast<double>(t.bfs_distance(b, t.lca(a, b))));
      for (bool include_root : {false, true}) {
        SetMetrics got = set_metrics(t.graph, t.name(a), t.name(b), include_root);
        SetMetrics want = t.sets(a, b, include_root);
        CHECK(got.jaccard == want.jaccard);
        CHECK(got.p_h == want.p_h);
        CHECK(got.r_h == want.r_h);
        CHECK(got.jaccard <= std::min(got.p_h, got.r_h) + 1e-15);
      }
    }
  }
}

TEST_CASE("classification picks the nearest class, ties to the lower id") {
  Curvature one(1.0);
  std::vector<HyperPoint> classes = {make_point({1.0, 0.0}, one),
                                     make_point({0.0, 1.0}, one),
                                     make_point({0.0, 1.0}, one)};
  CHECK(classify(classes[0], classes) == 0);
  // Equidistant duplicate classes resolve to the lower id.
  CHECK(classify(make_point({0.0, 0.9}, one), classes) == 1);
  CHECK_THROWS_AS(classify(classes[0], std::vector<HyperPoint>{}),
                  contract_violation);
}

TEST_CASE("retrieval returns ascending unique ids with self first") {
  Rng rng(77);
  Curvature one(1.0);
  std::vector<HyperPoint> gallery;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> s = {rng.normal(), rng.normal(), rng.normal()};
    gallery.push_back(make_point(s, one));
  }

  // A gallery member retrieves itself first.
  auto ids = retrieve_topk(gallery[13], gallery, 5);
  REQUIRE(ids.size() == 5);
  CHECK(ids[0] == 13);

  // k = size returns a permutation in ascending distance order.
  HyperPoint q = make_point({0.2, -0.4, 0.1}, one);
  auto all = retrieve_topk(q, gallery, gallery.size());
  std::set<std::size_t> uniq(all.begin(), all.end());
  CHECK(uniq.size() == gallery.size());
  for (std::size_t i = 1; i < all.size(); ++i)
    CHECK(geodesic_distance(q, gallery[all[i - 1]]) <=
          geodesic_distance(q, gallery[all[i]]) + 1e-15);

  // Brute-force oracle: stable sort on (distance, id).
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < gallery.size(); ++i)
    scored.emplace_back(geodesic_distance(q, gallery[i]), i);
  std::sort(scored.begin(), scored.end());
  auto topk = retrieve_topk(q, gallery, 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(topk[i] == scored[i].second);

  CHECK_THROWS_AS(retrieve_topk(q, gallery, gallery.size() + 1),
                  contract_violation);
}

TEST_CASE("retrieval breaks exact ties by lower id") {
  Curvature one(1.0);
  std::vector<HyperPoint> gallery = {make_point({1.0, 0.0}, one),
                                     make_point({0.5, 0.5}, one),
                                     make_point({1.0, 0.0}, one)};
  auto ids = retrieve_topk(make_point({1.0, 0.0}, one), gallery, 3);
  CHECK(ids[0] == 0);
  CHECK(ids[1] == 2);
  CHECK(ids[2] == 1);
}

TEST_CASE("class prompts average in the tangent space") {
  net::EncoderConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dims = {6};
  cfg.embed_dim = 3;
  model::EmbeddingModel m = model::make_model(cfg, cfg, 5);

  std::vector<double> x = {0.2, -0.1, 0.4, 0.9};
  std::vector<std::vector<std::vector<double>>> prompts = {{x}, {x, x}};
  auto classes = embed_class_prompts(m, prompts);
  REQUIRE(classes.size() == 2);

  // One prompt (or identical prompts) reduces to the plain text embedding.
  HyperPoint direct = model::project_text_raw(m, model::encode_text_raw(m, x));
  CHECK(geodesic_distance(classes[0], direct) <= 1e-12);
  CHECK(geodesic_distance(classes[1], direct) <= 1e-12);

  CHECK_THROWS_AS(
      embed_class_prompts(m, std::vector<std::vector<std::vector<double>>>{}),
      contract_violation);
  CHECK_THROWS_AS(embed_class_prompts(
                      m, std::vector<std::vector<std::vector<double>>>{{}}),
                  contract_violation);
}

TEST_CASE("zero-shot classification composes embed and classify") {
  net::EncoderConfig cfg;
  cfg.input_dim = 4;
  cfg.embed_dim = 3;
  model::EmbeddingModel m = model::make_model(cfg, cfg, 9);

  Rng rng(21);
  std::vector<std::vector<std::vector<double>>> prompts(3);
  for (auto& cls : prompts)
    for (int p = 0; p < 2; ++p) {
      std::vector<double> v(4);
      for (auto& x : v) x = rng.normal();
      cls.push_back(v);
    }
  std::vector<double> img = {0.3, 0.1, -0.2, 0.5};

  auto classes = embed_class_prompts(m, prompts);
  std::size_t want = classify(model::embed_image(m, img), classes);
  CHECK(zero_shot_classify(m, prompts, img) == want);
}

TEST_CASE("radius histogram buckets geodesic distances per role") {
  Curvature one(1.0);
  RoleEmbeddings roles;
  // img points at distances 1 and 3 from the origin.
  roles.img = {make_point({std::sinh(1.0), 0.0}, one),
               make_point({std::sinh(3.0), 0.0}, one)};
  // txt at the origin.
  roles.txt = {origin(one, 2)};
  roles.img_box = {make_point({std::sinh(2.0), 0.0}, one)};
  roles.txt_box = {};

  std::vector<double> edges = {0.0, 2.0, 4.0};
  RadiusReport rep = radius_histogram(roles, edges);
  CHECK(rep.edges == edges);
  CHECK(rep.counts[0] == std::vector<std::size_t>{1, 1});
  CHECK(rep.counts[1] == std::vector<std::size_t>{1, 0});
  CHECK(rep.counts[2] == std::vector<std::size_t>{0, 1});
  CHECK(rep.counts[3] == std::vector<std::size_t>{0, 0});
  CHECK(rep.means[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rep.means[1] == doctest::Approx(0.0));
  CHECK(rep.means[3] == 0.0);
}
