#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hycone/common.hpp"
#include "hycone/taxonomy.hpp"

using namespace hycone;
using namespace hycone::hiereval;
namespace fs = std::filesystem;

namespace {

// root -> a, b; a -> c, d
TaxonomyGraph small_tree() {
  TaxonomyGraph g("root");
  g.add_edge("root", "a");
  g.add_edge("root", "b");
  g.add_edge("a", "c");
  g.add_edge("a", "d");
  g.validate();
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("labels intern to stable indices") {
  TaxonomyGraph g = small_tree();
  CHECK(g.node_count() == 5);
  CHECK(g.root() == 0);
  CHECK(g.label(g.root()) == "root");
  CHECK(g.contains("c"));
  CHECK_FALSE(g.contains("z"));
  CHECK(g.index_of("a") == g.index_of("a"));
  CHECK_THROWS_AS(g.index_of("z"), data_error);
  // Re-adding an existing label returns the same index.
  CHECK(g.add_node("a") == g.index_of("a"));
}

TEST_CASE("edges with non-positive weight are rejected") {
  TaxonomyGraph g("root");
  CHECK_THROWS_AS(g.add_edge("root", "x", 0.0), data_error);
  CHECK_THROWS_AS(g.add_edge("root", "x", -2.0), data_error);
}

TEST_CASE("validate rejects unreachable nodes and cycles") {
  {
    TaxonomyGraph g("root");
    g.add_edge("root", "a");
    g.add_node("orphan");
    CHECK_THROWS_AS(g.validate(), data_error);
  }
  {
    TaxonomyGraph g("root");
    g.add_edge("root", "a");
    g.add_edge("a", "b");
    g.add_edge("b", "a");
    CHECK_THROWS_AS(g.validate(), data_error);
  }
  small_tree().validate();
}

TEST_CASE("path distance sums edge weights on the shortest route") {
  TaxonomyGraph g = small_tree();
  auto c = g.index_of("c"), d = g.index_of("d"), b = g.index_of("b");
  CHECK(g.path_distance(c, c) == 0.0);
  CHECK(g.path_distance(c, d) == 2.0);  // siblings via their parent
  CHECK(g.path_distance(g.root(), c) == 2.0);
  CHECK(g.path_distance(c, b) == 3.0);

  TaxonomyGraph w("root");
  w.add_edge("root", "a", 0.5);
  w.add_edge("a", "b", 2.0);
  CHECK(w.path_distance(w.root(), w.index_of("b")) == 2.5);
}

TEST_CASE("depth is the weighted distance down from the root") {
  TaxonomyGraph g = small_tree();
  CHECK(g.depth(g.root()) == 0.0);
  CHECK(g.depth(g.index_of("a")) == 1.0);
  CHECK(g.depth(g.index_of("c")) == 2.0);

  // In a DAG the depth is the longest directed path from the root.
  TaxonomyGraph dag("root");
  dag.add_edge("root", "a");
  dag.add_edge("root", "c");
  dag.add_edge("a", "c");
  dag.validate();
  CHECK(dag.depth(dag.index_of("c")) == 2.0);
}

TEST_CASE("ancestors include the node and stop at the root") {
  TaxonomyGraph g = small_tree();
  auto anc = g.ancestors(g.index_of("c"));
  std::vector<TaxonomyGraph::NodeIdx> want = {g.root(), g.index_of("a"),
                                              g.index_of("c")};
  std::sort(anc.begin(), anc.end());
  std::sort(want.begin(), want.end());
  CHECK(anc == want);

  auto root_anc = g.ancestors(g.root());
  CHECK(root_anc == std::vector<TaxonomyGraph::NodeIdx>{g.root()});
}

TEST_CASE("lowest common ancestor picks the deepest shared node") {
  TaxonomyGraph g = small_tree();
  CHECK(g.lowest_common_ancestor(g.index_of("c"), g.index_of("d")) ==
        g.index_of("a"));
  CHECK(g.lowest_common_ancestor(g.index_of("c"), g.index_of("b")) == g.root());
  CHECK(g.lowest_common_ancestor(g.root(), g.index_of("c")) == g.root());
  CHECK(g.lowest_common_ancestor(g.index_of("d"), g.index_of("d")) ==
        g.index_of("d"));
}

TEST_CASE("save and load round-trip byte for byte") {
  TaxonomyGraph g = small_tree();
  fs::path p1 = fs::temp_directory_path() / "hycone_tax_rt1.tsv";
  fs::path p2 = fs::temp_directory_path() / "hycone_tax_rt2.tsv";
  g.save(p1);
  TaxonomyGraph h = TaxonomyGraph::load(p1);
  CHECK(h.node_count() == g.node_count());
  CHECK(h.path_distance(h.index_of("c"), h.index_of("b")) == 3.0);
  h.save(p2);
  CHECK(slurp(p1) == slurp(p2));
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("load rejects malformed files with a line number") {
  fs::path p = fs::temp_directory_path() / "hycone_tax_bad.tsv";
  {
    std::ofstream out(p);
    out << "root\n";
    out << "root\ta\n";
    out << "just-one-field\n";
  }
  try {
    TaxonomyGraph::load(p);
    CHECK(false);
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  fs::remove(p);
}

TEST_CASE("load validates connectivity") {
  fs::path p = fs::temp_directory_path() / "hycone_tax_cyc.tsv";
  {
    std::ofstream out(p);
    out << "root\n";
    out << "root\ta\n";
    out << "a\tb\n";
    out << "b\ta\n";
  }
  CHECK_THROWS_AS(TaxonomyGraph::load(p), data_error);
  fs::remove(p);
}
