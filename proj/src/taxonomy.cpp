#include "hycone/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

namespace hycone::hiereval {

TaxonomyGraph::TaxonomyGraph(const std::string& root_label) { add_node(root_label); }

TaxonomyGraph::NodeIdx TaxonomyGraph::add_node(const std::string& label) {
  auto it = index_.find(label);
  if (it != index_.end()) return it->second;
  NodeIdx n = static_cast<NodeIdx>(labels_.size());
  labels_.push_back(label);
  index_.emplace(label, n);
  children_.emplace_back();
  parents_.emplace_back();
  return n;
}

void TaxonomyGraph::add_edge(const std::string& parent, const std::string& child,
                             double weight) {
  if (!(weight > 0.0)) throw data_error("taxonomy edge weight must be > 0");
  NodeIdx p = add_node(parent);
  NodeIdx c = add_node(child);
  children_[p].push_back({c, weight});
  parents_[c].push_back({p, weight});
}

bool TaxonomyGraph::contains(const std::string& label) const {
  return index_.count(label) > 0;
}

TaxonomyGraph::NodeIdx TaxonomyGraph::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw data_error("unknown taxonomy label: " + label);
  return it->second;
}

const std::string& TaxonomyGraph::label(NodeIdx n) const {
  check_index(n);
  return labels_[n];
}

const std::vector<TaxonomyGraph::Adj>& TaxonomyGraph::children(NodeIdx n) const {
  check_index(n);
  return children_[n];
}

const std::vector<TaxonomyGraph::Adj>& TaxonomyGraph::parents(NodeIdx n) const {
  check_index(n);
  return parents_[n];
}

void TaxonomyGraph::check_index(NodeIdx n) const {
  if (n >= labels_.size()) throw contract_violation("taxonomy node index out of range");
}

void TaxonomyGraph::validate() const {
  std::size_t n = node_count();
  // Reachability from the root along directed edges.
  std::vector<char> seen(n, 0);
  std::vector<NodeIdx> stack = {root()};
  seen[root()] = 1;
  while (!stack.empty()) {
    NodeIdx cur = stack.back();
    stack.pop_back();
    for (const Adj& e : children_[cur]) {
      if (!seen[e.to]) {
        seen[e.to] = 1;
        stack.push_back(e.to);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw data_error("taxonomy node unreachable from root: " + labels_[i]);
  // Cycle check: iterative three-color DFS.
  std::vector<char> color(n, 0);  // 0 white, 1 gray, 2 black
  for (std::size_t start = 0; start < n; ++start) {
    if (color[start] != 0) continue;
    std::vector<std::pair<NodeIdx, std::size_t>> path = {{static_cast<NodeIdx>(start), 0}};
    color[start] = 1;
    while (!path.empty()) {
      auto& [cur, next] = path.back();
      if (next < children_[cur].size()) {
        NodeIdx to = children_[cur][next++].to;
        if (color[to] == 1) throw data_error("taxonomy contains a cycle at: " + labels_[to]);
        if (color[to] == 0) {
          color[to] = 1;
          path.push_back({to, 0});
        }
      } else {
        color[cur] = 2;
        path.pop_back();
      }
    }
  }
}

double TaxonomyGraph::path_distance(NodeIdx a, NodeIdx b) const {
  check_index(a);
  check_index(b);
  if (a == b) return 0.0;
  // Dijkstra over the undirected view.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(node_count(), kInf);
  using Entry = std::pair<double, NodeIdx>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  dist[a] = 0.0;
  heap.push({0.0, a});
  while (!heap.empty()) {
    auto [d, cur] = heap.top();
    heap.pop();
    if (d > dist[cur]) continue;
    if (cur == b) return d;
    auto relax = [&](const Adj& e) {
      double nd = d + e.weight;
      if (nd < dist[e.to]) {
        dist[e.to] = nd;
        heap.push({nd, e.to});
      }
    };
    for (const Adj& e : children_[cur]) relax(e);
    for (const Adj& e : parents_[cur]) relax(e);
  }
  throw data_error("taxonomy labels are not connected: " + labels_[a] + ", " + labels_[b]);
}

std::vector<TaxonomyGraph::NodeIdx> TaxonomyGraph::ancestors(NodeIdx n) const {
  check_index(n);
  std::vector<char> seen(node_count(), 0);
  std::vector<NodeIdx> stack = {n}, out;
  seen[n] = 1;
  while (!stack.empty()) {
    NodeIdx cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    for (const Adj& e : parents_[cur]) {
      if (!seen[e.to]) {
        seen[e.to] = 1;
        stack.push_back(e.to);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double TaxonomyGraph::depth(NodeIdx n) const {
  check_index(n);
  // Longest directed root->n path; memoized over the ancestor closure.
  std::vector<double> memo(node_count(), std::numeric_limits<double>::quiet_NaN());
  memo[root()] = 0.0;
  std::vector<NodeIdx> order = ancestors(n);
  // Ancestor sets are closed under parents, so repeated sweeps settle in at
  // most |order| rounds; taxonomy sizes keep this cheap.
  bool changed = true;
  while (changed) {
    changed = false;
    for (NodeIdx cur : order) {
      if (cur == root()) continue;
      double best = std::numeric_limits<double>::quiet_NaN();
      for (const Adj& e : parents_[cur]) {
        if (std::isnan(memo[e.to])) continue;
        double cand = memo[e.to] + e.weight;
        if (std::isnan(best) || cand > best) best = cand;
      }
      if (!std::isnan(best) && (std::isnan(memo[cur]) || best > memo[cur])) {
        memo[cur] = best;
        changed = true;
      }
    }
  }
  if (std::isnan(memo[n]))
    throw data_error("taxonomy node has no root path: " + labels_[n]);
  return memo[n];
}

TaxonomyGraph::NodeIdx TaxonomyGraph::lowest_common_ancestor(NodeIdx a, NodeIdx b) const {
  std::vector<NodeIdx> aa = ancestors(a), bb = ancestors(b);
  std::vector<NodeIdx> common;
  std::set_intersection(aa.begin(), aa.end(), bb.begin(), bb.end(),
                        std::back_inserter(common));
  // Root is an ancestor of everything, so common is never empty.
  NodeIdx best = common.front();
  double best_depth = depth(best);
  for (NodeIdx c : common) {
    double d = depth(c);
    if (d > best_depth) {
      best = c;
      best_depth = d;
    }
  }
  return best;
}

TaxonomyGraph TaxonomyGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open taxonomy file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw data_error("taxonomy file missing root line: " + path.string());
  TaxonomyGraph g(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string parent, child, weight_str;
    if (!std::getline(fields, parent, '\t') || !std::getline(fields, child, '\t'))
      throw data_error("taxonomy line " + std::to_string(lineno) +
                       ": expected parent<TAB>child");
    double weight = 1.0;
    if (std::getline(fields, weight_str, '\t')) {
      try {
        weight = std::stod(weight_str);
      } catch (const std::exception&) {
        throw data_error("taxonomy line " + std::to_string(lineno) + ": bad weight \"" +
                         weight_str + "\"");
      }
    }
    try {
      g.add_edge(parent, child, weight);
    } catch (const data_error& e) {
      throw data_error("taxonomy line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  g.validate();
  return g;
}

void TaxonomyGraph::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write taxonomy file: " + path.string());
  out << labels_[root()] << "\n";
  out.precision(17);
  for (std::size_t p = 0; p < children_.size(); ++p)
    for (const Adj& e : children_[p])
      out << labels_[p] << "\t" << labels_[e.to] << "\t" << e.weight << "\n";
  if (!out) throw io_error("failed writing taxonomy file: " + path.string());
}

}  // namespace hycone::hiereval
