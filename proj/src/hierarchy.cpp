#include "htl/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace htl {

namespace {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Keeps the smaller id as root so roots are canonical node ids.
  void merge(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

std::vector<double> level_thresholds(double d0, int depth) {
  if (depth < 1) throw Error(fmt::format("tree depth must be at least 1, got {}", depth));
  if (!(d0 >= 0.0) || !(d0 < kMaxSquaredDistance)) {
    throw Error(fmt::format("average inner distance {} must lie in [0, 4)", d0));
  }
  std::vector<double> out(static_cast<std::size_t>(depth) + 1);
  for (int l = 0; l <= depth; ++l) {
    out[l] = l * (kMaxSquaredDistance - d0) / depth + d0;
  }
  out.back() = kMaxSquaredDistance;
  return out;
}

HierarchicalTree::HierarchicalTree(std::vector<double> thresholds,
                                   std::vector<std::vector<int>> membership)
    : thresholds_(std::move(thresholds)), membership_(std::move(membership)) {
  if (thresholds_.size() < 2) throw Error("a tree needs at least levels 0 and 1");
  if (membership_.size() != thresholds_.size()) {
    throw Error("one membership list per level is required");
  }
  const std::size_t num = membership_.front().size();
  if (num == 0) throw Error("a tree needs at least one class");
  for (std::size_t l = 0; l < membership_.size(); ++l) {
    if (l > 0 && !(thresholds_[l] > thresholds_[l - 1])) {
      throw Error("tree thresholds must be strictly increasing");
    }
    const auto& level = membership_[l];
    if (level.size() != num) throw Error(fmt::format("level {} has the wrong class count", l));
    for (std::size_t c = 0; c < num; ++c) {
      const int node = level[c];
      if (node < 0 || static_cast<std::size_t>(node) > c || level[node] != node) {
        throw Error(fmt::format("level {}: node id of class {} is not canonical", l, c));
      }
      if (l > 0 && membership_[l][membership_[l - 1][c]] != node) {
        throw Error(fmt::format("level {} does not nest level {}", l, l - 1));
      }
    }
  }
  const int unmerged = static_cast<int>(membership_.size());
  merge_levels_.assign(num, std::vector<int>(num, unmerged));
  for (std::size_t p = 0; p < num; ++p) {
    for (std::size_t q = 0; q < num; ++q) {
      for (std::size_t l = 0; l < membership_.size(); ++l) {
        if (membership_[l][p] == membership_[l][q]) {
          merge_levels_[p][q] = static_cast<int>(l);
          break;
        }
      }
    }
  }
}

int HierarchicalTree::node_of(int level, int cls) const {
  if (!contains(cls)) throw Error(fmt::format("class {} is not in the tree", cls));
  return membership_.at(level)[cls];
}

int HierarchicalTree::node_count(int level) const {
  const auto& m = membership_.at(level);
  int n = 0;
  for (std::size_t c = 0; c < m.size(); ++c) {
    if (m[c] == static_cast<int>(c)) ++n;
  }
  return n;
}

std::vector<int> HierarchicalTree::node_counts() const {
  std::vector<int> out;
  for (int l = 0; l <= depth(); ++l) out.push_back(node_count(l));
  return out;
}

int HierarchicalTree::merge_level(int p, int q) const {
  if (!contains(p) || !contains(q)) {
    throw Error(fmt::format("class pair ({}, {}) is not in the tree", p, q));
  }
  if (p == q) throw Error(fmt::format("merge level of class {} with itself is undefined", p));
  return merge_levels_[p][q];
}

double HierarchicalTree::merge_threshold(int p, int q) const {
  const int level = merge_level(p, q);
  return level > depth() ? kMaxSquaredDistance : thresholds_[level];
}

HierarchicalTree build_tree(const Eigen::MatrixXd& interclass, double d0, int depth) {
  const Eigen::Index num = interclass.rows();
  if (num == 0 || interclass.cols() != num) throw Error("interclass matrix must be square");
  struct Edge {
    double dist;
    int p, q;
  };
  std::vector<Edge> edges;
  for (Eigen::Index p = 0; p < num; ++p) {
    for (Eigen::Index q = p + 1; q < num; ++q) {
      const double d = interclass(p, q);
      if (std::abs(d - interclass(q, p)) > 1e-12) {
        throw Error(fmt::format("interclass matrix is not symmetric at ({}, {})", p, q));
      }
      if (!(d >= 0.0 && d <= kMaxSquaredDistance)) {
        throw Error(fmt::format("interclass distance {} at ({}, {}) is outside [0, 4]", d, p, q));
      }
      edges.push_back({d, static_cast<int>(p), static_cast<int>(q)});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.dist, a.p, a.q) < std::tie(b.dist, b.p, b.q);
  });

  auto thresholds = level_thresholds(d0, depth);
  UnionFind sets(static_cast<int>(num));
  std::vector<std::vector<int>> membership;
  std::size_t next = 0;
  for (double threshold : thresholds) {
    while (next < edges.size() && edges[next].dist < threshold) {
      sets.merge(edges[next].p, edges[next].q);
      ++next;
    }
    std::vector<int> level(static_cast<std::size_t>(num));
    for (int c = 0; c < num; ++c) level[c] = sets.find(c);
    membership.push_back(std::move(level));
  }
  return HierarchicalTree(std::move(thresholds), std::move(membership));
}

double dynamic_margin(const HierarchicalTree& tree, const ClassStats& stats, int anchor_class,
                      int negative_class, double beta) {
  if (anchor_class < 0 || static_cast<std::size_t>(anchor_class) >= stats.intra.size()) {
    throw Error(fmt::format("class {} has no intra-class statistics", anchor_class));
  }
  return beta + tree.merge_threshold(anchor_class, negative_class) - stats.intra[anchor_class];
}

void write_tree(std::ostream& out, const HierarchicalTree& tree) {
  fmt::print(out, "htl-tree 1\n");
  fmt::print(out, "classes {}\n", tree.num_classes());
  fmt::print(out, "depth {}\n", tree.depth());
  for (int l = 0; l <= tree.depth(); ++l) {
    fmt::print(out, "level {} threshold {:.17g} nodes {} members", l, tree.thresholds()[l],
               tree.node_count(l));
    for (int node : tree.membership(l)) fmt::print(out, " {}", node);
    fmt::print(out, "\n");
  }
}

HierarchicalTree read_tree(std::istream& in) {
  auto expect = [](std::istream& s, const std::string& word) {
    std::string got;
    if (!(s >> got) || got != word) {
      throw Error(fmt::format("malformed tree dump: expected '{}', got '{}'", word, got));
    }
  };
  int version = 0, num = 0, depth = 0;
  expect(in, "htl-tree");
  in >> version;
  if (version != 1) throw Error(fmt::format("unsupported tree dump version {}", version));
  expect(in, "classes");
  in >> num;
  expect(in, "depth");
  in >> depth;
  if (!in || num <= 0 || depth < 1) throw Error("malformed tree dump header");
  std::vector<double> thresholds;
  std::vector<std::vector<int>> membership;
  for (int l = 0; l <= depth; ++l) {
    int level = -1, nodes = 0;
    std::string threshold;
    expect(in, "level");
    in >> level;
    expect(in, "threshold");
    in >> threshold;
    expect(in, "nodes");
    in >> nodes;
    expect(in, "members");
    if (!in || level != l) throw Error(fmt::format("malformed tree dump at level {}", l));
    thresholds.push_back(std::stod(threshold));
    std::vector<int> members(static_cast<std::size_t>(num));
    for (int& m : members) {
      if (!(in >> m)) throw Error(fmt::format("truncated membership at level {}", l));
    }
    membership.push_back(std::move(members));
    if (static_cast<int>(std::count_if(membership.back().begin(), membership.back().end(),
                                       [&, c = 0](int node) mutable { return node == c++; })) !=
        nodes) {
      throw Error(fmt::format("node count mismatch at level {}", l));
    }
  }
  return HierarchicalTree(std::move(thresholds), std::move(membership));
}

void write_class_stats(std::ostream& out, const ClassStats& stats) {
  fmt::print(out, "class,count,intra");
  for (int q = 0; q < stats.num_classes; ++q) fmt::print(out, ",d{}", q);
  fmt::print(out, "\n");
  for (int p = 0; p < stats.num_classes; ++p) {
    fmt::print(out, "{},{},{:.17g}", p, stats.class_counts[p], stats.intra[p]);
    for (int q = 0; q < stats.num_classes; ++q) fmt::print(out, ",{:.17g}", stats.interclass(p, q));
    fmt::print(out, "\n");
  }
  fmt::print(out, "# d0,{:.17g}\n", stats.d0);
}

}  // namespace htl
