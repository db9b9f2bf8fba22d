#ifndef HTL_HIERARCHY_HPP_
#define HTL_HIERARCHY_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include "htl/class_stats.hpp"
#include "htl/common.hpp"

namespace htl {

inline constexpr double kMaxSquaredDistance = 4.0;
inline constexpr double kDefaultBeta = 0.1;
inline constexpr int kDefaultTreeDepth = 16;

/// Merge thresholds d_l = l (4 - d0) / L + d0 for l = 0..L, with d_L pinned to 4.
std::vector<double> level_thresholds(double d0, int depth);

/// Class-level hierarchy with levels 0..L. At level l, classes whose interclass
/// distance is strictly below d_l are connected, and a node is a connected component.
/// Node ids are the smallest member class id.
class HierarchicalTree {
 public:
  HierarchicalTree(std::vector<double> thresholds, std::vector<std::vector<int>> membership);

  int depth() const { return static_cast<int>(thresholds_.size()) - 1; }
  int num_classes() const { return static_cast<int>(membership_.front().size()); }
  const std::vector<double>& thresholds() const { return thresholds_; }
  const std::vector<int>& membership(int level) const { return membership_.at(level); }
  int node_of(int level, int cls) const;
  int node_count(int level) const;
  std::vector<int> node_counts() const;

  bool contains(int cls) const { return cls >= 0 && cls < num_classes(); }

  /// Smallest level at which p and q share a node, or depth() + 1 when they never do.
  int merge_level(int p, int q) const;

  /// Threshold of merge_level(p, q); 4 for pairs that never merge.
  double merge_threshold(int p, int q) const;

  bool operator==(const HierarchicalTree& other) const = default;

 private:
  std::vector<double> thresholds_;
  std::vector<std::vector<int>> membership_;
  std::vector<std::vector<int>> merge_levels_;
};

HierarchicalTree build_tree(const Eigen::MatrixXd& interclass, double d0, int depth);

/// beta + d_{H(y_a, y_n)} - s_{y_a}. Not clamped.
double dynamic_margin(const HierarchicalTree& tree, const ClassStats& stats, int anchor_class,
                      int negative_class, double beta = kDefaultBeta);

/// Plain-text dump of thresholds, node counts and per-level membership.
void write_tree(std::ostream& out, const HierarchicalTree& tree);
HierarchicalTree read_tree(std::istream& in);

/// Distance matrix and intra-class averages as comma-delimited text.
void write_class_stats(std::ostream& out, const ClassStats& stats);

}  // namespace htl

#endif  // HTL_HIERARCHY_HPP_
