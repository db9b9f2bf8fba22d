#ifndef HTL_CLASS_STATS_HPP_
#define HTL_CLASS_STATS_HPP_

#include <span>
#include <vector>

#include "htl/common.hpp"

namespace htl {

/// Class-level distance statistics over unit-norm embeddings.
///
/// interclass(p, q) is the mean squared distance between samples of p and q; the
/// diagonal is zero and never used. intra[c] is the mean squared distance between
/// distinct samples of c (0 for singleton classes). d0 averages intra over classes
/// with at least two samples.
struct ClassStats {
  int num_classes = 0;
  std::vector<int> class_counts;
  Eigen::MatrixXd interclass;
  std::vector<double> intra;
  double d0 = 0.0;
};

/// Number of samples per class. Labels must lie in [0, C) and every class must be non-empty.
std::vector<int> count_classes(std::span<const int> labels);

Eigen::MatrixXd interclass_distance_matrix(const Matrix& embeddings, std::span<const int> labels);

std::vector<double> intraclass_averages(const Matrix& embeddings, std::span<const int> labels);

/// Throws when no class has two or more samples.
double global_inner_distance(std::span<const double> intra, std::span<const int> class_counts);

ClassStats compute_class_stats(const Matrix& embeddings, std::span<const int> labels);

}  // namespace htl

#endif  // HTL_CLASS_STATS_HPP_
