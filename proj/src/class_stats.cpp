#include "htl/class_stats.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace htl {

namespace {

// Embeddings are unit norm, so the mean of |r_i - r_j|^2 over i in p, j in q
// collapses to 2 - 2 mu_p . mu_q with mu the class means.
Matrix class_means(const Matrix& embeddings, std::span<const int> labels,
                   const std::vector<int>& counts) {
  Matrix means = Matrix::Zero(static_cast<Eigen::Index>(counts.size()), embeddings.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    means.row(labels[i]) += embeddings.row(static_cast<Eigen::Index>(i));
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    means.row(static_cast<Eigen::Index>(c)) /= counts[c];
  }
  return means;
}

void check_inputs(const Matrix& embeddings, std::span<const int> labels) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) {
    throw Error(fmt::format("{} embeddings but {} labels", embeddings.rows(), labels.size()));
  }
}

}  // namespace

std::vector<int> count_classes(std::span<const int> labels) {
  if (labels.empty()) throw Error("no samples: the class id range is empty");
  const int max_label = *std::max_element(labels.begin(), labels.end());
  std::vector<int> counts(static_cast<std::size_t>(max_label) + 1, 0);
  for (int y : labels) {
    if (y < 0) throw Error(fmt::format("negative class id {}", y));
    ++counts[y];
  }
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) throw Error(fmt::format("class {} has no samples", c));
  }
  return counts;
}

Eigen::MatrixXd interclass_distance_matrix(const Matrix& embeddings, std::span<const int> labels) {
  check_inputs(embeddings, labels);
  const auto counts = count_classes(labels);
  const Matrix means = class_means(embeddings, labels, counts);
  const auto num = static_cast<Eigen::Index>(counts.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(num, num);
  for (Eigen::Index p = 0; p < num; ++p) {
    for (Eigen::Index q = p + 1; q < num; ++q) {
      const double d = std::clamp(2.0 - 2.0 * means.row(p).dot(means.row(q)), 0.0, 4.0);
      out(p, q) = d;
      out(q, p) = d;
    }
  }
  return out;
}

std::vector<double> intraclass_averages(const Matrix& embeddings, std::span<const int> labels) {
  check_inputs(embeddings, labels);
  const auto counts = count_classes(labels);
  const Matrix means = class_means(embeddings, labels, counts);
  std::vector<double> intra(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double n = counts[c];
    if (counts[c] < 2) continue;
    // sum over all ordered pairs (i, j) of |r_i - r_j|^2 = 2 n^2 (1 - |mu|^2); i == j adds 0.
    const double mean_sq = means.row(static_cast<Eigen::Index>(c)).squaredNorm();
    intra[c] = std::clamp(2.0 * n * (1.0 - mean_sq) / (n - 1.0), 0.0, 4.0);
  }
  return intra;
}

double global_inner_distance(std::span<const double> intra, std::span<const int> class_counts) {
  if (intra.size() != class_counts.size()) {
    throw Error("intra-class averages and class counts differ in length");
  }
  double sum = 0.0;
  int used = 0;
  for (std::size_t c = 0; c < intra.size(); ++c) {
    if (class_counts[c] >= 2) {
      sum += intra[c];
      ++used;
    }
  }
  if (used == 0) {
    throw Error("every class is a singleton; the average inner distance is undefined");
  }
  return sum / used;
}

ClassStats compute_class_stats(const Matrix& embeddings, std::span<const int> labels) {
  ClassStats stats;
  stats.class_counts = count_classes(labels);
  stats.num_classes = static_cast<int>(stats.class_counts.size());
  stats.interclass = interclass_distance_matrix(embeddings, labels);
  stats.intra = intraclass_averages(embeddings, labels);
  stats.d0 = global_inner_distance(stats.intra, stats.class_counts);
  return stats;
}

}  // namespace htl
