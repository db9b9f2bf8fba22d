#include "htl/embedding.hpp"

#include <fmt/format.h>

namespace htl {

Vector l2_normalize(const Eigen::Ref<const Vector>& v) {
  const double norm = v.norm();
  if (!(norm >= kNormEpsilon)) {
    throw DegenerateActivation(fmt::format("cannot normalize vector with norm {}", norm));
  }
  return v / norm;
}

Matrix l2_normalize_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.row(i) = l2_normalize(x.row(i).transpose()).transpose();
  }
  return out;
}

double squared_distance(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  if (u.size() != v.size()) {
    throw Error(fmt::format("dimension mismatch: {} vs {}", u.size(), v.size()));
  }
  return (u - v).squaredNorm();
}

Eigen::MatrixXd pairwise_squared_distances(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (x.row(i) - x.row(j)).squaredNorm();
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

}  // namespace htl
