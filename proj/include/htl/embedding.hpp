#ifndef HTL_EMBEDDING_HPP_
#define HTL_EMBEDDING_HPP_

#include "htl/common.hpp"

namespace htl {

inline constexpr double kNormEpsilon = 1e-12;

/// Projects v onto the unit sphere. Throws DegenerateActivation when ||v|| < kNormEpsilon.
Vector l2_normalize(const Eigen::Ref<const Vector>& v);

/// Row-wise l2_normalize.
Matrix l2_normalize_rows(const Matrix& x);

/// ||u - v||^2. Throws on dimension mismatch.
double squared_distance(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

/// Symmetric matrix of squared distances between the rows of x, zero diagonal.
Eigen::MatrixXd pairwise_squared_distances(const Matrix& x);

}  // namespace htl

#endif  // HTL_EMBEDDING_HPP_
