#ifndef HTL_COMMON_HPP_
#define HTL_COMMON_HPP_

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace htl {

// Sample-major storage: one row per sample, one column per feature.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a vector to be projected onto the unit sphere has (near) zero norm.
class DegenerateActivation : public Error {
 public:
  using Error::Error;
};

}  // namespace htl

#endif  // HTL_COMMON_HPP_
