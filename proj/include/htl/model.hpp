#ifndef HTL_MODEL_HPP_
#define HTL_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "htl/common.hpp"

namespace htl {

/// Gradients with the same shapes as MlpEmbedder's parameters.
struct ParamGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Vector> biases;
};

/// Intermediate values of a forward pass, needed by backward().
struct ForwardCache {
  // activations[0] is the input batch; activations[l + 1] is the output of layer l
  // (after the rectifier for hidden layers, the raw linear output for the last one).
  std::vector<Matrix> activations;
  // Pre-activation of each hidden layer, used for the rectifier mask.
  std::vector<Matrix> pre_activations;
  // Row norms of the last linear output before normalization.
  Vector output_norms;
  Matrix embeddings;
};

/// Multi-layer perceptron with rectifier hidden layers and an L2-normalized output.
///
/// Weight matrix l has shape (layer_dims[l+1], layer_dims[l]); inputs are rows of a batch.
class MlpEmbedder {
 public:
  /// Weights drawn from N(0, 2 / fan_in), biases zero.
  MlpEmbedder(std::vector<int> layer_dims, std::uint64_t seed);
  MlpEmbedder(std::vector<int> layer_dims, std::vector<Eigen::MatrixXd> weights,
              std::vector<Vector> biases);

  const std::vector<int>& layer_dims() const { return layer_dims_; }
  int input_dim() const { return layer_dims_.front(); }
  int output_dim() const { return layer_dims_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }

  const Eigen::MatrixXd& weight(int layer) const { return weights_.at(layer); }
  const Vector& bias(int layer) const { return biases_.at(layer); }
  Eigen::MatrixXd& weight(int layer) { return weights_.at(layer); }
  Vector& bias(int layer) { return biases_.at(layer); }

  std::pair<Matrix, ForwardCache> forward(const Matrix& batch) const;

  /// Embeddings only; same result as forward().first.
  Matrix embed(const Matrix& batch) const;

  /// Gradient of a scalar loss with respect to every parameter, given dLoss/dEmbedding.
  ParamGradients backward(const ForwardCache& cache, const Matrix& grad_embeddings) const;

  /// p <- p - lr * grad(p). Leaves the model untouched and throws if any gradient is non-finite.
  void sgd_step(const ParamGradients& grads, double lr);

  ParamGradients zero_gradients() const;

  bool operator==(const MlpEmbedder& other) const;

 private:
  void validate() const;

  std::vector<int> layer_dims_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Vector> biases_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint; layout documented in docs/checkpoint_format.md.
void save_checkpoint(const MlpEmbedder& model, const std::filesystem::path& path);
MlpEmbedder load_checkpoint(const std::filesystem::path& path);

}  // namespace htl

#endif  // HTL_MODEL_HPP_
