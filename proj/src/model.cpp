#include "htl/model.hpp"

#include "htl/embedding.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include <fmt/format.h>

namespace htl {

MlpEmbedder::MlpEmbedder(std::vector<int> layer_dims, std::uint64_t seed)
    : layer_dims_(std::move(layer_dims)) {
  if (layer_dims_.size() < 2) {
    throw Error("an MLP needs at least an input and an output dimension");
  }
  for (int d : layer_dims_) {
    if (d <= 0) throw Error(fmt::format("layer dimension must be positive, got {}", d));
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    const int fan_in = layer_dims_[l];
    const int fan_out = layer_dims_[l + 1];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = normal(rng);
    }
    weights_.push_back(std::move(w));
    biases_.push_back(Vector::Zero(fan_out));
  }
}

MlpEmbedder::MlpEmbedder(std::vector<int> layer_dims, std::vector<Eigen::MatrixXd> weights,
                         std::vector<Vector> biases)
    : layer_dims_(std::move(layer_dims)), weights_(std::move(weights)), biases_(std::move(biases)) {
  validate();
}

void MlpEmbedder::validate() const {
  if (layer_dims_.size() < 2) {
    throw Error("an MLP needs at least an input and an output dimension");
  }
  if (weights_.size() + 1 != layer_dims_.size() || biases_.size() != weights_.size()) {
    throw Error("parameter count does not match layer_dims");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rows() != layer_dims_[l + 1] || weights_[l].cols() != layer_dims_[l] ||
        biases_[l].size() != layer_dims_[l + 1]) {
      throw Error(fmt::format("layer {} parameter shape does not chain with layer_dims", l));
    }
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) {
      throw Error(fmt::format("layer {} has non-finite parameters", l));
    }
  }
}

std::pair<Matrix, ForwardCache> MlpEmbedder::forward(const Matrix& batch) const {
  if (batch.cols() != input_dim()) {
    throw Error(fmt::format("input dimension {} does not match model input {}", batch.cols(),
                            input_dim()));
  }
  ForwardCache cache;
  cache.activations.reserve(weights_.size() + 1);
  cache.activations.push_back(batch);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = cache.activations.back() * weights_[l].transpose();
    z.rowwise() += biases_[l].transpose();
    if (l + 1 < weights_.size()) {
      cache.pre_activations.push_back(z);
      cache.activations.push_back(z.cwiseMax(0.0));
    } else {
      cache.activations.push_back(std::move(z));
    }
  }
  const Matrix& raw = cache.activations.back();
  cache.output_norms = raw.rowwise().norm();
  cache.embeddings.resize(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double norm = cache.output_norms(i);
    if (!(norm >= kNormEpsilon)) {
      throw DegenerateActivation(
          fmt::format("sample {} has a zero embedding before normalization", i));
    }
    cache.embeddings.row(i) = raw.row(i) / norm;
  }
  Matrix out = cache.embeddings;
  return {std::move(out), std::move(cache)};
}

Matrix MlpEmbedder::embed(const Matrix& batch) const { return forward(batch).first; }

ParamGradients MlpEmbedder::backward(const ForwardCache& cache,
                                     const Matrix& grad_embeddings) const {
  if (cache.activations.size() != weights_.size() + 1 ||
      cache.pre_activations.size() + 1 != weights_.size()) {
    throw Error("forward cache does not belong to this model");
  }
  const Matrix& y = cache.embeddings;
  if (grad_embeddings.rows() != y.rows() || grad_embeddings.cols() != y.cols()) {
    throw Error(fmt::format("gradient shape {}x{} does not match embeddings {}x{}",
                            grad_embeddings.rows(), grad_embeddings.cols(), y.rows(), y.cols()));
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (cache.activations[l].cols() != layer_dims_[l]) {
      throw Error("forward cache does not belong to this model");
    }
  }

  // d(x/|x|)/dx = (I - y y^T) / |x|
  Matrix delta(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double along = grad_embeddings.row(i).dot(y.row(i));
    delta.row(i) = (grad_embeddings.row(i) - along * y.row(i)) / cache.output_norms(i);
  }

  ParamGradients grads;
  grads.weights.resize(weights_.size());
  grads.biases.resize(weights_.size());
  for (std::size_t l = weights_.size(); l-- > 0;) {
    grads.weights[l] = delta.transpose() * cache.activations[l];
    grads.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix upstream = delta * weights_[l];
    const Matrix& pre = cache.pre_activations[l - 1];
    delta = upstream.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  }
  return grads;
}

void MlpEmbedder::sgd_step(const ParamGradients& grads, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw Error(fmt::format("learning rate must be finite and non-negative, got {}", lr));
  }
  if (grads.weights.size() != weights_.size() || grads.biases.size() != biases_.size()) {
    throw Error("gradient layer count does not match the model");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (grads.weights[l].rows() != weights_[l].rows() ||
        grads.weights[l].cols() != weights_[l].cols() ||
        grads.biases[l].size() != biases_[l].size()) {
      throw Error(fmt::format("gradient shape mismatch at layer {}", l));
    }
    if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite()) {
      throw Error(fmt::format("non-finite gradient at layer {} (training diverged)", l));
    }
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] -= lr * grads.weights[l];
    biases_[l] -= lr * grads.biases[l];
  }
}

ParamGradients MlpEmbedder::zero_gradients() const {
  ParamGradients g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
    g.biases.push_back(Vector::Zero(biases_[l].size()));
  }
  return g;
}

bool MlpEmbedder::operator==(const MlpEmbedder& other) const {
  if (layer_dims_ != other.layer_dims_) return false;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
  }
  return true;
}

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'T', 'L', 'M', 'L', 'P', '\0', '\0'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::uint64_t take(int nbytes) {
    if (pos_ + nbytes > data_.size()) throw Error("checkpoint is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += nbytes;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(take(8)); }
  std::string bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw Error("checkpoint is truncated");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const MlpEmbedder& model, const std::filesystem::path& path) {
  std::string out(kMagic.begin(), kMagic.end());
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(model.layer_dims().size()));
  for (int d : model.layer_dims()) put_u32(out, static_cast<std::uint32_t>(d));
  for (int l = 0; l < model.num_layers(); ++l) {
    const auto& w = model.weight(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) put_f64(out, w(r, c));
    }
    const auto& b = model.bias(l);
    for (Eigen::Index r = 0; r < b.size(); ++r) put_f64(out, b(r));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(fmt::format("cannot open {} for writing", path.string()));
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(fmt::format("failed writing checkpoint {}", path.string()));
}

MlpEmbedder load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot open checkpoint {}", path.string()));
  Reader in(std::string(std::istreambuf_iterator<char>(f), {}));

  if (in.bytes(kMagic.size()) != std::string(kMagic.begin(), kMagic.end())) {
    throw Error(fmt::format("{} is not a model checkpoint", path.string()));
  }
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw Error(fmt::format("unsupported checkpoint version {} (expected {})", version,
                            kCheckpointVersion));
  }
  const std::uint32_t ndims = in.u32();
  if (ndims < 2 || ndims > 1024) throw Error(fmt::format("corrupt checkpoint: {} layer dims", ndims));
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < ndims; ++i) {
    const std::uint32_t d = in.u32();
    if (d == 0 || d > (1u << 24)) throw Error(fmt::format("corrupt checkpoint: layer dim {}", d));
    dims.push_back(static_cast<int>(d));
  }
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Vector> biases;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = in.f64();
    }
    Vector b(dims[l + 1]);
    for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = in.f64();
    weights.push_back(std::move(w));
    biases.push_back(std::move(b));
  }
  if (!in.done()) throw Error("checkpoint has trailing bytes");
  return MlpEmbedder(std::move(dims), std::move(weights), std::move(biases));
}

}  // namespace htl
