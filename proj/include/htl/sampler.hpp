#ifndef HTL_SAMPLER_HPP_
#define HTL_SAMPLER_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

#include "htl/common.hpp"
#include "htl/data.hpp"

namespace htl {

/// l_prime anchor classes, each with m - 1 neighbor classes, t samples per class.
struct BatchSpec {
  int l_prime = 1;
  int m = 5;
  int t = 6;

  int num_classes() const { return l_prime * m; }
  int batch_size() const { return l_prime * m * t; }
  void validate(int available_classes) const;
};

/// Class groups and the dataset rows drawn for each class. Batch-local sample k*t + j is
/// the j-th sample of classes[k].
struct MiniBatch {
  std::vector<std::vector<int>> groups;   // anchor class first, then its neighbors
  std::vector<int> classes;               // groups flattened, distinct
  std::vector<std::vector<int>> samples;  // per entry of `classes`, t dataset rows

  int size() const;
  std::vector<int> indices() const;  // dataset rows in batch-local order
  std::vector<int> labels() const;   // class id of each batch-local sample
};

struct Triplet {
  int a = 0;
  int p = 0;
  int n = 0;
  bool operator==(const Triplet&) const = default;
};

/// A pair of batch-local samples for the contrastive loss.
struct LabeledPair {
  int i = 0;
  int j = 0;
  bool same = false;
};

MiniBatch anchor_neighbor_batch(const LabeledDataset& dataset, const Eigen::MatrixXd& interclass,
                                const BatchSpec& spec, std::uint64_t seed);

MiniBatch random_class_batch(const LabeledDataset& dataset, const BatchSpec& spec,
                             std::uint64_t seed);

/// Every (anchor, positive, negative) over ordered (positive class, negative class) pairs.
std::vector<Triplet> enumerate_triplets(const MiniBatch& batch);

/// Every unordered pair of distinct batch-local samples.
std::vector<LabeledPair> enumerate_pairs(const MiniBatch& batch);

enum class Mining { kAll, kHard, kSemiHard };

Mining parse_mining(std::string_view name);
std::string_view to_string(Mining mining);

/// `embeddings` rows are in batch-local order.
std::vector<Triplet> mine_triplets(const MiniBatch& batch, const Matrix& embeddings,
                                   Mining strategy, double margin);

}  // namespace htl

#endif  // HTL_SAMPLER_HPP_
