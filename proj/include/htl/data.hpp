#ifndef HTL_DATA_HPP_
#define HTL_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "htl/common.hpp"

namespace htl {

enum class Split { kTrain, kQuery, kGallery };

struct LabeledDataset {
  Matrix features;              // one row per sample
  std::vector<int> labels;      // contiguous 0..C-1
  std::vector<long> class_ids;  // original label of each contiguous class id
  Split split = Split::kTrain;

  int num_samples() const { return static_cast<int>(labels.size()); }
  int num_classes() const { return static_cast<int>(class_ids.size()); }
  int dim() const { return static_cast<int>(features.cols()); }

  /// Dataset row indices of each class, in row order.
  std::vector<std::vector<int>> indices_by_class() const;

  /// Rows `indices` as a new dataset. Labels are re-indexed when `reindex` is set.
  LabeledDataset subset(const std::vector<int>& indices, bool reindex = true) const;
};

/// Comma-delimited rows: integer label then d_in reals. A header line is detected by a
/// non-numeric first field. Labels are re-indexed to 0..C-1 in order of increasing value.
LabeledDataset load_dataset(const std::filesystem::path& path, char delimiter = ',');

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path,
                  char delimiter = ',');

struct SyntheticSpec {
  int num_superclasses = 4;
  int subclasses_per_super = 5;
  int samples_per_class = 30;
  int input_dim = 16;
  double super_separation = 4.0;
  double sub_separation = 1.0;
  double noise_scale = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Gaussian blobs around subclass centers, which sit sub_separation away from their
/// superclass center. Class id = super * subclasses_per_super + sub.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

/// Splits each class by taking its last `holdout_per_class` rows (after a seeded shuffle)
/// as a held-out set. Labels keep the original contiguous ids in both parts.
std::pair<LabeledDataset, LabeledDataset> split_per_class(const LabeledDataset& dataset,
                                                          int holdout_per_class,
                                                          std::uint64_t seed);

}  // namespace htl

#endif  // HTL_DATA_HPP_
