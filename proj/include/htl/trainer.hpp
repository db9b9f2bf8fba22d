#ifndef HTL_TRAINER_HPP_
#define HTL_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "htl/class_stats.hpp"
#include "htl/data.hpp"
#include "htl/hierarchy.hpp"
#include "htl/loss.hpp"
#include "htl/model.hpp"
#include "htl/sampler.hpp"

namespace htl {

enum class LossType { kTriplet, kHierarchical, kContrastive };
enum class SamplerType { kRandom, kAnchorNeighbor };

LossType parse_loss_type(std::string_view name);
SamplerType parse_sampler_type(std::string_view name);
std::string_view to_string(LossType loss);
std::string_view to_string(SamplerType sampler);

struct TrainConfig {
  LossType loss = LossType::kHierarchical;
  SamplerType sampler = SamplerType::kAnchorNeighbor;
  Mining mining = Mining::kAll;
  BatchSpec batch;
  std::vector<int> hidden_dims = {32};
  int embedding_dim = 128;
  double learning_rate = 1e-3;
  double lr_decay = 0.1;
  int lr_decay_period = 10;  // epochs; 0 disables decay
  int epochs = 30;
  int max_iterations = 0;  // 0: no cap besides the epoch budget
  int tree_depth = kDefaultTreeDepth;
  double beta = kDefaultBeta;
  double initial_margin = kDefaultTripletMargin;
  std::uint64_t seed = 1;
  int eval_every = 0;  // iterations between log records; 0 records once per epoch
  std::vector<int> eval_ks = {1, 2, 4, 8};
  int patience = 0;  // evaluations without Recall@1 improvement before stopping; 0 disables
  bool record_wall_time = true;

  void validate() const;
  bool uses_tree() const;
  double learning_rate_at(int epoch) const;
};

struct LogEntry {
  int iteration = 0;
  int epoch = 0;
  double loss = 0.0;             // mean batch loss since the previous record
  double active_fraction = 0.0;  // mean fraction of terms with a positive hinge
  std::vector<double> recall;    // per eval K; empty without an evaluation set
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<int> ks;
  std::vector<LogEntry> entries;
  std::vector<int> tree_rebuild_epochs;
  int iterations = 0;
  bool stopped_early = false;

  /// First logged iteration whose Recall@1 reaches `target`, or -1.
  int first_iteration_reaching(double target) const;
  double final_recall_at_1() const;

  void write_csv(std::ostream& out) const;
};

/// Embeds the whole dataset with `model` and rebuilds class statistics and the tree.
std::pair<HierarchicalTree, ClassStats> rebuild_hierarchy(const MlpEmbedder& model,
                                                          const LabeledDataset& dataset,
                                                          int depth);

struct TrainResult {
  MlpEmbedder model;
  TrainingLog log;
};

using EpochCallback = std::function<void(int epoch, const MlpEmbedder& model)>;

/// Mini-batch SGD over the hierarchical triplet loss or one of its baselines.
///
/// Epoch 0 always trains on random class batches with the constant initial margin. From
/// epoch 1 on, a tree-based configuration rebuilds the hierarchy at the start of each epoch
/// and samples and weighs triplets with it. `eval_set`, when given, is evaluated as its own
/// gallery with self-matches excluded.
TrainResult train(const LabeledDataset& dataset, const TrainConfig& config,
                  const LabeledDataset* eval_set = nullptr, const EpochCallback& on_epoch = {});

/// "<sampler>:<margin>" with sampler in {random, hard, semi-hard, anchor-neighbor} and
/// margin in {constant-margin, dynamic-margin, flat-tree}.
TrainConfig apply_strategy(TrainConfig base, std::string_view strategy);

/// Seed of stream `stream` derived from a base seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace htl

#endif  // HTL_TRAINER_HPP_
