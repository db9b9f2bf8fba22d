#include "htl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "htl/eval.hpp"

namespace htl {

LossType parse_loss_type(std::string_view name) {
  if (name == "triplet") return LossType::kTriplet;
  if (name == "hierarchical" || name == "htl") return LossType::kHierarchical;
  if (name == "contrastive") return LossType::kContrastive;
  throw Error(fmt::format("unknown loss '{}' (triplet | hierarchical | contrastive)", name));
}

SamplerType parse_sampler_type(std::string_view name) {
  if (name == "random") return SamplerType::kRandom;
  if (name == "anchor-neighbor") return SamplerType::kAnchorNeighbor;
  throw Error(fmt::format("unknown sampler '{}' (random | anchor-neighbor)", name));
}

std::string_view to_string(LossType loss) {
  switch (loss) {
    case LossType::kTriplet: return "triplet";
    case LossType::kHierarchical: return "hierarchical";
    case LossType::kContrastive: return "contrastive";
  }
  return "unknown";
}

std::string_view to_string(SamplerType sampler) {
  return sampler == SamplerType::kRandom ? "random" : "anchor-neighbor";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !(lr_decay > 0.0) || !std::isfinite(learning_rate)) {
    throw Error("learning rate and decay factor must be positive");
  }
  if (epochs < 1) throw Error(fmt::format("epochs must be at least 1, got {}", epochs));
  if (max_iterations < 0 || eval_every < 0 || patience < 0 || lr_decay_period < 0) {
    throw Error("iteration caps, eval cadence, patience and decay period must be non-negative");
  }
  if (tree_depth < 1) throw Error("tree depth must be at least 1");
  if (embedding_dim < 1) throw Error("embedding dimension must be positive");
  for (int h : hidden_dims) {
    if (h < 1) throw Error("hidden layer sizes must be positive");
  }
  if (eval_ks.empty()) throw Error("at least one K is needed for evaluation");
}

bool TrainConfig::uses_tree() const {
  return sampler == SamplerType::kAnchorNeighbor || loss != LossType::kTriplet;
}

double TrainConfig::learning_rate_at(int epoch) const {
  if (lr_decay_period == 0) return learning_rate;
  return learning_rate * std::pow(lr_decay, epoch / lr_decay_period);
}

int TrainingLog::first_iteration_reaching(double target) const {
  for (const auto& e : entries) {
    if (!e.recall.empty() && e.recall.front() >= target) return e.iteration;
  }
  return -1;
}

double TrainingLog::final_recall_at_1() const {
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (!it->recall.empty()) return it->recall.front();
  }
  throw Error("the training log has no evaluation");
}

void TrainingLog::write_csv(std::ostream& out) const {
  fmt::print(out, "iteration,epoch,loss,active_fraction");
  for (int k : ks) fmt::print(out, ",recall@{}", k);
  fmt::print(out, ",seconds\n");
  for (const auto& e : entries) {
    fmt::print(out, "{},{},{:.10g},{:.6f}", e.iteration, e.epoch, e.loss, e.active_fraction);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (i < e.recall.size()) {
        fmt::print(out, ",{:.6f}", e.recall[i]);
      } else {
        fmt::print(out, ",");
      }
    }
    fmt::print(out, ",{:.3f}\n", e.seconds);
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::pair<HierarchicalTree, ClassStats> rebuild_hierarchy(const MlpEmbedder& model,
                                                          const LabeledDataset& dataset,
                                                          int depth) {
  const Matrix embeddings = model.embed(dataset.features);
  ClassStats stats = compute_class_stats(embeddings, dataset.labels);
  HierarchicalTree tree = build_tree(stats.interclass, stats.d0, depth);
  return {std::move(tree), std::move(stats)};
}

TrainConfig apply_strategy(TrainConfig base, std::string_view strategy) {
  const auto colon = strategy.find(':');
  if (colon == std::string_view::npos) {
    throw Error(fmt::format("strategy '{}' must look like <sampler>:<margin>", strategy));
  }
  const auto sampler = strategy.substr(0, colon);
  const auto margin = strategy.substr(colon + 1);
  if (sampler == "random") {
    base.sampler = SamplerType::kRandom;
    base.mining = Mining::kAll;
  } else if (sampler == "hard" || sampler == "semi-hard") {
    base.sampler = SamplerType::kRandom;
    base.mining = parse_mining(sampler);
  } else if (sampler == "anchor-neighbor") {
    base.sampler = SamplerType::kAnchorNeighbor;
    base.mining = Mining::kAll;
  } else {
    throw Error(fmt::format("unknown sampler '{}' in strategy '{}'", sampler, strategy));
  }
  if (margin == "constant-margin") {
    base.loss = LossType::kTriplet;
  } else if (margin == "dynamic-margin") {
    base.loss = LossType::kHierarchical;
  } else if (margin == "flat-tree") {
    base.loss = LossType::kHierarchical;
    base.tree_depth = 1;
  } else {
    throw Error(fmt::format("unknown margin '{}' in strategy '{}'", margin, strategy));
  }
  return base;
}

namespace {

struct StepResult {
  double loss = 0.0;
  double active_fraction = 0.0;
};

class Trainer {
 public:
  Trainer(const LabeledDataset& dataset, const TrainConfig& config, const LabeledDataset* eval_set)
      : dataset_(dataset),
        config_(config),
        eval_set_(eval_set),
        model_(layer_dims(dataset, config), derive_seed(config.seed, 0)) {}

  TrainResult run(const EpochCallback& on_epoch) {
    const int per_epoch = std::max(1, dataset_.num_samples() / config_.batch.batch_size());
    const auto start = std::chrono::steady_clock::now();
    log_.ks = config_.eval_ks;
    int iteration = 0;
    double best = -1.0;
    int stale = 0;
    bool stop = false;
    int last_epoch = 0;

    for (int epoch = 0; epoch < config_.epochs && !stop; ++epoch) {
      const bool bootstrap = epoch == 0;
      last_epoch = epoch;
      if (!bootstrap && config_.uses_tree()) {
        auto [tree, stats] = rebuild_hierarchy(model_, dataset_, config_.tree_depth);
        tree_.emplace(std::move(tree));
        stats_.emplace(std::move(stats));
        log_.tree_rebuild_epochs.push_back(epoch);
      }
      const double lr = config_.learning_rate_at(epoch);
      for (int step = 0; step < per_epoch && !stop; ++step) {
        ++iteration;
        const StepResult r = step_once(iteration, bootstrap, lr);
        loss_sum_ += r.loss;
        active_sum_ += r.active_fraction;
        ++pending_;

        const bool last_epoch_step = step + 1 == per_epoch;
        const bool capped = config_.max_iterations > 0 && iteration >= config_.max_iterations;
        const bool due = config_.eval_every > 0 ? iteration % config_.eval_every == 0
                                                : last_epoch_step;
        if (due || capped || (last_epoch_step && epoch + 1 == config_.epochs)) {
          record(iteration, epoch, start);
          const auto& entry = log_.entries.back();
          if (config_.patience > 0 && !entry.recall.empty()) {
            if (entry.recall.front() > best) {
              best = entry.recall.front();
              stale = 0;
            } else if (++stale >= config_.patience) {
              stop = true;
              log_.stopped_early = true;
            }
          }
        }
        if (capped) stop = true;
      }
      if (on_epoch) on_epoch(epoch, model_);
    }
    if (pending_ > 0) record(iteration, last_epoch, start);
    log_.iterations = iteration;
    return {std::move(model_), std::move(log_)};
  }

 private:
  static std::vector<int> layer_dims(const LabeledDataset& dataset, const TrainConfig& config) {
    config.validate();
    config.batch.validate(dataset.num_classes());
    std::vector<int> dims{dataset.dim()};
    dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
    dims.push_back(config.embedding_dim);
    return dims;
  }

  StepResult step_once(int iteration, bool bootstrap, double lr) {
    const auto seed = derive_seed(config_.seed, static_cast<std::uint64_t>(iteration));
    const bool use_tree = !bootstrap && config_.uses_tree();
    const MiniBatch batch = use_tree && config_.sampler == SamplerType::kAnchorNeighbor
                                ? anchor_neighbor_batch(dataset_, stats_->interclass,
                                                        config_.batch, seed)
                                : random_class_batch(dataset_, config_.batch, seed);
    const auto rows = batch.indices();
    const auto labels = batch.labels();
    Matrix inputs(static_cast<Eigen::Index>(rows.size()), dataset_.dim());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      inputs.row(static_cast<Eigen::Index>(k)) = dataset_.features.row(rows[k]);
    }
    auto [embeddings, cache] = model_.forward(inputs);

    LossOutput out;
    if (config_.loss == LossType::kContrastive) {
      const auto pairs = enumerate_pairs(batch);
      if (use_tree) {
        out = contrastive_loss_dynamic(embeddings, labels, pairs, *tree_, *stats_, config_.beta);
      } else {
        const std::vector<double> margins(pairs.size(), config_.initial_margin);
        out = contrastive_loss(embeddings, pairs, margins);
      }
    } else {
      const auto triplets =
          mine_triplets(batch, embeddings, config_.mining, config_.initial_margin);
      if (use_tree && config_.loss == LossType::kHierarchical) {
        out = hierarchical_triplet_loss(embeddings, labels, triplets, *tree_, *stats_,
                                        config_.beta);
      } else {
        out = triplet_loss(embeddings, triplets, config_.initial_margin);
      }
    }
    if (!std::isfinite(out.loss)) {
      throw Error(fmt::format("training diverged: non-finite loss at iteration {}", iteration));
    }
    model_.sgd_step(model_.backward(cache, out.grad_embeddings), lr);
    const double frac =
        out.term_count > 0 ? static_cast<double>(out.active_count) / out.term_count : 0.0;
    return {out.loss, frac};
  }

  void record(int iteration, int epoch, std::chrono::steady_clock::time_point start) {
    LogEntry e;
    e.iteration = iteration;
    e.epoch = epoch;
    e.loss = pending_ > 0 ? loss_sum_ / pending_ : 0.0;
    e.active_fraction = pending_ > 0 ? active_sum_ / pending_ : 0.0;
    if (eval_set_ != nullptr) {
      const Matrix emb = model_.embed(eval_set_->features);
      e.recall = recall_at_k(emb, eval_set_->labels, emb, eval_set_->labels, config_.eval_ks, true)
                     .recall;
    }
    if (config_.record_wall_time) {
      e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    log_.entries.push_back(std::move(e));
    loss_sum_ = active_sum_ = 0.0;
    pending_ = 0;
  }

  const LabeledDataset& dataset_;
  const TrainConfig& config_;
  const LabeledDataset* eval_set_;
  MlpEmbedder model_;
  std::optional<HierarchicalTree> tree_;
  std::optional<ClassStats> stats_;
  TrainingLog log_;
  double loss_sum_ = 0.0;
  double active_sum_ = 0.0;
  int pending_ = 0;
};

}  // namespace

TrainResult train(const LabeledDataset& dataset, const TrainConfig& config,
                  const LabeledDataset* eval_set, const EpochCallback& on_epoch) {
  if (eval_set != nullptr && eval_set->dim() != dataset.dim()) {
    throw Error("evaluation set dimension differs from the training set");
  }
  return Trainer(dataset, config, eval_set).run(on_epoch);
}

}  // namespace htl
