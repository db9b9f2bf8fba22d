#ifndef HTL_LOSS_HPP_
#define HTL_LOSS_HPP_

#include <span>

#include "htl/class_stats.hpp"
#include "htl/common.hpp"
#include "htl/hierarchy.hpp"
#include "htl/sampler.hpp"

namespace htl {

inline constexpr double kDefaultTripletMargin = 0.2;

struct LossOutput {
  double loss = 0.0;
  Matrix grad_embeddings;  // dLoss/dEmbedding, same shape as the embeddings
  int active_count = 0;    // terms with a non-zero gradient
  int term_count = 0;      // triplets or pairs evaluated
};

/// (1/Z) sum_z 1/2 [D(a,p) - D(a,n) + alpha]_+ with squared distances D.
LossOutput triplet_loss(const Matrix& embeddings, std::span<const Triplet> triplets,
                        double alpha = kDefaultTripletMargin);

/// Same hinge with a per-triplet margin.
LossOutput triplet_loss(const Matrix& embeddings, std::span<const Triplet> triplets,
                        std::span<const double> margins);

/// 1/(2 Z_M) sum_z [D(a,p) - D(a,n) + alpha_z]_+ with alpha_z from the class tree.
/// Margins are constants here: no gradient flows through the tree or the class statistics.
LossOutput hierarchical_triplet_loss(const Matrix& embeddings, std::span<const int> labels,
                                     std::span<const Triplet> triplets,
                                     const HierarchicalTree& tree, const ClassStats& stats,
                                     double beta = kDefaultBeta);

/// Contrastive loss with dynamic margin on negative pairs:
/// mean over pairs of 1/2 D for positives and 1/2 [alpha_z - D]_+ for negatives.
LossOutput contrastive_loss_dynamic(const Matrix& embeddings, std::span<const int> labels,
                                    std::span<const LabeledPair> pairs,
                                    const HierarchicalTree& tree, const ClassStats& stats,
                                    double beta = kDefaultBeta);

/// Contrastive loss with an explicit margin per pair (ignored for positive pairs).
LossOutput contrastive_loss(const Matrix& embeddings, std::span<const LabeledPair> pairs,
                            std::span<const double> margins);

/// Per-triplet dynamic margins, in triplet order.
std::vector<double> triplet_margins(std::span<const int> labels, std::span<const Triplet> triplets,
                                    const HierarchicalTree& tree, const ClassStats& stats,
                                    double beta);

}  // namespace htl

#endif  // HTL_LOSS_HPP_
