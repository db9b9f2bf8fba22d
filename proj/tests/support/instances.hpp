#ifndef HTL_TESTS_INSTANCES_HPP_
#define HTL_TESTS_INSTANCES_HPP_

// Random loss instances shared by the unit tests and the acceptance suite.

#include <cmath>
#include <random>
#include <vector>

#include "htl/class_stats.hpp"
#include "htl/hierarchy.hpp"
#include "htl/loss.hpp"
#include "htl/sampler.hpp"
#include "support/oracles.hpp"

namespace htl::testing {

struct LossInstance {
  Matrix embeddings;
  std::vector<int> labels;
  std::vector<Triplet> triplets;
  std::vector<LabeledPair> pairs;
  ClassStats stats;
  HierarchicalTree tree;
};

// Unit-norm embeddings of `classes` classes with `per_class` samples each (batch-local order),
// all triplets and pairs of the batch, and a depth-16 tree built from the batch itself.
inline LossInstance random_loss_instance(std::mt19937_64& rng, int classes = 4, int per_class = 5,
                                         int dim = 8) {
  std::vector<std::vector<int>> groups(1);
  for (int c = 0; c < classes; ++c) groups[0].push_back(c);
  const MiniBatch batch = consecutive_batch(groups, per_class);
  Matrix emb = random_unit_rows(classes * per_class, dim, rng);
  std::vector<int> labels = batch.labels();
  ClassStats stats = compute_class_stats(emb, labels);
  HierarchicalTree tree = build_tree(stats.interclass, stats.d0, kDefaultTreeDepth);
  return LossInstance{std::move(emb),          std::move(labels),       enumerate_triplets(batch),
                      enumerate_pairs(batch), std::move(stats),        std::move(tree)};
}

// Smallest |hinge argument| over every triplet and negative pair. A central difference of
// step h is only meaningful when this stays well above the size of the perturbation.
inline double hinge_clearance(const LossInstance& inst, double beta = kDefaultBeta,
                              double alpha = kDefaultTripletMargin) {
  const auto& x = inst.embeddings;
  const auto margins = triplet_margins(inst.labels, inst.triplets, inst.tree, inst.stats, beta);
  double clearance = 1e300;
  for (std::size_t z = 0; z < inst.triplets.size(); ++z) {
    const auto& t = inst.triplets[z];
    const double core = naive_sq_dist(x, t.a, x, t.p) - naive_sq_dist(x, t.a, x, t.n);
    clearance = std::min({clearance, std::abs(core + margins[z]), std::abs(core + alpha)});
  }
  for (const auto& p : inst.pairs) {
    if (p.same) continue;
    const double margin =
        dynamic_margin(inst.tree, inst.stats, inst.labels[p.i], inst.labels[p.j], beta);
    clearance = std::min(clearance, std::abs(margin - naive_sq_dist(x, p.i, x, p.j)));
  }
  return clearance;
}

inline LossInstance kink_free_loss_instance(std::mt19937_64& rng, double min_clearance = 2e-4) {
  for (;;) {
    LossInstance inst = random_loss_instance(rng);
    if (hinge_clearance(inst) > min_clearance) return inst;
  }
}

// Stats and tree under which every dynamic margin is beta + d_0 - d_0 = beta: all classes
// merge at level 0 and every class spreads exactly d_0.
inline std::pair<ClassStats, HierarchicalTree> constant_margin_stub(int classes, double d0) {
  ClassStats stats;
  stats.num_classes = classes;
  stats.class_counts.assign(classes, 2);
  stats.intra.assign(classes, d0);
  stats.d0 = d0;
  stats.interclass = Eigen::MatrixXd::Constant(classes, classes, d0 / 2.0);
  stats.interclass.diagonal().setZero();
  HierarchicalTree tree = build_tree(stats.interclass, d0, kDefaultTreeDepth);
  return {std::move(stats), std::move(tree)};
}

// The standard triplet loss written out term by term: (1/Z) sum 1/2 [D(a,p) - D(a,n) + alpha]_+.
inline double reference_triplet_loss(const Matrix& x, const std::vector<Triplet>& triplets,
                                     double alpha) {
  if (triplets.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : triplets) {
    const double h = naive_sq_dist(x, t.a, x, t.p) - naive_sq_dist(x, t.a, x, t.n) + alpha;
    sum += 0.5 * std::max(h, 0.0);
  }
  return sum / static_cast<double>(triplets.size());
}

}  // namespace htl::testing

#endif  // HTL_TESTS_INSTANCES_HPP_
