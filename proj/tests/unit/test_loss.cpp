#include <gtest/gtest.h>

#include <random>

#include "htl/loss.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

namespace htl {
namespace {

using testing::LossInstance;

TEST(TripletLoss, InactiveWhenPositiveCoincides) {
  // a = p, and n at cos = 1/2 from a so that D(a,n) = 1.
  Matrix x(3, 2);
  x << 1, 0, 1, 0, 0.5, std::sqrt(0.75);
  const std::vector<Triplet> t = {{0, 1, 2}};
  const LossOutput out = triplet_loss(x, t, 0.2);
  EXPECT_EQ(out.loss, 0.0);
  EXPECT_EQ(out.active_count, 0);
  EXPECT_EQ(out.grad_embeddings.cwiseAbs().maxCoeff(), 0.0);
}

TEST(TripletLoss, HalfHingeSubstitution) {
  // D(a,p) = 1, D(a,n) = 0.5 with unit vectors: cos(a,p) = 1/2, cos(a,n) = 3/4.
  Matrix x(3, 2);
  x << 1, 0, 0.5, std::sqrt(0.75), 0.75, -std::sqrt(1 - 0.5625);
  ASSERT_NEAR(testing::naive_sq_dist(x, 0, x, 1), 1.0, 1e-15);
  ASSERT_NEAR(testing::naive_sq_dist(x, 0, x, 2), 0.5, 1e-15);
  const std::vector<Triplet> t = {{0, 1, 2}};
  EXPECT_NEAR(triplet_loss(x, t, 0.2).loss, 0.35, 1e-15);
}

TEST(TripletLoss, EmptyListIsZero) {
  const LossOutput out = triplet_loss(Matrix::Ones(3, 2), std::vector<Triplet>{}, 0.2);
  EXPECT_EQ(out.loss, 0.0);
  EXPECT_EQ(out.grad_embeddings, Matrix::Zero(3, 2));
}

TEST(TripletLoss, BadIndexOrMarginCountRejected) {
  const std::vector<Triplet> t = {{0, 1, 5}};
  EXPECT_THROW(triplet_loss(Matrix::Ones(3, 2), t, 0.2), Error);
  const std::vector<Triplet> ok = {{0, 1, 2}};
  EXPECT_THROW(triplet_loss(Matrix::Ones(3, 2), ok, std::vector<double>{0.1, 0.2}), Error);
}

TEST(TripletLoss, MatchesReferenceAndIsNonNegative) {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 20; ++trial) {
    const LossInstance inst = testing::random_loss_instance(rng);
    const LossOutput out = triplet_loss(inst.embeddings, inst.triplets, 0.2);
    EXPECT_GE(out.loss, 0.0);
    EXPECT_NEAR(out.loss, testing::reference_triplet_loss(inst.embeddings, inst.triplets, 0.2),
                1e-13);
    EXPECT_EQ(out.term_count, static_cast<int>(inst.triplets.size()));
  }
}

TEST(TripletLoss, ZeroIffNoViolation) {
  // Well separated: two tight clusters far apart.
  Matrix x(4, 2);
  x << 1, 0, 1, 0, -1, 0, -1, 0;
  const std::vector<Triplet> t = {{0, 1, 2}, {1, 0, 3}, {2, 3, 0}};
  EXPECT_EQ(triplet_loss(x, t, 0.2).loss, 0.0);
  EXPECT_GT(triplet_loss(x, t, 4.5).loss, 0.0);
}

TEST(TripletLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const LossInstance inst = testing::kink_free_loss_instance(rng);
    const LossOutput out = triplet_loss(inst.embeddings, inst.triplets, 0.2);
    std::function<double(const Matrix&)> f = [&](const Matrix& x) {
      return triplet_loss(x, inst.triplets, 0.2).loss;
    };
    const Matrix fd = testing::finite_difference(f, inst.embeddings);
    EXPECT_LT(testing::max_relative_error(out.grad_embeddings, fd), 1e-4);
  }
}

TEST(HierarchicalLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const LossInstance inst = testing::kink_free_loss_instance(rng);
    const LossOutput out = hierarchical_triplet_loss(inst.embeddings, inst.labels, inst.triplets,
                                                     inst.tree, inst.stats);
    std::function<double(const Matrix&)> f = [&](const Matrix& x) {
      return hierarchical_triplet_loss(x, inst.labels, inst.triplets, inst.tree, inst.stats).loss;
    };
    const Matrix fd = testing::finite_difference(f, inst.embeddings);
    EXPECT_LT(testing::max_relative_error(out.grad_embeddings, fd), 1e-4);
  }
}

TEST(ContrastiveLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const LossInstance inst = testing::kink_free_loss_instance(rng);
    const LossOutput out = contrastive_loss_dynamic(inst.embeddings, inst.labels, inst.pairs,
                                                    inst.tree, inst.stats);
    std::function<double(const Matrix&)> f = [&](const Matrix& x) {
      return contrastive_loss_dynamic(x, inst.labels, inst.pairs, inst.tree, inst.stats).loss;
    };
    const Matrix fd = testing::finite_difference(f, inst.embeddings);
    EXPECT_LT(testing::max_relative_error(out.grad_embeddings, fd), 1e-4);
  }
}

TEST(HierarchicalLoss, ConstantMarginStubEqualsTripletLoss) {
  std::mt19937_64 rng(44);
  const auto [stats, tree] = testing::constant_margin_stub(4, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    const LossInstance inst = testing::random_loss_instance(rng);
    const LossOutput htl = hierarchical_triplet_loss(inst.embeddings, inst.labels, inst.triplets,
                                                     tree, stats, 0.2);
    const LossOutput plain = triplet_loss(inst.embeddings, inst.triplets, 0.2);
    EXPECT_NEAR(htl.loss, plain.loss, 1e-12);
    EXPECT_NEAR(htl.loss, testing::reference_triplet_loss(inst.embeddings, inst.triplets, 0.2),
                1e-12);
    EXPECT_LT((htl.grad_embeddings - plain.grad_embeddings).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(HierarchicalLoss, IdenticalEmbeddingsGiveHalfMeanPositiveMargin) {
  std::mt19937_64 rng(45);
  const LossInstance inst = testing::random_loss_instance(rng);
  Matrix same(inst.embeddings.rows(), inst.embeddings.cols());
  same.rowwise() = inst.embeddings.row(0);
  const auto margins = triplet_margins(inst.labels, inst.triplets, inst.tree, inst.stats, 0.1);
  double expected = 0.0;
  for (double a : margins) expected += std::max(a, 0.0);
  expected /= 2.0 * static_cast<double>(margins.size());
  EXPECT_NEAR(hierarchical_triplet_loss(same, inst.labels, inst.triplets, inst.tree, inst.stats,
                                        0.1)
                  .loss,
              expected, 1e-13);
}

TEST(HierarchicalLoss, MarginsComeFromTheTree) {
  std::mt19937_64 rng(46);
  const LossInstance inst = testing::random_loss_instance(rng);
  const auto margins = triplet_margins(inst.labels, inst.triplets, inst.tree, inst.stats, 0.1);
  for (std::size_t z = 0; z < inst.triplets.size(); z += 37) {
    const int ya = inst.labels[inst.triplets[z].a];
    const int yn = inst.labels[inst.triplets[z].n];
    EXPECT_EQ(margins[z], dynamic_margin(inst.tree, inst.stats, ya, yn, 0.1));
  }
}

TEST(HierarchicalLoss, StaleTreeRejected) {
  std::mt19937_64 rng(47);
  LossInstance inst = testing::random_loss_instance(rng);
  inst.labels[0] = 7;  // class outside the 4-class tree
  EXPECT_THROW(hierarchical_triplet_loss(inst.embeddings, inst.labels, inst.triplets, inst.tree,
                                         inst.stats),
               Error);
  EXPECT_THROW(contrastive_loss_dynamic(inst.embeddings, inst.labels, inst.pairs, inst.tree,
                                        inst.stats),
               Error);
}

TEST(Losses, SamplesOnlyInInactiveTermsGetNoGradient) {
  std::mt19937_64 rng(48);
  for (int trial = 0; trial < 20; ++trial) {
    const LossInstance inst = testing::random_loss_instance(rng);
    // A small random subset so that some samples only see inactive triplets.
    std::vector<Triplet> subset;
    for (std::size_t z = 0; z < inst.triplets.size(); z += 97) subset.push_back(inst.triplets[z]);
    const auto margins = triplet_margins(inst.labels, subset, inst.tree, inst.stats, 0.1);
    const LossOutput out = triplet_loss(inst.embeddings, subset, margins);
    std::vector<bool> active(inst.embeddings.rows(), false);
    for (std::size_t z = 0; z < subset.size(); ++z) {
      const auto& t = subset[z];
      const double h = testing::naive_sq_dist(inst.embeddings, t.a, inst.embeddings, t.p) -
                       testing::naive_sq_dist(inst.embeddings, t.a, inst.embeddings, t.n) +
                       margins[z];
      if (h > 0) active[t.a] = active[t.p] = active[t.n] = true;
    }
    for (int i = 0; i < inst.embeddings.rows(); ++i) {
      if (!active[i]) EXPECT_EQ(out.grad_embeddings.row(i).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(Losses, LargerMarginNeverLowersATerm) {
  std::mt19937_64 rng(49);
  std::uniform_real_distribution<double> margin(-1.0, 4.0), delta(0.0, 1.0);
  const Matrix x = testing::random_unit_rows(3, 4, rng);
  const std::vector<Triplet> t = {{0, 1, 2}};
  for (int trial = 0; trial < 500; ++trial) {
    const double a = margin(rng);
    const double d = delta(rng);
    EXPECT_GE(triplet_loss(x, t, a + d).loss, triplet_loss(x, t, a).loss);
  }
}

TEST(ContrastiveLoss, PositiveAndNegativeTerms) {
  Matrix x(3, 2);
  x << 1, 0, 1, 0, 0, 1;
  // Identical positive pair contributes nothing; negative pair at D = 2 with margin 1.5 neither.
  const std::vector<LabeledPair> pairs = {{0, 1, true}, {0, 2, false}};
  const LossOutput out = contrastive_loss(x, pairs, std::vector<double>{0.0, 1.5});
  EXPECT_EQ(out.loss, 0.0);
  EXPECT_EQ(out.grad_embeddings.cwiseAbs().maxCoeff(), 0.0);
  // With margin 2.6 the negative term is 1/2 (2.6 - 2) averaged over 2 pairs.
  EXPECT_NEAR(contrastive_loss(x, pairs, std::vector<double>{0.0, 2.6}).loss, 0.15, 1e-15);
}

TEST(ContrastiveLoss, FirstElementIsTheAnchor) {
  std::mt19937_64 rng(50);
  const LossInstance inst = testing::random_loss_instance(rng);
  // A negative pair (i from class 0, j from class 3) takes the margin of anchor class 0.
  const std::vector<LabeledPair> pair = {{0, 19, false}};
  Matrix x = inst.embeddings;
  x.row(19) = x.row(0);  // D = 0, so the loss is alpha / 2
  const double expected = 0.5 * dynamic_margin(inst.tree, inst.stats, 0, 3, 0.1);
  EXPECT_NEAR(contrastive_loss_dynamic(x, inst.labels, pair, inst.tree, inst.stats, 0.1).loss,
              std::max(expected, 0.0), 1e-15);
}

TEST(ContrastiveLoss, NonNegative) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    const LossInstance inst = testing::random_loss_instance(rng);
    EXPECT_GE(contrastive_loss_dynamic(inst.embeddings, inst.labels, inst.pairs, inst.tree,
                                       inst.stats)
                  .loss,
              0.0);
  }
}

}  // namespace
}  // namespace htl
