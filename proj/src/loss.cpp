#include "htl/loss.hpp"

#include <fmt/format.h>

namespace htl {

namespace {

void check_index(int idx, Eigen::Index n) {
  if (idx < 0 || idx >= n) throw Error(fmt::format("sample index {} out of range [0, {})", idx, n));
}

int class_of(std::span<const int> labels, int idx, const HierarchicalTree& tree) {
  if (idx < 0 || static_cast<std::size_t>(idx) >= labels.size()) {
    throw Error(fmt::format("sample index {} has no label", idx));
  }
  const int c = labels[idx];
  if (!tree.contains(c)) {
    throw Error(fmt::format("class {} is not in the hierarchy (stale tree?)", c));
  }
  return c;
}

}  // namespace

LossOutput triplet_loss(const Matrix& embeddings, std::span<const Triplet> triplets,
                        double alpha) {
  std::vector<double> margins(triplets.size(), alpha);
  return triplet_loss(embeddings, triplets, margins);
}

LossOutput triplet_loss(const Matrix& embeddings, std::span<const Triplet> triplets,
                        std::span<const double> margins) {
  if (margins.size() != triplets.size()) throw Error("one margin per triplet is required");
  LossOutput out;
  out.grad_embeddings = Matrix::Zero(embeddings.rows(), embeddings.cols());
  out.term_count = static_cast<int>(triplets.size());
  if (triplets.empty()) return out;

  const double scale = 1.0 / static_cast<double>(triplets.size());
  const Eigen::Index n = embeddings.rows();
  for (std::size_t z = 0; z < triplets.size(); ++z) {
    const auto [a, p, neg] = triplets[z];
    check_index(a, n);
    check_index(p, n);
    check_index(neg, n);
    const auto ea = embeddings.row(a);
    const auto ep = embeddings.row(p);
    const auto en = embeddings.row(neg);
    const double hinge = (ea - ep).squaredNorm() - (ea - en).squaredNorm() + margins[z];
    if (!(hinge > 0.0)) continue;
    out.loss += 0.5 * hinge;
    ++out.active_count;
    // d/dx of 1/2 (|a-p|^2 - |a-n|^2)
    out.grad_embeddings.row(a) += scale * (en - ep);
    out.grad_embeddings.row(p) += scale * (ep - ea);
    out.grad_embeddings.row(neg) += scale * (ea - en);
  }
  out.loss *= scale;
  return out;
}

std::vector<double> triplet_margins(std::span<const int> labels, std::span<const Triplet> triplets,
                                    const HierarchicalTree& tree, const ClassStats& stats,
                                    double beta) {
  std::vector<double> margins;
  margins.reserve(triplets.size());
  for (const auto& t : triplets) {
    const int ya = class_of(labels, t.a, tree);
    const int yn = class_of(labels, t.n, tree);
    margins.push_back(dynamic_margin(tree, stats, ya, yn, beta));
  }
  return margins;
}

LossOutput hierarchical_triplet_loss(const Matrix& embeddings, std::span<const int> labels,
                                     std::span<const Triplet> triplets,
                                     const HierarchicalTree& tree, const ClassStats& stats,
                                     double beta) {
  // 1/(2 Z) sum [.]_+ is the same expression as (1/Z) sum 1/2 [.]_+.
  const auto margins = triplet_margins(labels, triplets, tree, stats, beta);
  return triplet_loss(embeddings, triplets, margins);
}

LossOutput contrastive_loss(const Matrix& embeddings, std::span<const LabeledPair> pairs,
                            std::span<const double> margins) {
  if (margins.size() != pairs.size()) throw Error("one margin per pair is required");
  LossOutput out;
  out.grad_embeddings = Matrix::Zero(embeddings.rows(), embeddings.cols());
  out.term_count = static_cast<int>(pairs.size());
  if (pairs.empty()) return out;

  const double scale = 1.0 / static_cast<double>(pairs.size());
  const Eigen::Index n = embeddings.rows();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pair = pairs[k];
    check_index(pair.i, n);
    check_index(pair.j, n);
    const auto ei = embeddings.row(pair.i);
    const auto ej = embeddings.row(pair.j);
    const double d = (ei - ej).squaredNorm();
    if (pair.same) {
      if (d > 0.0) ++out.active_count;
      out.loss += 0.5 * d;
      out.grad_embeddings.row(pair.i) += scale * (ei - ej);
      out.grad_embeddings.row(pair.j) += scale * (ej - ei);
      continue;
    }
    const double hinge = margins[k] - d;
    if (!(hinge > 0.0)) continue;
    ++out.active_count;
    out.loss += 0.5 * hinge;
    out.grad_embeddings.row(pair.i) -= scale * (ei - ej);
    out.grad_embeddings.row(pair.j) -= scale * (ej - ei);
  }
  out.loss *= scale;
  return out;
}

// The first sample of a negative pair plays the anchor role in the margin.
LossOutput contrastive_loss_dynamic(const Matrix& embeddings, std::span<const int> labels,
                                    std::span<const LabeledPair> pairs,
                                    const HierarchicalTree& tree, const ClassStats& stats,
                                    double beta) {
  std::vector<double> margins(pairs.size(), 0.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k].same) continue;
    const int yi = class_of(labels, pairs[k].i, tree);
    const int yj = class_of(labels, pairs[k].j, tree);
    margins[k] = dynamic_margin(tree, stats, yi, yj, beta);
  }
  return contrastive_loss(embeddings, pairs, margins);
}

}  // namespace htl
