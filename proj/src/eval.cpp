#include "htl/eval.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

namespace htl {

double RetrievalResult::at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return recall[i];
  }
  throw Error(fmt::format("Recall@{} was not evaluated", k));
}

RetrievalResult recall_at_k(const Matrix& query, std::span<const int> query_labels,
                            const Matrix& gallery, std::span<const int> gallery_labels,
                            std::span<const int> ks, bool self_match_excluded) {
  if (static_cast<std::size_t>(query.rows()) != query_labels.size() ||
      static_cast<std::size_t>(gallery.rows()) != gallery_labels.size()) {
    throw Error("embedding and label counts differ");
  }
  if (query.rows() > 0 && query.cols() != gallery.cols()) {
    throw Error(fmt::format("query dimension {} differs from gallery dimension {}", query.cols(),
                            gallery.cols()));
  }
  if (self_match_excluded && query.rows() != gallery.rows()) {
    throw Error("self-match exclusion needs the query set to be the gallery");
  }
  if (ks.empty()) throw Error("no K values given");
  const Eigen::Index usable = gallery.rows() - (self_match_excluded ? 1 : 0);
  for (int k : ks) {
    if (k < 1) throw Error(fmt::format("K must be positive, got {}", k));
    if (k > usable) {
      throw Error(fmt::format("K={} exceeds the {} usable gallery items", k, usable));
    }
  }
  const int max_k = *std::max_element(ks.begin(), ks.end());

  std::vector<int> hits(ks.size(), 0);
  std::vector<int> order;
  std::vector<double> dist(static_cast<std::size_t>(gallery.rows()));
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    order.clear();
    for (Eigen::Index g = 0; g < gallery.rows(); ++g) {
      if (self_match_excluded && g == q) continue;
      dist[g] = (query.row(q) - gallery.row(g)).squaredNorm();
      order.push_back(static_cast<int>(g));
    }
    auto closer = [&](int x, int y) { return dist[x] != dist[y] ? dist[x] < dist[y] : x < y; };
    std::partial_sort(order.begin(), order.begin() + max_k, order.end(), closer);
    // 1-based rank of the first same-label item within the top max_k, 0 if none.
    int first_hit = 0;
    for (int r = 0; r < max_k; ++r) {
      if (gallery_labels[order[r]] == query_labels[q]) {
        first_hit = r + 1;
        break;
      }
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (first_hit > 0 && first_hit <= ks[i]) ++hits[i];
    }
  }
  RetrievalResult result;
  result.ks.assign(ks.begin(), ks.end());
  for (int h : hits) {
    result.recall.push_back(query.rows() > 0 ? static_cast<double>(h) / query.rows() : 0.0);
  }
  return result;
}

}  // namespace htl
