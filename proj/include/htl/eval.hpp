#ifndef HTL_EVAL_HPP_
#define HTL_EVAL_HPP_

#include <span>
#include <vector>

#include "htl/common.hpp"

namespace htl {

/// Retrieval cut-offs of the CUB-200 style protocol.
inline const std::vector<int> kSmallGalleryKs = {1, 2, 4, 8, 16, 32};
/// Retrieval cut-offs of the In-Shop style protocol.
inline const std::vector<int> kInShopKs = {1, 10, 20, 30, 40, 50};

struct RetrievalResult {
  std::vector<int> ks;
  std::vector<double> recall;  // recall[i] is Recall@ks[i]

  double at(int k) const;
};

/// Recall@K: the fraction of queries with a same-label item among their K nearest gallery
/// items (squared distance, ties by gallery index). With `self_match_excluded`, query i and
/// gallery i are the same sample and i never retrieves itself.
RetrievalResult recall_at_k(const Matrix& query, std::span<const int> query_labels,
                            const Matrix& gallery, std::span<const int> gallery_labels,
                            std::span<const int> ks, bool self_match_excluded);

}  // namespace htl

#endif  // HTL_EVAL_HPP_
