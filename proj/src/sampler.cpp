#include "htl/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <fmt/format.h>

namespace htl {

void BatchSpec::validate(int available_classes) const {
  if (l_prime < 1 || m < 2 || t < 2) {
    throw Error(fmt::format("invalid batch spec l'={} m={} t={} (need l'>=1, m>=2, t>=2)",
                            l_prime, m, t));
  }
  if (num_classes() > available_classes) {
    throw Error(fmt::format("batch needs {} classes but the dataset has {}", num_classes(),
                            available_classes));
  }
}

int MiniBatch::size() const {
  int n = 0;
  for (const auto& s : samples) n += static_cast<int>(s.size());
  return n;
}

std::vector<int> MiniBatch::indices() const {
  std::vector<int> out;
  for (const auto& s : samples) out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<int> MiniBatch::labels() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    out.insert(out.end(), samples[k].size(), classes[k]);
  }
  return out;
}

namespace {

// Uniform without replacement when the class is large enough, else with replacement.
std::vector<int> draw_samples(const std::vector<int>& members, int t, std::mt19937_64& rng) {
  std::vector<int> out;
  if (static_cast<int>(members.size()) >= t) {
    std::vector<int> pool = members;
    for (int j = 0; j < t; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
      std::swap(pool[j], pool[pick(rng)]);
      out.push_back(pool[j]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    for (int j = 0; j < t; ++j) out.push_back(members[pick(rng)]);
  }
  return out;
}

std::vector<int> draw_classes(int num_classes, int count, std::mt19937_64& rng) {
  std::vector<int> ids(static_cast<std::size_t>(num_classes));
  std::iota(ids.begin(), ids.end(), 0);
  for (int j = 0; j < count; ++j) {
    std::uniform_int_distribution<int> pick(j, num_classes - 1);
    std::swap(ids[j], ids[pick(rng)]);
  }
  ids.resize(static_cast<std::size_t>(count));
  return ids;
}

void fill_samples(const LabeledDataset& dataset, const BatchSpec& spec, MiniBatch& batch,
                  std::mt19937_64& rng) {
  const auto by_class = dataset.indices_by_class();
  for (const auto& group : batch.groups) {
    batch.classes.insert(batch.classes.end(), group.begin(), group.end());
  }
  for (int c : batch.classes) batch.samples.push_back(draw_samples(by_class.at(c), spec.t, rng));
}

}  // namespace

MiniBatch anchor_neighbor_batch(const LabeledDataset& dataset, const Eigen::MatrixXd& interclass,
                                const BatchSpec& spec, std::uint64_t seed) {
  const int num_classes = dataset.num_classes();
  spec.validate(num_classes);
  if (interclass.rows() != num_classes || interclass.cols() != num_classes) {
    throw Error(fmt::format("interclass matrix is {}x{} but the dataset has {} classes",
                            interclass.rows(), interclass.cols(), num_classes));
  }
  std::mt19937_64 rng(seed);
  const auto anchors = draw_classes(num_classes, spec.l_prime, rng);
  std::vector<bool> taken(static_cast<std::size_t>(num_classes), false);
  for (int a : anchors) taken[a] = true;

  MiniBatch batch;
  for (int a : anchors) {
    std::vector<int> order;
    for (int c = 0; c < num_classes; ++c) {
      if (!taken[c]) order.push_back(c);
    }
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      const double dx = interclass(a, x), dy = interclass(a, y);
      return dx != dy ? dx < dy : x < y;
    });
    std::vector<int> group{a};
    for (int k = 0; k < spec.m - 1; ++k) {
      group.push_back(order.at(k));
      taken[order[k]] = true;
    }
    batch.groups.push_back(std::move(group));
  }
  fill_samples(dataset, spec, batch, rng);
  return batch;
}

MiniBatch random_class_batch(const LabeledDataset& dataset, const BatchSpec& spec,
                             std::uint64_t seed) {
  spec.validate(dataset.num_classes());
  std::mt19937_64 rng(seed);
  const auto ids = draw_classes(dataset.num_classes(), spec.num_classes(), rng);
  MiniBatch batch;
  for (int g = 0; g < spec.l_prime; ++g) {
    batch.groups.emplace_back(ids.begin() + g * spec.m, ids.begin() + (g + 1) * spec.m);
  }
  fill_samples(dataset, spec, batch, rng);
  return batch;
}

std::vector<Triplet> enumerate_triplets(const MiniBatch& batch) {
  std::vector<int> offsets{0};
  for (const auto& s : batch.samples) offsets.push_back(offsets.back() + static_cast<int>(s.size()));
  std::vector<Triplet> out;
  const int num = static_cast<int>(batch.samples.size());
  for (int pc = 0; pc < num; ++pc) {
    for (int nc = 0; nc < num; ++nc) {
      if (nc == pc) continue;
      for (int a = offsets[pc]; a < offsets[pc + 1]; ++a) {
        for (int p = offsets[pc]; p < offsets[pc + 1]; ++p) {
          if (a == p) continue;
          for (int n = offsets[nc]; n < offsets[nc + 1]; ++n) out.push_back({a, p, n});
        }
      }
    }
  }
  return out;
}

std::vector<LabeledPair> enumerate_pairs(const MiniBatch& batch) {
  const auto labels = batch.labels();
  std::vector<LabeledPair> out;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    for (int j = i + 1; j < static_cast<int>(labels.size()); ++j) {
      out.push_back({i, j, labels[i] == labels[j]});
    }
  }
  return out;
}

Mining parse_mining(std::string_view name) {
  if (name == "all") return Mining::kAll;
  if (name == "hard") return Mining::kHard;
  if (name == "semi-hard") return Mining::kSemiHard;
  throw Error(fmt::format("unknown mining strategy '{}'", name));
}

std::string_view to_string(Mining mining) {
  switch (mining) {
    case Mining::kAll: return "all";
    case Mining::kHard: return "hard";
    case Mining::kSemiHard: return "semi-hard";
  }
  return "unknown";
}

std::vector<Triplet> mine_triplets(const MiniBatch& batch, const Matrix& embeddings,
                                   Mining strategy, double margin) {
  if (strategy == Mining::kAll) return enumerate_triplets(batch);
  const auto labels = batch.labels();
  const int n = static_cast<int>(labels.size());
  if (embeddings.rows() != n) {
    throw Error(fmt::format("{} embeddings for a batch of {}", embeddings.rows(), n));
  }
  auto dist = [&](int i, int j) { return (embeddings.row(i) - embeddings.row(j)).squaredNorm(); };

  std::vector<Triplet> out;
  for (int a = 0; a < n; ++a) {
    for (int p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      const double dap = dist(a, p);
      int hardest = -1, beyond = -1, easiest = -1;
      double d_hardest = 0.0, d_beyond = 0.0, d_easiest = 0.0;
      std::vector<int> band;
      for (int k = 0; k < n; ++k) {
        if (labels[k] == labels[a]) continue;
        const double dan = dist(a, k);
        if (hardest < 0 || dan < d_hardest) hardest = k, d_hardest = dan;
        if (dan > dap && dan < dap + margin) band.push_back(k);
        if (dan >= dap + margin && (beyond < 0 || dan < d_beyond)) beyond = k, d_beyond = dan;
        if (easiest < 0 || dan > d_easiest) easiest = k, d_easiest = dan;
      }
      if (hardest < 0) continue;
      if (strategy == Mining::kHard) {
        out.push_back({a, p, hardest});
      } else if (!band.empty()) {
        for (int k : band) out.push_back({a, p, k});
      } else {
        // No negative in the band: take the closest one past it, else the farthest one
        // (every negative is then closer than the positive).
        out.push_back({a, p, beyond >= 0 ? beyond : easiest});
      }
    }
  }
  return out;
}

}  // namespace htl
