#include "htl/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <random>

#include <fmt/format.h>
#include <cmath>

namespace htl {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(delimiter, start);
    fields.push_back(line.substr(start, end == std::string_view::npos ? end : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

bool parse_long(std::string_view s, long& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

}  // namespace

std::vector<std::vector<int>> LabeledDataset::indices_by_class() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_classes()));
  for (int i = 0; i < num_samples(); ++i) out.at(labels[i]).push_back(i);
  return out;
}

LabeledDataset LabeledDataset::subset(const std::vector<int>& indices, bool reindex) const {
  LabeledDataset out;
  out.split = split;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.features.row(static_cast<Eigen::Index>(k)) = features.row(indices[k]);
    out.labels.push_back(labels.at(indices[k]));
  }
  if (!reindex) {
    out.class_ids = class_ids;
    return out;
  }
  std::map<int, int> remap;
  for (int y : out.labels) remap.emplace(y, 0);
  int next = 0;
  for (auto& [old, fresh] : remap) {
    fresh = next++;
    out.class_ids.push_back(class_ids.at(old));
  }
  for (int& y : out.labels) y = remap[y];
  return out;
}

LabeledDataset load_dataset(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open dataset {}", path.string()));

  std::vector<long> raw_labels;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t dim = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view, delimiter);
    long label = 0;
    if (first) {
      first = false;
      double probe = 0.0;
      if (!parse_double(fields[0], probe)) continue;  // header row
    }
    if (!parse_long(fields[0], label)) {
      throw Error(fmt::format("{}:{}: label '{}' is not an integer", path.string(), line_no,
                              fields[0]));
    }
    if (fields.size() < 2) {
      throw Error(fmt::format("{}:{}: row has no feature values", path.string(), line_no));
    }
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      throw Error(fmt::format("{}:{}: expected {} feature values, found {}", path.string(),
                              line_no, dim, fields.size() - 1));
    }
    std::vector<double> values(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_double(fields[k + 1], values[k]) || !std::isfinite(values[k])) {
        throw Error(fmt::format("{}:{}: field {} '{}' is not a finite number", path.string(),
                                line_no, k + 2, fields[k + 1]));
      }
    }
    raw_labels.push_back(label);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error(fmt::format("{}: dataset is empty", path.string()));

  LabeledDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) ds.features(i, k) = rows[i][k];
  }
  ds.class_ids = raw_labels;
  std::sort(ds.class_ids.begin(), ds.class_ids.end());
  ds.class_ids.erase(std::unique(ds.class_ids.begin(), ds.class_ids.end()), ds.class_ids.end());
  for (long y : raw_labels) {
    const auto it = std::lower_bound(ds.class_ids.begin(), ds.class_ids.end(), y);
    ds.labels.push_back(static_cast<int>(it - ds.class_ids.begin()));
  }
  return ds;
}

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& path,
                  char delimiter) {
  std::string text;
  for (int i = 0; i < dataset.num_samples(); ++i) {
    fmt::format_to(std::back_inserter(text), "{}", dataset.class_ids.at(dataset.labels[i]));
    for (int k = 0; k < dataset.dim(); ++k) {
      fmt::format_to(std::back_inserter(text), "{}{:.17g}", delimiter, dataset.features(i, k));
    }
    text.push_back('\n');
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("failed writing {}", path.string()));
}

void SyntheticSpec::validate() const {
  if (num_superclasses < 1 || subclasses_per_super < 1 || samples_per_class < 1 ||
      input_dim < 1) {
    throw Error("synthetic spec counts and dimension must be positive");
  }
  if (!(super_separation > 0.0) || !(sub_separation > 0.0)) {
    throw Error("synthetic separations must be positive");
  }
  if (!(noise_scale >= 0.0) || !(noise_scale < sub_separation)) {
    throw Error(fmt::format("noise_scale {} must lie in [0, sub_separation={})", noise_scale,
                            sub_separation));
  }
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> box(-spec.super_separation, spec.super_separation);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int dim = spec.input_dim;

  constexpr int kMaxAttempts = 10000;
  std::vector<Vector> supers;
  for (int s = 0; s < spec.num_superclasses; ++s) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      Vector c(dim);
      for (int k = 0; k < dim; ++k) c(k) = box(rng);
      placed = std::all_of(supers.begin(), supers.end(), [&](const Vector& o) {
        return (o - c).norm() >= spec.super_separation;
      });
      if (placed) supers.push_back(std::move(c));
    }
    if (!placed) {
      throw Error(fmt::format("cannot place {} superclasses {} apart in {} dimensions",
                              spec.num_superclasses, spec.super_separation, dim));
    }
  }

  const int num_classes = spec.num_superclasses * spec.subclasses_per_super;
  LabeledDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(num_classes) * spec.samples_per_class, dim);
  int row = 0;
  for (int s = 0; s < spec.num_superclasses; ++s) {
    for (int sub = 0; sub < spec.subclasses_per_super; ++sub) {
      Vector dir(dim);
      do {
        for (int k = 0; k < dim; ++k) dir(k) = normal(rng);
      } while (dir.norm() < 1e-9);
      const Vector center = supers[s] + spec.sub_separation * dir.normalized();
      const int label = s * spec.subclasses_per_super + sub;
      ds.class_ids.push_back(label);
      for (int i = 0; i < spec.samples_per_class; ++i) {
        for (int k = 0; k < dim; ++k) ds.features(row, k) = center(k) + spec.noise_scale * normal(rng);
        ds.labels.push_back(label);
        ++row;
      }
    }
  }
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_per_class(const LabeledDataset& dataset,
                                                          int holdout_per_class,
                                                          std::uint64_t seed) {
  if (holdout_per_class < 1) throw Error("holdout_per_class must be positive");
  std::mt19937_64 rng(seed);
  std::vector<int> train_rows, held_rows;
  for (auto& members : dataset.indices_by_class()) {
    if (static_cast<int>(members.size()) <= holdout_per_class) {
      throw Error(fmt::format("a class has {} samples; cannot hold out {}", members.size(),
                              holdout_per_class));
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto cut = members.end() - holdout_per_class;
    train_rows.insert(train_rows.end(), members.begin(), cut);
    held_rows.insert(held_rows.end(), cut, members.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(held_rows.begin(), held_rows.end());
  auto train = dataset.subset(train_rows, false);
  auto held = dataset.subset(held_rows, false);
  train.split = Split::kTrain;
  held.split = Split::kQuery;
  return {std::move(train), std::move(held)};
}

}  // namespace htl
