#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "htl/data.hpp"
#include "htl/eval.hpp"
#include "htl/hierarchy.hpp"
#include "htl/model.hpp"
#include "htl/trainer.hpp"
#include "run_config.hpp"

namespace htl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Writes via a temporary sibling and renames, so a failed command leaves no partial file.
void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path() && !fs::exists(path.parent_path())) {
    throw Error(fmt::format("directory {} does not exist", path.parent_path().string()));
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    f << contents;
    if (!f) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(fmt::format("failed writing {}", path.string()));
    }
  }
  fs::rename(tmp, path);
}

std::vector<int> parse_int_list(const std::string& text) {
  return parse_field("eval_ks", text).get<std::vector<int>>();
}

struct RunOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON run configuration");
    for (const auto& [key, type] : config_fields()) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      app->add_option(flag, overrides[key], fmt::format("override '{}'", key));
    }
  }

  // Config file first, then flags.
  RunConfig resolve(const CLI::App* app) const {
    json j = config_path.empty() ? json::object() : read_json_file(config_path);
    for (const auto& [key, value] : overrides) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (app->count(flag) > 0) j[key] = parse_field(key, value);
    }
    return run_config_from_json(j);
  }
};

struct Datasets {
  LabeledDataset train;
  std::optional<LabeledDataset> eval;
};

Datasets load_datasets(const RunConfig& config) {
  if (config.dataset.empty()) throw Error("no training dataset given (--dataset)");
  Datasets d;
  d.train = load_dataset(config.dataset);
  if (!config.eval_dataset.empty()) {
    d.eval = load_dataset(config.eval_dataset);
  } else if (config.holdout_per_class > 0) {
    auto [train, held] = split_per_class(d.train, config.holdout_per_class,
                                         derive_seed(config.train.seed, 0xE7A1));
    d.train = std::move(train);
    d.eval = std::move(held);
  }
  return d;
}

std::string log_csv(const TrainingLog& log) {
  std::ostringstream s;
  log.write_csv(s);
  return s.str();
}

// ---- generate ----

struct GenerateArgs {
  SyntheticSpec spec;
  std::string out;
};

int cmd_generate(const GenerateArgs& args, std::ostream& out) {
  args.spec.validate();
  const LabeledDataset ds = generate_synthetic(args.spec);
  const fs::path path(args.out);
  const fs::path tmp = path.string() + ".tmp";
  save_dataset(ds, tmp);
  const json meta = {
      {"format", "label,feature_1..feature_d"},
      {"num_superclasses", args.spec.num_superclasses},
      {"subclasses_per_super", args.spec.subclasses_per_super},
      {"samples_per_class", args.spec.samples_per_class},
      {"input_dim", args.spec.input_dim},
      {"super_separation", args.spec.super_separation},
      {"sub_separation", args.spec.sub_separation},
      {"noise_scale", args.spec.noise_scale},
      {"seed", args.spec.seed},
      {"num_classes", ds.num_classes()},
      {"num_samples", ds.num_samples()},
  };
  try {
    write_file_atomic(path.string() + ".meta.json", meta.dump(2) + "\n");
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  fs::rename(tmp, path);
  fmt::print(out, "wrote {} samples of {} classes to {}\n", ds.num_samples(), ds.num_classes(),
             path.string());
  return 0;
}

// ---- train ----

int cmd_train(const RunConfig& config, std::ostream& out) {
  const Datasets data = load_datasets(config);
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  write_file_atomic(dir / "config.resolved.json", to_json(config).dump(2) + "\n");

  const auto result = train(data.train, config.train, data.eval ? &*data.eval : nullptr,
                            [&](int epoch, const MlpEmbedder& model) {
                              save_checkpoint(model, dir / fmt::format("epoch_{:03d}.ckpt", epoch));
                            });
  save_checkpoint(result.model, dir / "model.ckpt");
  write_file_atomic(dir / "metrics.csv", log_csv(result.log));

  fmt::print(out, "trained {} iterations ({} tree rebuilds)\n", result.log.iterations,
             result.log.tree_rebuild_epochs.size());
  const auto& last = result.log.entries.back();
  fmt::print(out, "final loss {:.6f}, active fraction {:.4f}\n", last.loss, last.active_fraction);
  for (std::size_t i = 0; i < last.recall.size(); ++i) {
    fmt::print(out, "Recall@{:<3} {:.4f}\n", result.log.ks[i], last.recall[i]);
  }
  fmt::print(out, "outputs in {}\n", dir.string());
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string checkpoint;
  std::string query;
  std::string gallery;
  std::string ks = "1,2,4,8,16,32";
  std::string out;
};

// Labels of independently loaded files, mapped to a shared index by original class id.
std::vector<int> shared_labels(const LabeledDataset& ds, std::map<long, int>& index) {
  std::vector<int> out;
  for (int y : ds.labels) {
    const long original = ds.class_ids.at(y);
    const auto [it, inserted] = index.emplace(original, static_cast<int>(index.size()));
    out.push_back(it->second);
  }
  return out;
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  const MlpEmbedder model = load_checkpoint(args.checkpoint);
  const auto ks = parse_int_list(args.ks);
  const bool self = args.gallery.empty() || args.gallery == args.query;
  const LabeledDataset query = load_dataset(args.query);
  const LabeledDataset gallery = self ? query : load_dataset(args.gallery);
  for (const auto* ds : {&query, &gallery}) {
    if (ds->dim() != model.input_dim()) {
      throw Error(fmt::format("dataset dimension {} does not match model input {}", ds->dim(),
                              model.input_dim()));
    }
  }
  std::map<long, int> index;
  const auto qlabels = shared_labels(query, index);
  const auto glabels = shared_labels(gallery, index);
  const Matrix qemb = model.embed(query.features);
  const Matrix gemb = self ? qemb : model.embed(gallery.features);
  const auto result = recall_at_k(qemb, qlabels, gemb, glabels, ks, self);

  std::string table = "K,recall\n";
  fmt::print(out, "{} queries, {} gallery items{}\n", query.num_samples(), gallery.num_samples(),
             self ? " (query set is the gallery; self-matches excluded)" : "");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    fmt::print(out, "Recall@{:<3} {:.4f}\n", ks[i], result.recall[i]);
    table += fmt::format("{},{:.6f}\n", ks[i], result.recall[i]);
  }
  if (!args.out.empty()) {
    write_file_atomic(args.out, table);
    const json sidecar = {{"checkpoint", args.checkpoint}, {"query", args.query},
                          {"gallery", self ? args.query : args.gallery},
                          {"ks", ks},                    {"self_match_excluded", self}};
    write_file_atomic(args.out + ".config.json", sidecar.dump(2) + "\n");
  }
  return 0;
}

// ---- tree ----

struct TreeArgs {
  std::string checkpoint;
  std::string dataset;
  int depth = kDefaultTreeDepth;
  std::string out;
  std::string stats_out;
};

int cmd_tree(const TreeArgs& args, std::ostream& out) {
  const MlpEmbedder model = load_checkpoint(args.checkpoint);
  const LabeledDataset ds = load_dataset(args.dataset);
  if (ds.dim() != model.input_dim()) {
    throw Error(fmt::format("dataset dimension {} does not match model input {}", ds.dim(),
                            model.input_dim()));
  }
  const auto [tree, stats] = rebuild_hierarchy(model, ds, args.depth);
  std::ostringstream dump;
  write_tree(dump, tree);
  if (args.out.empty()) {
    out << dump.str();
  } else {
    write_file_atomic(args.out, dump.str());
    fmt::print(out, "d0 {:.6f}; node counts", stats.d0);
    for (int n : tree.node_counts()) fmt::print(out, " {}", n);
    fmt::print(out, "\n");
  }
  if (!args.stats_out.empty()) {
    std::ostringstream s;
    write_class_stats(s, stats);
    write_file_atomic(args.stats_out, s.str());
  }
  return 0;
}

// ---- compare ----

int cmd_compare(const RunConfig& config, const std::vector<std::string>& strategies,
                const std::string& out_path, std::ostream& out) {
  const Datasets data = load_datasets(config);
  if (!data.eval) throw Error("compare needs an evaluation set (eval_dataset or holdout_per_class)");
  std::vector<TrainingLog> logs;
  for (const auto& s : strategies) {
    const TrainConfig cfg = apply_strategy(config.train, s);
    logs.push_back(train(data.train, cfg, &*data.eval).log);
  }

  const fs::path path = out_path.empty() ? fs::path(config.output_dir) / "compare.csv"
                                         : fs::path(out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::string csv = "iteration";
  std::map<std::string, int> seen;
  for (const auto& s : strategies) {
    const int n = ++seen[s];
    csv += "," + (n == 1 ? s : fmt::format("{}#{}", s, n));
  }
  csv += "\n";
  std::size_t rows = 0;
  for (const auto& log : logs) rows = std::max(rows, log.entries.size());
  for (std::size_t r = 0; r < rows; ++r) {
    int iteration = 0;
    std::string cells;
    for (const auto& log : logs) {
      if (r < log.entries.size() && !log.entries[r].recall.empty()) {
        iteration = log.entries[r].iteration;
        cells += fmt::format(",{:.6f}", log.entries[r].recall.front());
      } else {
        cells += ",";
      }
    }
    csv += fmt::format("{}{}\n", iteration, cells);
  }
  write_file_atomic(path, csv);
  json sidecar = to_json(config);
  sidecar["strategies"] = strategies;
  write_file_atomic(path.string() + ".config.json", sidecar.dump(2) + "\n");

  fmt::print(out, "{:<34} {:>10} {:>12}\n", "strategy", "final R@1", "iterations");
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    fmt::print(out, "{:<34} {:>10.4f} {:>12}\n", strategies[i], logs[i].final_recall_at_1(),
               logs[i].iterations);
  }
  fmt::print(out, "curves in {}\n", path.string());
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical triplet loss: train and evaluate embeddings", "htl"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "write a synthetic hierarchical dataset");
  generate->add_option("--out", gen.out, "dataset file (a .meta.json sidecar is added)")->required();
  generate->add_option("--num-superclasses", gen.spec.num_superclasses);
  generate->add_option("--subclasses-per-super", gen.spec.subclasses_per_super);
  generate->add_option("--samples-per-class", gen.spec.samples_per_class);
  generate->add_option("--input-dim", gen.spec.input_dim);
  generate->add_option("--super-separation", gen.spec.super_separation);
  generate->add_option("--sub-separation", gen.spec.sub_separation);
  generate->add_option("--noise-scale", gen.spec.noise_scale);
  generate->add_option("--seed", gen.spec.seed);

  RunOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train an embedder");
  train_opts.attach(train_cmd);

  EvaluateArgs eval;
  auto* evaluate = app.add_subcommand("evaluate", "Recall@K of a checkpoint");
  evaluate->add_option("--checkpoint", eval.checkpoint)->required();
  evaluate->add_option("--query", eval.query)->required();
  evaluate->add_option("--gallery", eval.gallery, "defaults to the query set");
  evaluate->add_option("--ks", eval.ks, "comma-separated K values");
  evaluate->add_option("--out", eval.out, "metrics file");

  TreeArgs tree_args;
  auto* tree = app.add_subcommand("tree", "dump the class hierarchy of a checkpoint");
  tree->add_option("--checkpoint", tree_args.checkpoint)->required();
  tree->add_option("--dataset", tree_args.dataset)->required();
  tree->add_option("--depth", tree_args.depth);
  tree->add_option("--out", tree_args.out, "tree dump file (default: stdout)");
  tree->add_option("--stats-out", tree_args.stats_out, "distance matrix and intra-class averages");

  RunOptions compare_opts;
  std::vector<std::string> strategies;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "train several strategies on the same data");
  compare_opts.attach(compare);
  compare->add_option("--strategies", strategies, "<sampler>:<margin> entries")
      ->required()
      ->delimiter(',');
  compare->add_option("--out", compare_out, "combined metrics file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (generate->parsed()) return cmd_generate(gen, out);
    if (train_cmd->parsed()) return cmd_train(train_opts.resolve(train_cmd), out);
    if (evaluate->parsed()) return cmd_evaluate(eval, out);
    if (tree->parsed()) return cmd_tree(tree_args, out);
    if (compare->parsed()) {
      return cmd_compare(compare_opts.resolve(compare), strategies, compare_out, out);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    fmt::print(err, "htl: error: {}\n", msg);
    return 1;
  }
  return 1;
}

}  // namespace htl::cli
