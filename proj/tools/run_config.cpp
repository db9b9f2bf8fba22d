#include "run_config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace htl::cli {

using nlohmann::json;

const std::map<std::string, FieldType>& config_fields() {
  static const std::map<std::string, FieldType> fields = {
      {"dataset", FieldType::kString},        {"eval_dataset", FieldType::kString},
      {"holdout_per_class", FieldType::kInt}, {"output_dir", FieldType::kString},
      {"loss", FieldType::kString},           {"sampler", FieldType::kString},
      {"mining", FieldType::kString},         {"l_prime", FieldType::kInt},
      {"m", FieldType::kInt},                 {"t", FieldType::kInt},
      {"hidden_dims", FieldType::kIntList},   {"embedding_dim", FieldType::kInt},
      {"learning_rate", FieldType::kDouble},  {"lr_decay", FieldType::kDouble},
      {"lr_decay_period", FieldType::kInt},   {"epochs", FieldType::kInt},
      {"max_iterations", FieldType::kInt},    {"tree_depth", FieldType::kInt},
      {"beta", FieldType::kDouble},           {"initial_margin", FieldType::kDouble},
      {"seed", FieldType::kUInt64},           {"eval_every", FieldType::kInt},
      {"eval_ks", FieldType::kIntList},       {"patience", FieldType::kInt},
      {"record_wall_time", FieldType::kBool},
  };
  return fields;
}

json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  return json{
      {"dataset", c.dataset},
      {"eval_dataset", c.eval_dataset},
      {"holdout_per_class", c.holdout_per_class},
      {"output_dir", c.output_dir},
      {"loss", std::string(to_string(t.loss))},
      {"sampler", std::string(to_string(t.sampler))},
      {"mining", std::string(to_string(t.mining))},
      {"l_prime", t.batch.l_prime},
      {"m", t.batch.m},
      {"t", t.batch.t},
      {"hidden_dims", t.hidden_dims},
      {"embedding_dim", t.embedding_dim},
      {"learning_rate", t.learning_rate},
      {"lr_decay", t.lr_decay},
      {"lr_decay_period", t.lr_decay_period},
      {"epochs", t.epochs},
      {"max_iterations", t.max_iterations},
      {"tree_depth", t.tree_depth},
      {"beta", t.beta},
      {"initial_margin", t.initial_margin},
      {"seed", t.seed},
      {"eval_every", t.eval_every},
      {"eval_ks", t.eval_ks},
      {"patience", t.patience},
      {"record_wall_time", t.record_wall_time},
  };
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw Error("configuration must be a JSON object");
  const auto& fields = config_fields();
  for (const auto& [key, value] : j.items()) {
    if (!fields.contains(key)) throw Error(fmt::format("unknown configuration key '{}'", key));
  }
  RunConfig c;
  TrainConfig& t = c.train;
  auto get = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(target);
    } catch (const json::exception& e) {
      throw Error(fmt::format("configuration key '{}': {}", key, e.what()));
    }
  };
  get("dataset", c.dataset);
  get("eval_dataset", c.eval_dataset);
  get("holdout_per_class", c.holdout_per_class);
  get("output_dir", c.output_dir);
  std::string name;
  if (j.contains("loss")) get("loss", name), t.loss = parse_loss_type(name);
  if (j.contains("sampler")) get("sampler", name), t.sampler = parse_sampler_type(name);
  if (j.contains("mining")) get("mining", name), t.mining = parse_mining(name);
  get("l_prime", t.batch.l_prime);
  get("m", t.batch.m);
  get("t", t.batch.t);
  get("hidden_dims", t.hidden_dims);
  get("embedding_dim", t.embedding_dim);
  get("learning_rate", t.learning_rate);
  get("lr_decay", t.lr_decay);
  get("lr_decay_period", t.lr_decay_period);
  get("epochs", t.epochs);
  get("max_iterations", t.max_iterations);
  get("tree_depth", t.tree_depth);
  get("beta", t.beta);
  get("initial_margin", t.initial_margin);
  get("seed", t.seed);
  get("eval_every", t.eval_every);
  get("eval_ks", t.eval_ks);
  get("patience", t.patience);
  get("record_wall_time", t.record_wall_time);
  t.validate();
  return c;
}

json parse_field(const std::string& key, const std::string& text) {
  const auto it = config_fields().find(key);
  if (it == config_fields().end()) throw Error(fmt::format("unknown configuration key '{}'", key));
  try {
    switch (it->second) {
      case FieldType::kString: return text;
      case FieldType::kInt: return std::stoi(text);
      case FieldType::kUInt64: return std::stoull(text);
      case FieldType::kDouble: return std::stod(text);
      case FieldType::kBool:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        break;
      case FieldType::kIntList: {
        std::vector<int> values;
        std::stringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ',')) {
          if (!part.empty()) values.push_back(std::stoi(part));
        }
        return values;
      }
    }
  } catch (const std::logic_error&) {
    // stoi & co. report bad input as invalid_argument / out_of_range
  }
  throw Error(fmt::format("invalid value '{}' for '{}'", text, key));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open configuration {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace htl::cli
