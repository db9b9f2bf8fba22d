#ifndef HTL_TOOLS_RUN_CONFIG_HPP_
#define HTL_TOOLS_RUN_CONFIG_HPP_

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "htl/trainer.hpp"

namespace htl::cli {

/// Training configuration plus dataset locations and the output directory.
struct RunConfig {
  TrainConfig train;
  std::string dataset;
  std::string eval_dataset;   // optional held-out set
  int holdout_per_class = 0;  // used when eval_dataset is empty
  std::string output_dir = "run";
};

enum class FieldType { kString, kInt, kUInt64, kDouble, kBool, kIntList };

/// Every configuration key with its type. Unknown keys are rejected.
const std::map<std::string, FieldType>& config_fields();

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Converts a command-line string to the JSON value of the key's type.
nlohmann::json parse_field(const std::string& key, const std::string& text);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace htl::cli

#endif  // HTL_TOOLS_RUN_CONFIG_HPP_
