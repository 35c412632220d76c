#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cgdetect/model.hpp"
#include "cgdetect/sgd.hpp"

namespace cgd {

/// Everything a training run needs. Defaults are the published settings.
struct RunConfig {
  SgdConfig sgd;
  ModelConfig model;
  std::uint64_t seed = 0;
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path checkpoint;
  std::filesystem::path log;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Ordered key=value settings, as read from a config file or flags.
using Settings = std::vector<std::pair<std::string, std::string>>;

/// Keys accepted in config files and as `--kebab-case` flags:
/// lr, batch_size, epochs, lr_step, lr_gamma, weight_decay, seed, fusion,
/// pooling_residual, pooling_joint, residual_layers, filter_set, crop,
/// width_multiplier, joint_residual.
const std::vector<std::string>& config_keys();

/// Flat `key=value` lines; blank lines and `#` comments are ignored.
/// Unknown keys and malformed lines throw ConfigError.
Settings parse_settings(std::string_view text);
Settings read_settings_file(const std::filesystem::path& file);

/// Applies one setting; throws ConfigError on a bad key or value.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// defaults < file < flags.
RunConfig resolve_run_config(const Settings& file, const Settings& flags);

/// Every tunable key with its resolved value, in config_keys() order.
Settings describe(const RunConfig& cfg);

/// `# key=value` header lines, one per describe() entry.
std::string config_header(const RunConfig& cfg);

/// Shortest round-trip decimal for a double.
std::string format_number(double v);

/// JSON with the model architecture, optimizer settings and seed; stored in
/// checkpoints.
std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(std::string_view json);

}  // namespace cgd
