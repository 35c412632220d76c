#include "cgdetect/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cgd {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename N>
N parse_number(std::string_view key, std::string_view value) {
  N out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
}

bool known_key(std::string_view key) {
  for (const auto& k : config_keys()) {
    if (k == key) return true;
  }
  return false;
}

}  // namespace

void RunConfig::validate() const {
  sgd.validate();
  model.validate();
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "lr",           "batch_size",      "epochs",     "lr_step", "lr_gamma",
      "weight_decay", "seed",            "fusion",     "pooling_residual",
      "pooling_joint", "residual_layers", "filter_set", "crop",    "width_multiplier",
      "joint_residual"};
  return keys;
}

Settings parse_settings(std::string_view text) {
  Settings out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!known_key(key)) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    out.emplace_back(key, std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

Settings read_settings_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_settings(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "lr") {
    cfg.sgd.lr0 = parse_number<double>(key, value);
  } else if (key == "batch_size") {
    cfg.sgd.batch_size = parse_number<int>(key, value);
  } else if (key == "epochs") {
    cfg.sgd.epochs = parse_number<int>(key, value);
  } else if (key == "lr_step") {
    cfg.sgd.lr_step_epochs = parse_number<int>(key, value);
  } else if (key == "lr_gamma") {
    cfg.sgd.lr_gamma = parse_number<double>(key, value);
  } else if (key == "weight_decay") {
    cfg.sgd.weight_decay = parse_number<double>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "fusion") {
    cfg.model.fusion = parse_fusion(value);
  } else if (key == "pooling_residual") {
    cfg.model.pooling_residual = parse_pool(value);
  } else if (key == "pooling_joint") {
    cfg.model.pooling_joint = parse_pool(value);
  } else if (key == "residual_layers") {
    cfg.model.residual_block_layers = parse_layer_list(value);
  } else if (key == "filter_set") {
    cfg.model.filter_subset = std::string(value);
  } else if (key == "crop") {
    cfg.model.crop = parse_number<int>(key, value);
  } else if (key == "width_multiplier") {
    cfg.model.width_multiplier = parse_number<double>(key, value);
  } else if (key == "joint_residual") {
    cfg.model.joint_stream_residual_blocks = parse_bool(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

RunConfig resolve_run_config(const Settings& file, const Settings& flags) {
  RunConfig cfg;
  for (const auto& [k, v] : file) apply_setting(cfg, k, v);
  for (const auto& [k, v] : flags) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::to_string(v);
}

Settings describe(const RunConfig& cfg) {
  const auto& m = cfg.model;
  return {{"lr", format_number(cfg.sgd.lr0)},
          {"batch_size", std::to_string(cfg.sgd.batch_size)},
          {"epochs", std::to_string(cfg.sgd.epochs)},
          {"lr_step", std::to_string(cfg.sgd.lr_step_epochs)},
          {"lr_gamma", format_number(cfg.sgd.lr_gamma)},
          {"weight_decay", format_number(cfg.sgd.weight_decay)},
          {"seed", std::to_string(cfg.seed)},
          {"fusion", std::string(to_string(m.fusion))},
          {"pooling_residual", std::string(to_string(m.pooling_residual))},
          {"pooling_joint", std::string(to_string(m.pooling_joint))},
          {"residual_layers", format_layer_list(m.residual_block_layers)},
          {"filter_set", m.filter_subset},
          {"crop", std::to_string(m.crop)},
          {"width_multiplier", format_number(m.width_multiplier)},
          {"joint_residual", m.joint_stream_residual_blocks ? "true" : "false"}};
}

std::string config_header(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : describe(cfg)) out += "# " + k + "=" + v + "\n";
  return out;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["model"] = json::parse(cfg.model.to_json());
  j["sgd"] = {{"lr", cfg.sgd.lr0},
              {"lr_gamma", cfg.sgd.lr_gamma},
              {"lr_step", cfg.sgd.lr_step_epochs},
              {"weight_decay", cfg.sgd.weight_decay},
              {"batch_size", cfg.sgd.batch_size},
              {"epochs", cfg.sgd.epochs}};
  j["seed"] = cfg.seed;
  return j.dump();
}

RunConfig run_config_from_json(std::string_view text) {
  RunConfig cfg;
  try {
    const json j = json::parse(text);
    cfg.model = ModelConfig::from_json(j.at("model").dump());
    const json& s = j.at("sgd");
    cfg.sgd.lr0 = s.at("lr").get<double>();
    cfg.sgd.lr_gamma = s.at("lr_gamma").get<double>();
    cfg.sgd.lr_step_epochs = s.at("lr_step").get<int>();
    cfg.sgd.weight_decay = s.at("weight_decay").get<double>();
    cfg.sgd.batch_size = s.at("batch_size").get<int>();
    cfg.sgd.epochs = s.at("epochs").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad run config JSON: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace cgd
