#include <charconv>
#include <fstream>
#include <sstream>

#include "unp/experiment.hpp"

namespace unp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ConfigError(key + ": cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  return parse_key_values(f);
}

void apply_hyperparameter(Hyperparameters& hp, const std::string& name, const std::string& value) {
  const std::string key = "hp." + name;
  if (name == "critic_lr") hp.critic_lr = parse_number<double>(key, value);
  else if (name == "actor_lr") hp.actor_lr = parse_number<double>(key, value);
  else if (name == "target_rate") hp.target_rate = parse_number<double>(key, value);
  else if (name == "gamma") hp.gamma = parse_number<double>(key, value);
  else if (name == "exploration_steps") hp.exploration_steps = parse_number<int>(key, value);
  else if (name == "exploration_factor") hp.exploration_factor = parse_number<double>(key, value);
  else if (name == "batch_size") hp.batch_size = parse_number<int>(key, value);
  else if (name == "buffer_capacity") hp.buffer_capacity = parse_number<int>(key, value);
  else if (name == "exploration_floor") hp.exploration_floor = parse_number<double>(key, value);
  else if (name == "initial_noise") hp.initial_noise = parse_number<double>(key, value);
  else if (name == "train_interval") hp.train_interval = parse_number<int>(key, value);
  else if (name == "bootstrap_on_timeout") hp.bootstrap_on_timeout = parse_bool(key, value);
  else if (name == "blocked_penalty") hp.blocked_penalty = parse_bool(key, value);
  else if (name == "small_actor_output") hp.small_actor_output = parse_bool(key, value);
  else if (name == "optimizer") {
    try {
      hp.optimizer = optimizer_from_string(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(key) + ": " + e.what());
    }
  }
  else throw ConfigError("unknown hyperparameter '" + name + "'");
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "env") {
    try {
      cfg.env = env_kind_from_string(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "shield") {
    cfg.shield = shield_mode_from_string(value);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) cfg.seeds.push_back(parse_number<std::uint64_t>(key, trim(item)));
  } else if (key == "episodes") {
    cfg.max_episodes = parse_number<int>(key, value);
  } else if (key == "out") {
    cfg.output_dir = value;
  } else if (key == "stop_on_convergence") {
    cfg.stop_on_convergence = parse_bool(key, value);
  } else if (key == "parallel") {
    cfg.parallel = parse_bool(key, value);
  } else if (key == "mbs.depth") {
    cfg.mbs_depth = parse_number<int>(key, value);
  } else if (key == "mbs.branch") {
    cfg.mbs_branch = parse_number<int>(key, value);
  } else if (key.rfind("hp.", 0) == 0) {
    apply_hyperparameter(cfg.hp, key.substr(3), value);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

ExperimentConfig config_from_settings(const std::map<std::string, std::string>& settings) {
  EnvKind kind = EnvKind::cartpole;
  if (auto it = settings.find("env"); it != settings.end()) {
    try {
      kind = env_kind_from_string(it->second);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  ExperimentConfig cfg = ExperimentConfig::for_env(kind);
  for (const auto& [key, value] : settings)
    if (key != "env") apply_setting(cfg, key, value);
  return cfg;
}

}  // namespace unp
