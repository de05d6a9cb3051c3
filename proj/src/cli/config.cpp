#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "instasim/cli.hpp"

namespace instasim::cli {
namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(out)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

template <typename T>
T to_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string reward_string(const airl::RewardTransform& r) {
  return r.mode == airl::RewardMode::kAdaptive ? "adaptive:" + fmt(r.target) : "constant:" + fmt(r.constant);
}

struct Setting {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define INSTASIM_DOUBLE(KEY, EXPR)                                                       \
  Setting {                                                                               \
    KEY, [](RunConfig& c, const std::string& v) { c.EXPR = to_double(KEY, v); },          \
        [](const RunConfig& c) { return fmt(c.EXPR); }                                    \
  }
#define INSTASIM_INT(KEY, EXPR)                                                                     \
  Setting {                                                                                          \
    KEY, [](RunConfig& c, const std::string& v) { c.EXPR = to_integer<decltype(c.EXPR)>(KEY, v); },   \
        [](const RunConfig& c) { return std::to_string(c.EXPR); }                                    \
  }

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = {
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_integer<std::uint64_t>("seed", v); },
       [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }},
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir.string(); }},
      {"scenarios", [](RunConfig& c, const std::string& v) { c.scenarios = v; },
       [](const RunConfig& c) { return c.scenarios.string(); }},
      {"template",
       [](RunConfig& c, const std::string& v) {
         try {
           c.tmpl = synthetic::template_from_string(v);
         } catch (const std::invalid_argument& e) {
           throw ConfigError(std::string("template: ") + e.what());
         }
       },
       [](const RunConfig& c) { return synthetic::to_string(c.tmpl); }},
      INSTASIM_INT("n_agents", n_agents),
      INSTASIM_INT("n_scenarios", n_scenarios),
      INSTASIM_INT("n_validation", n_validation),
      {"model",
       [](RunConfig& c, const std::string& v) {
         if (v != "small" && v != "full") throw ConfigError("model: expected small or full, got '" + v + "'");
         c.model = v;
       },
       [](const RunConfig& c) { return c.model; }},
      INSTASIM_DOUBLE("policy_radius", policy_radius),
      INSTASIM_DOUBLE("disc_radius", disc_radius),
      {"reward_mode", [](RunConfig& c, const std::string& v) { c.train.reward = parse_reward_mode(v); },
       [](const RunConfig& c) { return reward_string(c.train.reward); }},
      INSTASIM_INT("epochs", train.epochs),
      INSTASIM_INT("envs_per_epoch", train.envs_per_epoch),
      INSTASIM_INT("workers", train.workers),
      INSTASIM_DOUBLE("disc_lr", train.disc_lr),
      INSTASIM_INT("disc_batch", train.disc_batch),
      INSTASIM_INT("disc_steps", train.disc_steps),
      INSTASIM_INT("checkpoint_every", train.checkpoint_every),
      INSTASIM_DOUBLE("lr_decay_fraction", train.lr_decay_fraction),
      INSTASIM_DOUBLE("lr_decay_factor", train.lr_decay_factor),
      INSTASIM_DOUBLE("lr", train.ppo.lr),
      INSTASIM_DOUBLE("clip_eps", train.ppo.clip_eps),
      INSTASIM_INT("epochs_per_batch", train.ppo.epochs_per_batch),
      INSTASIM_INT("minibatch", train.ppo.minibatch),
      INSTASIM_DOUBLE("weight_decay", train.ppo.weight_decay),
      INSTASIM_DOUBLE("gamma", train.ppo.gamma),
      INSTASIM_DOUBLE("lambda", train.ppo.lambda),
      INSTASIM_DOUBLE("value_coef", train.ppo.value_coef),
      INSTASIM_DOUBLE("entropy_coef", train.ppo.entropy_coef),
      INSTASIM_DOUBLE("max_grad_norm", train.ppo.max_grad_norm),
  };
  return table;
}

#undef INSTASIM_DOUBLE
#undef INSTASIM_INT

}  // namespace

RunConfig::RunConfig() { train.workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Setting& s : settings()) k.push_back(s.key);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Setting& s : settings()) {
    if (s.key == key) {
      s.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError("duplicate config key '" + key + "'");
    apply_setting(config, key, value);
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const Setting& s : settings()) {
    const std::string v = s.get(config);
    if (!v.empty()) out += s.key + " = " + v + "\n";
  }
  return out;
}

airl::RewardTransform parse_reward_mode(const std::string& text) {
  airl::RewardTransform r;
  const auto colon = text.find(':');
  const std::string mode = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : text.substr(colon + 1);
  if (mode == "adaptive") {
    r.mode = airl::RewardMode::kAdaptive;
    if (!arg.empty()) r.target = to_double("reward_mode", arg);
  } else if (mode == "constant" && !arg.empty()) {
    r.mode = airl::RewardMode::kConstant;
    r.constant = to_double("reward_mode", arg);
  } else {
    throw ConfigError("reward_mode: expected adaptive[:target] or constant:c, got '" + text + "'");
  }
  return r;
}

std::vector<double> parse_sweep(const std::string& text) {
  std::vector<double> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ':')) parts.push_back(to_double("sweep", item));
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw ConfigError("sweep: expected lo:hi:step with step > 0 and lo <= hi, got '" + text + "'");
  }
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double v = parts[0] + k * parts[2];
    if (v > parts[1] + 1e-9 * parts[2]) break;
    out.push_back(v);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const int v = to_integer<int>("list", trim(item));
    if (v < 1) throw ConfigError("list entries must be >= 1, got '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config, const char* env) {
  if (flag) return *flag;
  if (config) return *config;
  if (env != nullptr && *env != '\0') return to_integer<std::uint64_t>("INSTASIM_SEED", env);
  return 0;
}

void finalize(RunConfig& config, std::uint64_t seed) {
  if (config.n_agents < 1) throw ConfigError("n_agents must be >= 1");
  if (config.n_scenarios < 1) throw ConfigError("n_scenarios must be >= 1");
  if (config.n_validation < 1) throw ConfigError("n_validation must be >= 1");
  if (!(config.policy_radius > 0.0) || !(config.disc_radius > 0.0)) throw ConfigError("radii must be > 0");
  const bool full = config.model == "full";
  config.train.model.encoder =
      full ? encoder::EncoderConfig::full(config.policy_radius) : encoder::EncoderConfig::small(config.policy_radius);
  config.train.disc_encoder =
      full ? encoder::EncoderConfig::full(config.disc_radius) : encoder::EncoderConfig::small(config.disc_radius);
  config.seed = seed;
  config.train.seed = seed;
  config.train.out_dir = config.out_dir;
  try {
    config.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace instasim::cli
