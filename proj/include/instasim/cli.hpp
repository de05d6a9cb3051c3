#ifndef INSTASIM_CLI_HPP_
#define INSTASIM_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "instasim/airl.hpp"
#include "instasim/rl/trainer.hpp"
#include "instasim/scene.hpp"
#include "instasim/synthetic.hpp"

namespace instasim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Invalid configuration or arguments (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // Workers default to the available cores.
  RunConfig();

  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "out";
  std::filesystem::path scenarios;  // manifest, directory or single file; empty: generate
  synthetic::Template tmpl = synthetic::Template::kStraight;
  int n_agents = 4;
  int n_scenarios = 8;
  int n_validation = 8;
  std::string model = "small";
  double policy_radius = 50.0;
  double disc_radius = 30.0;
  rl::TrainConfig train;
};

// Every key accepted by the config file, in documentation order.
const std::vector<std::string>& config_keys();

// Sets one key. Throws ConfigError for unknown keys and unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// `key = value` lines; `#` starts a comment. Duplicate keys are rejected.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);

// "adaptive", "adaptive:<target>" or "constant:<c>".
airl::RewardTransform parse_reward_mode(const std::string& text);
// "lo:hi:step", inclusive.
std::vector<double> parse_sweep(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

// Command-line value, then the config value, then INSTASIM_SEED, then 0.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config,
                           const char* env);

// Fills the derived training fields (sizes, radii, seed, output directory)
// and validates the whole configuration. Throws ConfigError.
void finalize(RunConfig& config, std::uint64_t seed);

std::uint64_t scenario_seed(std::uint64_t seed, int index);
std::vector<scene::Scenario> generate_scenarios(synthetic::Template tmpl, int n_agents, int count,
                                                std::uint64_t seed);
// A directory (its manifest.json, else every *.json in name order), a
// manifest or one scenario file.
std::vector<scene::Scenario> load_scenario_set(const std::filesystem::path& path);
std::vector<const scene::Scenario*> pointers(const std::vector<scene::Scenario>& scenarios);

// Policy architecture recorded in a checkpoint manifest.
rl::ModelConfig model_config_for_checkpoint(const std::filesystem::path& checkpoint, double radius);

struct GenOptions {
  std::string tmpl = "straight";
  int n_agents = 4;
  int count = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
};
int cmd_gen(const GenOptions& options, std::ostream& log);

struct TrainOptions {
  RunConfig config;
  std::uint64_t seed = 0;
  std::vector<double> sweep;  // adaptive targets; empty: single run
  std::filesystem::path resume;
};
int cmd_train(const TrainOptions& options, std::ostream& log);

struct EvalOptions {
  RunConfig config;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint;
  bool cv_baseline = false;
};
int cmd_eval(const EvalOptions& options, std::ostream& log);

struct BenchOptions {
  RunConfig config;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint;  // empty: freshly initialised model
  std::vector<int> env_counts{1, 2, 4};
  std::vector<int> agent_counts{4, 8};
  int horizon = 50;
  int repetitions = 5;
  int warmup = 3;
  bool compare_agent_centric = false;
};
int cmd_bench(const BenchOptions& options, std::ostream& log);

struct GradcheckOptions {
  std::uint64_t seed = 0;
  bool inject_bug = false;
  std::filesystem::path out_dir;  // empty: no report file
};
int cmd_gradcheck(const GradcheckOptions& options, std::ostream& log);

struct ExportOptions {
  std::vector<std::filesystem::path> logs;
  std::filesystem::path out_dir;
};
// Training logs to tidy CSV rows: run,epoch,metric,value.
int cmd_export_plots(const ExportOptions& options, std::ostream& log);

}  // namespace instasim::cli

#endif  // INSTASIM_CLI_HPP_
