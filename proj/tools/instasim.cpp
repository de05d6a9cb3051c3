#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "instasim/cli.hpp"

namespace cli = instasim::cli;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "flat key = value config file");
    app->add_option("--set", sets, "extra key=value setting (repeatable)");
    app->add_option("--out", out_dir, "output directory");
    app->add_option("--seed", seed, "random seed (falls back to INSTASIM_SEED)");
    app->add_option("--workers", workers, "worker threads (default: available cores)");
  }

  // Config file, then --set entries, then dedicated flags; validated here.
  std::pair<cli::RunConfig, std::uint64_t> resolve() const {
    cli::RunConfig c = config_path.empty() ? cli::RunConfig{} : cli::load_run_config(config_path);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw cli::ConfigError("--set expects key=value, got '" + kv + "'");
      cli::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!out_dir.empty()) c.out_dir = out_dir;
    if (workers) c.train.workers = *workers;
    const std::uint64_t s = cli::resolve_seed(seed, c.seed, std::getenv("INSTASIM_SEED"));
    cli::finalize(c, s);
    return {c, s};
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instance-centric multi-agent traffic simulation"};
  app.require_subcommand(1);

  cli::GenOptions gen;
  std::optional<std::uint64_t> gen_seed;
  auto* gen_cmd = app.add_subcommand("gen", "generate synthetic scenarios");
  gen_cmd->add_option("template", gen.tmpl, "straight | curve | intersection | merge")->required();
  gen_cmd->add_option("agents", gen.n_agents, "agents per scenario")->required();
  gen_cmd->add_option("count", gen.count, "number of scenarios")->required();
  gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--seed", gen_seed, "random seed (falls back to INSTASIM_SEED)");

  Common train_common;
  std::string reward_mode, sweep, resume;
  std::optional<int> epochs;
  auto* train_cmd = app.add_subcommand("train", "AIRL self-play training");
  train_common.add(train_cmd);
  train_cmd->add_option("--reward-mode", reward_mode, "adaptive[:target] | constant:c");
  train_cmd->add_option("--sweep-target", sweep, "adaptive target grid lo:hi:step");
  train_cmd->add_option("--resume", resume, "checkpoint (.bin) to continue from");
  train_cmd->add_option("--epochs", epochs, "total epochs");

  Common eval_common;
  std::string eval_ckpt;
  bool cv = false;
  auto* eval_cmd = app.add_subcommand("eval", "closed-loop evaluation");
  eval_common.add(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "policy checkpoint (.bin)");
  eval_cmd->add_flag("--cv-baseline", cv, "evaluate the constant-velocity baseline");

  Common bench_common;
  cli::BenchOptions bench;
  std::string bench_ckpt, envs = "1,2,4", agents = "4,8";
  auto* bench_cmd = app.add_subcommand("bench", "throughput and encoder scaling benchmark");
  bench_common.add(bench_cmd);
  bench_cmd->add_option("--checkpoint", bench_ckpt, "policy checkpoint (.bin); default: fresh weights");
  bench_cmd->add_option("--envs", envs, "comma-separated environment counts");
  bench_cmd->add_option("--agents", agents, "comma-separated agent counts");
  bench_cmd->add_option("--horizon", bench.horizon, "steps per rollout");
  bench_cmd->add_option("--reps", bench.repetitions, "timed repetitions");
  bench_cmd->add_option("--warmup", bench.warmup, "untimed warmup steps");
  bench_cmd->add_flag("--compare-agent-centric", bench.compare_agent_centric, "add the agent-centric reference path");

  cli::GradcheckOptions grad;
  std::optional<std::uint64_t> grad_seed;
  std::string grad_out;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  grad_cmd->add_flag("--inject-bug", grad.inject_bug, "corrupt one gradient per check (negative control)");
  grad_cmd->add_option("--seed", grad_seed, "random seed (falls back to INSTASIM_SEED)");
  grad_cmd->add_option("--out", grad_out, "directory for gradcheck.json");

  cli::ExportOptions exp;
  std::string exp_out;
  std::vector<std::string> exp_logs;
  auto* exp_cmd = app.add_subcommand("export-plots", "training logs to tidy CSV");
  exp_cmd->add_option("--log", exp_logs, "train_log.jsonl files")->required();
  exp_cmd->add_option("--out", exp_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  try {
    const char* env = std::getenv("INSTASIM_SEED");
    if (*gen_cmd) {
      gen.seed = cli::resolve_seed(gen_seed, std::nullopt, env);
      return cli::cmd_gen(gen, std::cout);
    }
    if (*train_cmd) {
      if (epochs) train_common.sets.push_back("epochs=" + std::to_string(*epochs));
      if (!reward_mode.empty()) train_common.sets.push_back("reward_mode=" + reward_mode);
      cli::TrainOptions opt;
      std::tie(opt.config, opt.seed) = train_common.resolve();
      if (!sweep.empty()) opt.sweep = cli::parse_sweep(sweep);
      opt.resume = resume;
      return cli::cmd_train(opt, std::cout);
    }
    if (*eval_cmd) {
      cli::EvalOptions opt;
      std::tie(opt.config, opt.seed) = eval_common.resolve();
      opt.checkpoint = eval_ckpt;
      opt.cv_baseline = cv;
      return cli::cmd_eval(opt, std::cout);
    }
    if (*bench_cmd) {
      std::tie(bench.config, bench.seed) = bench_common.resolve();
      bench.checkpoint = bench_ckpt;
      bench.env_counts = cli::parse_int_list(envs);
      bench.agent_counts = cli::parse_int_list(agents);
      return cli::cmd_bench(bench, std::cout);
    }
    if (*grad_cmd) {
      grad.seed = cli::resolve_seed(grad_seed, std::nullopt, env);
      grad.out_dir = grad_out;
      return cli::cmd_gradcheck(grad, std::cout);
    }
    if (*exp_cmd) {
      for (const std::string& l : exp_logs) exp.logs.emplace_back(l);
      exp.out_dir = exp_out;
      return cli::cmd_export_plots(exp, std::cout);
    }
  } catch (const cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitRuntime;
  }
  return cli::kExitUsage;
}
